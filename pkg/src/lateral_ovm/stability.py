"""Linear stability of uniform two-lane flow in the long-wave limit."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, ov_derivative

NEUTRAL_RTOL = 1e-12


class Classification(str, enum.Enum):
    STABLE = "stable"
    NEUTRAL = "neutral"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class OperatingPoint:
    """Uniform headway ``h``, sensitivity ``a`` and the lateral gate reading.

    ``gate_open`` decides whether the adjacent-lane slope equals the own-lane
    slope (True) or vanishes (False).
    """

    h: float
    a: float
    gate_open: bool = True

    def __post_init__(self):
        if not (self.h > 0 and self.a > 0):
            raise ValueError(f"need h > 0 and a > 0 (got h={self.h!r}, a={self.a!r})")


@dataclass(frozen=True)
class StabilityReport:
    z1: float
    z2: float
    a_c: float
    classification: Classification


def effective_ov_slope(point: OperatingPoint, params: ModelParams) -> float:
    """``p*V'(h) + q*Vbar'(h)`` with ``Vbar' = V'`` only when the gate is open."""
    slope = float(ov_derivative(point.h, 1, params))
    return params.p * slope + (params.q * slope if point.gate_open else 0.0)


def long_wave_coefficients(point: OperatingPoint, params: ModelParams) -> tuple[float, float]:
    s = effective_ov_slope(point, params)
    lam = params.lambda1 + params.lambda2
    z2 = (0.5 + lam / point.a) * s - s * s / point.a
    return s, z2


def neutral_sensitivity(point: OperatingPoint, params: ModelParams) -> float:
    return 2 * effective_ov_slope(point, params) - 2 * (params.lambda1 + params.lambda2)


def classify(point: OperatingPoint, params: ModelParams) -> Classification:
    a_c = neutral_sensitivity(point, params)
    if abs(point.a - a_c) <= NEUTRAL_RTOL * max(1.0, abs(a_c)):
        return Classification.NEUTRAL
    return Classification.STABLE if point.a > a_c else Classification.UNSTABLE


def analyze(point: OperatingPoint, params: ModelParams) -> StabilityReport:
    z1, z2 = long_wave_coefficients(point, params)
    return StabilityReport(z1, z2, neutral_sensitivity(point, params), classify(point, params))


def stability_surface(params: ModelParams, h_grid, gate_open: bool = True) -> np.ndarray:
    """Neutral sensitivity over a headway grid.

    Returns an ``(n, 2)`` array with columns ``h`` and ``a_c``.
    """
    h = np.asarray(h_grid, dtype=float).ravel()
    if h.size == 0:
        raise ValueError("h_grid is empty")
    if np.any(np.diff(h) <= 0):
        raise ValueError("h_grid must be strictly increasing")
    slope = ov_derivative(h, 1, params)
    eff = params.p * slope + (params.q * slope if gate_open else 0.0)
    a_c = 2 * eff - 2 * (params.lambda1 + params.lambda2)
    return np.column_stack([h, a_c])
