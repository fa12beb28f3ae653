"""Kink-antikink (MKdV) description of the saturated jam near the critical point.

The reduction coefficients ``m1..m5`` contain the sensitivity. By default
they are evaluated at the neutral sensitivity ``a_c`` (the difference from
using the simulation sensitivity is of higher order in epsilon); pass
``evaluate_at="actual"`` to use the caller's ``a`` instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, ov_derivative
from .stability import NEUTRAL_RTOL, OperatingPoint, neutral_sensitivity

DENOMINATOR_TOL = 1e-12


class InvalidCoefficients(ValueError):
    """Raised when a kink quantity is requested outside the kink regime."""


@dataclass(frozen=True)
class MkdvCoefficients:
    a: float
    a_c: float
    h_c: float
    b: float
    epsilon: float
    m1: float
    m2: float
    m3: float
    m4: float
    m5: float
    B: float
    kink_amplitude: float
    valid: bool
    evaluated_at: str = "critical"
    reason: str = ""

    @property
    def denominator(self) -> float:
        return 2 * self.m2 * self.m4 - 3 * self.m1 * self.m5

    @property
    def width_factor(self) -> float:
        """Coefficient of the vehicle index inside the tanh of the headway kink."""
        return math.sqrt(self.epsilon**2 * self.B / 2)

    def require_valid(self) -> None:
        if not self.valid:
            raise InvalidCoefficients(self.reason or "coefficients are not valid")


def reduction_coefficients(slope: float, slope3: float, a: float, lam: float):
    """``m1..m5`` from the effective first and third OV slopes."""
    m1 = (a + 3 * lam) * slope / (6 * a)
    m2 = -slope3 / 6
    m3 = slope / 2
    m4 = (
        4 * (2 * slope - lam) * (a + 3 * lam) / (24 * a * a) * slope
        - (a + 4 * lam) / (24 * a) * slope
    )
    m5 = (2 * (2 * slope - lam) - a) / (12 * a) * slope3
    return m1, m2, m3, m4, m5


def mkdv_coefficients(
    params: ModelParams, point: OperatingPoint, evaluate_at: str = "critical"
) -> MkdvCoefficients:
    if evaluate_at not in ("critical", "actual"):
        raise ValueError(f"evaluate_at must be 'critical' or 'actual' (got {evaluate_at!r})")
    if not math.isclose(point.h, params.h_c, rel_tol=1e-12, abs_tol=1e-12):
        raise ValueError(f"the kink expansion is taken at h = h_c = {params.h_c} (got h={point.h})")

    gate = 1.0 if point.gate_open else 0.0
    v1 = float(ov_derivative(params.h_c, 1, params))
    v3 = float(ov_derivative(params.h_c, 3, params))
    slope = params.p * v1 + params.q * gate * v1
    slope3 = params.p * v3 + params.q * gate * v3
    lam = params.lambda1 + params.lambda2
    a_c = neutral_sensitivity(point, params)
    a = point.a

    reason = ""
    if a_c <= 0:
        reason = f"a_c = {a_c:g} <= 0: uniform flow is stable for every a"
    elif abs(a - a_c) <= NEUTRAL_RTOL * max(1.0, abs(a_c)):
        reason = "neutral point"
    elif a > a_c:
        reason = f"a = {a:g} >= a_c = {a_c:g}: no kink regime"

    a_eval = a_c if (evaluate_at == "critical" and a_c > 0) else a
    m1, m2, m3, m4, m5 = reduction_coefficients(slope, slope3, a_eval, lam)
    denom = 2 * m2 * m4 - 3 * m1 * m5
    eps2 = a_c / a - 1
    epsilon = math.sqrt(eps2) if eps2 > 0 else 0.0

    B = math.nan
    amplitude = 0.0 if reason == "neutral point" else math.nan
    if abs(denom) < DENOMINATOR_TOL:
        reason = reason or f"degenerate denominator 2*m2*m4 - 3*m1*m5 = {denom:.3e}"
    else:
        B = 5 * m2 * m3 / denom
        if not reason:
            radicand = eps2 * 5 * m1 * m3 / denom
            if not B > 0:
                reason = f"non-positive amplitude parameter B = {B:g}"
            elif not radicand > 0:
                reason = f"non-positive squared kink amplitude {radicand:g}"
            else:
                amplitude = math.sqrt(radicand)

    return MkdvCoefficients(
        a=a, a_c=a_c, h_c=params.h_c, b=slope, epsilon=epsilon,
        m1=m1, m2=m2, m3=m3, m4=m4, m5=m5, B=B, kink_amplitude=amplitude,
        valid=not reason, evaluated_at=evaluate_at, reason=reason,
    )


def soliton_amplitude(coeffs: MkdvCoefficients) -> float:
    coeffs.require_valid()
    return 5 * coeffs.m2 * coeffs.m3 / coeffs.denominator


def kink_profile(coeffs: MkdvCoefficients, n, t, time_rescaled: bool = False):
    """Headway kink ``h_c + A*tanh(C*(n + b*t - eps^2*B*t))`` for arrays ``n``, ``t``.

    With ``time_rescaled`` the drift term carries the extra factor ``m1``
    that the time rescaling of the standard equation introduces.
    """
    coeffs.require_valid()
    eps2 = coeffs.epsilon**2
    drift = eps2 * 5 * coeffs.m2 * coeffs.m3 / coeffs.denominator
    if time_rescaled:
        drift *= coeffs.m1
    width = math.sqrt(eps2 * 5 * coeffs.m2 * coeffs.m3 / (4 * coeffs.m2 * coeffs.m4 - 6 * coeffs.m1 * coeffs.m5))
    arg = width * (np.asarray(n, dtype=float) + coeffs.b * np.asarray(t, dtype=float) - drift * np.asarray(t, dtype=float))
    return (coeffs.h_c + coeffs.kink_amplitude * np.tanh(arg))[()]


def kink_headway(n, t, params: ModelParams, point: OperatingPoint,
                 evaluate_at: str = "critical", time_rescaled: bool = False):
    return kink_profile(mkdv_coefficients(params, point, evaluate_at), n, t, time_rescaled)


def coexisting_curve(params: ModelParams, gate_open: bool, a_grid,
                     evaluate_at: str = "critical") -> list[tuple[float, float, float]]:
    """Rows ``(a, h_c - A, h_c + A)`` for each ``a`` at or below the neutral point.

    Sensitivities above ``a_c`` (uniform flow stable) produce no row.
    """
    a_values = [float(a) for a in np.asarray(a_grid, dtype=float).ravel()]
    if not a_values:
        raise ValueError("a_grid is empty")
    if any(not a > 0 for a in a_values):
        raise ValueError("every a in a_grid must be > 0")
    rows = []
    for a in a_values:
        c = mkdv_coefficients(params, OperatingPoint(params.h_c, a, gate_open), evaluate_at)
        if c.valid or c.reason == "neutral point":
            rows.append((a, params.h_c - c.kink_amplitude, params.h_c + c.kink_amplitude))
    return rows


def kink_solution(B: float, X, T):
    """Kink of the standard equation ``R_T - R_XXX + (R^3)_X = 0``."""
    return math.sqrt(B) * np.tanh(math.sqrt(B / 2) * (X - B * T))


def standard_mkdv_residual(B: float, x_range=(-10.0, 10.0), t_range=(0.0, 1.0),
                           n_x: int = 2001, n_t: int = 11,
                           dx: float = 1e-2, dt: float = 1e-3) -> float:
    """Max |R_T - R_XXX + (R^3)_X| of the analytic kink, by central differences.

    The residual is sampled on an ``n_x`` by ``n_t`` grid over the given
    ranges; ``dx`` and ``dt`` are the finite-difference steps. All stencils
    are second order, so the result scales like ``dx**2 + dt**2``.
    """
    if B < 0:
        raise ValueError(f"B must be >= 0 (got {B})")
    if n_x < 1 or n_t < 1 or not (dx > 0 and dt > 0):
        raise ValueError("degenerate grid: need n_x, n_t >= 1 and dx, dt > 0")
    if x_range[1] < x_range[0] or t_range[1] < t_range[0]:
        raise ValueError("degenerate grid: ranges must be non-decreasing")
    X, T = np.meshgrid(np.linspace(*x_range, n_x), np.linspace(*t_range, n_t), indexing="ij")

    def R(x_off=0.0, t_off=0.0):
        return kink_solution(B, X + x_off, T + t_off)

    r_t = (R(t_off=dt) - R(t_off=-dt)) / (2 * dt)
    r_xxx = (R(2 * dx) - 2 * R(dx) + 2 * R(-dx) - R(-2 * dx)) / (2 * dx**3)
    r3_x = (R(dx) ** 3 - R(-dx) ** 3) / (2 * dx)
    return float(np.max(np.abs(r_t - r_xxx + r3_x)))
