"""Optimal-velocity functions and the two-lane acceleration law.

Every function here is pure. Scalars and numpy arrays are both accepted
where it makes sense; the gated lateral functions work element-wise.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Physical and behavioural constants of the two-lane model.

    Parameters
    ----------
    alpha : float
        Driver sensitivity (1/s).
    p, q : float
        Weights of the own-lane and adjacent-lane optimal velocity terms.
    lambda1, lambda2 : float
        Gains on the own-lane and adjacent-lane velocity differences (1/s).
    v_max : float
        Maximum velocity (m/s).
    h_c : float
        Safety headway (m).
    l_v : float
        Vehicle length (m); lower bound of the lateral gate.
    d : float
        Upper bound of the lateral gate (m).
    """

    alpha: float
    p: float = 1.0
    q: float = 0.0
    lambda1: float = 0.0
    lambda2: float = 0.0
    v_max: float = 4.0
    h_c: float = 7.0
    l_v: float = 5.0
    d: float = 10.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        errors = []
        for name in ("alpha", "v_max", "h_c"):
            if not getattr(self, name) > 0:
                errors.append(f"{name} must be > 0 (got {getattr(self, name)!r})")
        for name in ("p", "q", "lambda1", "lambda2"):
            if not getattr(self, name) >= 0:
                errors.append(f"{name} must be >= 0 (got {getattr(self, name)!r})")
        if not (0 < self.l_v < self.d):
            errors.append(f"need 0 < l_v < d (got l_v={self.l_v!r}, d={self.d!r})")
        if errors:
            raise ValueError("; ".join(errors))
        if not math.isclose(self.p + self.q, 1.0, rel_tol=0, abs_tol=1e-12):
            warnings.warn(f"p + q = {self.p + self.q:g} != 1", stacklevel=3)

    def replace(self, **changes) -> "ModelParams":
        return ModelParams(**{**asdict(self), **changes})

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NeighborView:
    """What one driver sees: itself, its own-lane leader, its adjacent-lane leader."""

    v_self: float
    headway: float
    v_lead: float
    lateral_headway: float
    v_lateral_lead: float

    @property
    def valid(self) -> bool:
        return self.headway > 0


def optimal_velocity(h, params: ModelParams):
    """``(v_max/2) * (tanh(h - h_c) + tanh(h_c))``."""
    return params.v_max / 2 * (np.tanh(h - params.h_c) + np.tanh(params.h_c))


def gate_open(h_l, params: ModelParams):
    """True where the adjacent-lane leader is inside ``[l_v, d)``."""
    return (params.l_v <= h_l) & (h_l < params.d)


def lateral_optimal_velocity(h_l, params: ModelParams):
    """Optimal velocity for the lateral headway, exactly 0 outside the gate."""
    return np.where(gate_open(h_l, params), optimal_velocity(h_l, params), 0.0)[()]


def lateral_velocity_difference(view: NeighborView, params: ModelParams) -> float:
    if gate_open(view.lateral_headway, params):
        return view.v_lateral_lead - view.v_self
    return 0.0


def acceleration(view: NeighborView, params: ModelParams) -> float:
    """Acceleration of the subject vehicle under the two-lane law."""
    v_bar = float(lateral_optimal_velocity(view.lateral_headway, params))
    dv_lat = lateral_velocity_difference(view, params)
    v_opt = float(optimal_velocity(view.headway, params))
    return (
        params.alpha * (params.p * v_opt + params.q * v_bar - view.v_self)
        + params.lambda1 * (view.v_lead - view.v_self)
        + params.lambda2 * dv_lat
    )


def _sech2(u):
    with np.errstate(over="ignore"):
        return 1.0 / np.cosh(u) ** 2


def ov_derivative(h, order: int, params: ModelParams):
    """Closed-form derivative of :func:`optimal_velocity` of order 1, 2 or 3."""
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3 (got {order!r})")
    u = np.asarray(h, dtype=float) - params.h_c
    s2 = _sech2(u)
    if order == 1:
        out = params.v_max / 2 * s2
    elif order == 2:
        out = -params.v_max * s2 * np.tanh(u)
    else:
        t = np.tanh(u)
        out = params.v_max * s2 * (2 * t * t - s2)
    return out[()]
