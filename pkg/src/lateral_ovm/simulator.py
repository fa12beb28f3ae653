"""Two-lane ring road: periodic boundary, no overtaking, no lane changes.

Vehicle ``n`` follows vehicle ``n + 1`` on its own lane (the last vehicle
follows vehicle 0). Lanes may have different circumferences; a vehicle on
the other lane is projected onto the subject's lane by its angular position,
i.e. a position ``x`` on a lane of circumference ``C_o`` appears at
``x * C_s / C_o`` on a lane of circumference ``C_s``. For equal
circumferences this is the plain positional difference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import ModelParams, gate_open, optimal_velocity

LANES = 2


@dataclass(frozen=True)
class PerturbationSpec:
    """Initial headways: ``baseline_headway`` plus ``delta`` on inclusive index ranges."""

    baseline_headway: float = 7.0
    deltas: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple((int(a), int(b), float(dd)) for a, b, dd in self.deltas))
        if not self.baseline_headway > 0:
            raise ValueError(f"baseline_headway must be > 0 (got {self.baseline_headway!r})")
        for first, last, delta in self.deltas:
            if first > last or first < 0:
                raise ValueError(f"bad index range {first}..{last}")
            if not self.baseline_headway + delta > 0:
                raise ValueError(f"baseline_headway + delta must be > 0 (got {self.baseline_headway + delta!r})")

    def headways(self, n: int) -> np.ndarray:
        h = np.full(n, float(self.baseline_headway))
        for first, last, delta in self.deltas:
            if last >= n:
                raise ValueError(f"perturbed index {last} out of range for {n} vehicles")
            h[first:last + 1] = self.baseline_headway + delta
        return h


@dataclass(frozen=True)
class RingConfig:
    n_vehicles: int = 100
    lane_perturbations: tuple[PerturbationSpec, PerturbationSpec] = (PerturbationSpec(), PerturbationSpec())

    def __post_init__(self):
        if self.n_vehicles < 2:
            raise ValueError(f"n_vehicles must be >= 2 (got {self.n_vehicles})")
        if len(self.lane_perturbations) != LANES:
            raise ValueError("need exactly one PerturbationSpec per lane")
        object.__setattr__(self, "lane_perturbations", tuple(self.lane_perturbations))


def standard_ring(n_vehicles: int = 100, baseline: float = 7.0,
               deltas: tuple[float, float] = (-0.1, -0.3), indices: tuple[int, int] = (46, 49)) -> RingConfig:
    """Standard two-lane experiment: a few short headways mid-ring on each lane."""
    first, last = indices
    return RingConfig(n_vehicles, tuple(PerturbationSpec(baseline, ((first, last, dd),)) for dd in deltas))


@dataclass
class LaneState:
    positions: np.ndarray
    velocities: np.ndarray
    circumference: float

    @property
    def headways(self) -> np.ndarray:
        h = np.roll(self.positions, -1) - self.positions
        return np.where(h < 0, h + self.circumference, h)


@dataclass
class SystemState:
    lanes: tuple[LaneState, LaneState]
    time: float = 0.0

    @property
    def circumferences(self) -> np.ndarray:
        return np.array([lane.circumference for lane in self.lanes])

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.array([lane.positions for lane in self.lanes], dtype=float)
        v = np.array([lane.velocities for lane in self.lanes], dtype=float)
        return x, v, self.circumferences

    @classmethod
    def from_arrays(cls, x, v, circ, time: float) -> "SystemState":
        return cls(tuple(LaneState(x[k].copy(), v[k].copy(), float(circ[k])) for k in range(LANES)), time)


@dataclass(frozen=True)
class SimOptions:
    dt: float = 0.1
    scheme: str = "rk4"
    duration: float = 1000.0
    sample_every: float = 1.0
    mode: str = "nearest"
    gate: str = "dynamic"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0 (got {self.dt!r})")
        if not self.duration >= 0:
            raise ValueError(f"duration must be >= 0 (got {self.duration!r})")
        if not self.sample_every > 0:
            raise ValueError(f"sample_every must be > 0 (got {self.sample_every!r})")
        for name, table in (("scheme", kernels.SCHEMES), ("mode", kernels.MODES), ("gate", kernels.GATES)):
            if getattr(self, name) not in table:
                raise ValueError(f"{name} must be one of {sorted(table)} (got {getattr(self, name)!r})")
        # dt must divide both duration and sample_every
        _ = self.n_steps, self.stride

    @property
    def n_steps(self) -> int:
        return _whole(self.duration / self.dt, "duration / dt")

    @property
    def stride(self) -> int:
        stride = _whole(self.sample_every / self.dt, "sample_every / dt")
        if stride < 1:
            raise ValueError("sample_every must be at least dt")
        return stride


def _whole(ratio: float, what: str) -> int:
    k = round(ratio)
    if abs(ratio - k) > 1e-9 * max(1.0, abs(ratio)):
        raise ValueError(f"{what} must be a whole number (got {ratio!r})")
    return int(k)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled trajectory. Arrays are ``(sample, lane, vehicle)`` and read-only."""

    times: np.ndarray
    positions: np.ndarray
    headways: np.ndarray
    velocities: np.ndarray
    circumferences: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("times", "positions", "headways", "velocities", "circumferences"):
            getattr(self, name).setflags(write=False)

    @property
    def min_velocity(self) -> float:
        return float(self.velocities.min())

    def sample_at(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[i], t, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"t={t} is not a sample time")
        return i

    def identical(self, other: "TrajectoryRecord") -> bool:
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("times", "positions", "headways", "velocities", "circumferences")
        )


class SimulationAborted(RuntimeError):
    """The run hit a collision, an overtaking event or a non-finite state.

    ``record`` holds the samples taken before the failing step.
    """

    def __init__(self, reason: str, time: float, lane: int, vehicle: int, record: TrajectoryRecord | None = None):
        super().__init__(f"{reason} at t={time:g} s, lane {lane + 1}, vehicle {vehicle}")
        self.reason = reason
        self.time = time
        self.lane = lane
        self.vehicle = vehicle
        self.record = record


def _params_tuple(params: ModelParams) -> tuple:
    return (params.alpha, params.p, params.q, params.lambda1, params.lambda2,
            params.v_max, params.h_c, params.l_v, params.d)


def steady_velocity(headway: float, params: ModelParams, gate: str = "dynamic") -> float:
    """Velocity of the uniform ring where both own and lateral headways equal ``headway``."""
    if gate == "dynamic":
        is_open = bool(gate_open(headway, params))
    else:
        is_open = gate == "open"
    v = float(optimal_velocity(headway, params))
    return params.p * v + params.q * (v if is_open else 0.0)


def initialize(config: RingConfig, params: ModelParams, gate: str = "dynamic") -> SystemState:
    lanes = []
    for spec in config.lane_perturbations:
        h = spec.headways(config.n_vehicles)
        x = np.concatenate([[0.0], np.cumsum(h)[:-1]])
        v = np.full(config.n_vehicles, steady_velocity(spec.baseline_headway, params, gate))
        lanes.append(LaneState(x, v, float(h.sum())))
    return SystemState(tuple(lanes), 0.0)


def adjacent_leader(state: SystemState, lane: int, vehicle: int, mode: str = "nearest",
                    backend: str | None = None) -> tuple[float, float]:
    """Headway to and velocity of the adjacent-lane leader of one vehicle."""
    x, v, circ = state.arrays()
    gap, idx = kernels.get(backend).lateral_leaders(x, circ, kernels.MODES[mode])
    return float(gap[lane, vehicle]), float(v[1 - lane, idx[lane, vehicle]])


def _raise(status, t, lane, veh, record=None):
    raise SimulationAborted(kernels.STATUS[int(status)], t, int(lane), int(veh), record)


def step(state: SystemState, params: ModelParams, dt: float, scheme: str = "rk4",
         mode: str = "nearest", gate: str = "dynamic", backend: str | None = None) -> SystemState:
    if not dt > 0:
        raise ValueError(f"dt must be > 0 (got {dt!r})")
    x, v, circ = state.arrays()
    if not (np.isfinite(x).all() and np.isfinite(v).all()):
        raise SimulationAborted(kernels.STATUS[1], state.time, -1, -1)
    xn, vn, status, lane, veh = kernels.get(backend).step(
        x, v, circ, _params_tuple(params), kernels.MODES[mode], kernels.GATES[gate],
        kernels.SCHEMES[scheme], float(dt))
    if status:
        _raise(status, state.time + dt, lane, veh)
    return SystemState.from_arrays(xn, vn, circ, state.time + dt)


def _record(xs, vs, circ, dt, stride, meta, backend) -> TrajectoryRecord:
    k = kernels.get(backend)
    times = np.arange(len(xs)) * (stride * dt)
    hw = np.array([k.headways(x, circ) for x in xs]).reshape(xs.shape)
    return TrajectoryRecord(times, np.asarray(xs), hw, np.asarray(vs), np.asarray(circ, dtype=float), meta)


def run_from(state: SystemState, params: ModelParams, options: SimOptions,
             backend: str | None = None) -> TrajectoryRecord:
    """Integrate an explicit initial state; sample times are relative to it."""
    x, v, circ = state.arrays()
    k = kernels.get(backend)
    xs, vs, kept, status, fail_step, lane, veh = k.integrate(
        x, v, circ, _params_tuple(params), kernels.MODES[options.mode], kernels.GATES[options.gate],
        kernels.SCHEMES[options.scheme], float(options.dt), options.n_steps, options.stride)
    meta = {"backend": kernels.BACKEND if backend is None else backend, "options": options}
    record = _record(xs[:kept], vs[:kept], circ, options.dt, options.stride, meta, backend)
    if status:
        _raise(status, fail_step * options.dt, lane, veh, record)
    return record


def run(config: RingConfig, params: ModelParams, options: SimOptions = SimOptions(),
        backend: str | None = None) -> TrajectoryRecord:
    """Run from the perturbed uniform state; identical inputs give bit-identical records."""
    return run_from(initialize(config, params, options.gate), params, options, backend)


def measure_amplitude(record: TrajectoryRecord, t_window: tuple[float, float]) -> np.ndarray:
    """Per lane, max minus min headway over the samples inside ``t_window``."""
    lo, hi = t_window
    sel = (record.times >= lo - 1e-9) & (record.times <= hi + 1e-9)
    if not sel.any():
        raise ValueError(f"no samples in window {t_window}")
    h = record.headways[sel]
    return h.max(axis=(0, 2)) - h.min(axis=(0, 2))
