import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lateral_ovm import kernels
from lateral_ovm.simulator import (
    LaneState,
    PerturbationSpec,
    RingConfig,
    SimOptions,
    SimulationAborted,
    SystemState,
    adjacent_leader,
    initialize,
    measure_amplitude,
    standard_ring,
    run,
    run_from,
    steady_velocity,
    step,
)
from lateral_ovm.validation import conservation_error, ordering_preserved

from conftest import make_params

STABLE = make_params(alpha=4.5, p=0.8, q=0.2, lambda1=0.16, lambda2=0.04)


def ring_state(offset, n=100, h=7.0):
    x = np.arange(n) * h
    v = np.full(n, 2.0)
    c = n * h
    return SystemState((LaneState(x.copy(), v.copy(), c), LaneState((x + offset) % c, v.copy(), c)))


def test_initialize_circumferences(own_lane_params):
    state = initialize(standard_ring(), own_lane_params)
    assert [lane.circumference for lane in state.lanes] == pytest.approx([699.6, 698.8], abs=1e-12)
    flat = initialize(RingConfig(), own_lane_params)
    assert flat.circumferences == pytest.approx([700.0, 700.0])
    h = state.lanes[0].headways
    assert h[45] == 7.0 and h[46] == pytest.approx(6.9) and h[49] == pytest.approx(6.9) and h[50] == 7.0
    assert state.lanes[0].positions[0] == 0.0
    assert np.all(state.lanes[0].velocities == pytest.approx(steady_velocity(7.0, own_lane_params)))


def test_steady_velocity(lateral_params):
    v7 = 1.9999966738878893435
    assert steady_velocity(7.0, lateral_params, "open") == pytest.approx(v7, rel=1e-14)
    assert steady_velocity(7.0, lateral_params, "dynamic") == pytest.approx(v7, rel=1e-14)
    assert steady_velocity(7.0, lateral_params, "closed") == pytest.approx(0.8 * v7, rel=1e-14)
    assert steady_velocity(12.0, lateral_params, "dynamic") == pytest.approx(0.8 * (2 * (np.tanh(5) + np.tanh(7))))


def test_perturbation_errors():
    with pytest.raises(ValueError):
        PerturbationSpec(0.0)
    with pytest.raises(ValueError):
        PerturbationSpec(7.0, ((5, 2, 0.1),))
    with pytest.raises(ValueError):
        PerturbationSpec(0.2, ((0, 1, -0.3),))
    with pytest.raises(ValueError):
        PerturbationSpec(7.0, ((0, 200, 0.1),)).headways(100)
    with pytest.raises(ValueError):
        RingConfig(1)


def test_sim_options_errors():
    for bad in (dict(dt=0), dict(duration=-1), dict(scheme="rk2"), dict(mode="any"), dict(gate="half"),
                dict(duration=1.05), dict(sample_every=0.05)):
        with pytest.raises(ValueError):
            SimOptions(**bad)


@pytest.mark.parametrize("mode", ["nearest", "paired"])
def test_adjacent_leader(backend, mode):
    aligned = ring_state(0.0)
    assert adjacent_leader(aligned, 0, 10, mode, backend) == (7.0, 2.0)
    shifted = ring_state(3.5)
    gap, _ = adjacent_leader(shifted, 0, 10, mode, backend)
    assert gap == pytest.approx(3.5 if mode == "nearest" else 10.5)
    gap, _ = adjacent_leader(shifted, 1, 10, mode, backend)
    assert gap == pytest.approx(3.5)


def test_adjacent_leader_wraps(backend):
    state = ring_state(0.0)
    # the last vehicle's leader on the other lane sits past the seam
    assert adjacent_leader(state, 0, 99, "nearest", backend)[0] == pytest.approx(7.0)
    assert adjacent_leader(state, 0, 99, "paired", backend)[0] == pytest.approx(7.0)


def test_nearest_is_smallest_positive_gap(backend):
    rng = np.random.default_rng(3)
    n, c = 30, 210.0
    x = np.sort(rng.uniform(0, c, (2, n)), axis=1)
    state = SystemState.from_arrays(x, np.ones((2, n)), np.array([c, c]), 0.0)
    for lane in (0, 1):
        for i in range(n):
            gaps = (x[1 - lane] - x[lane, i]) % c
            gaps = gaps[gaps > 0]
            assert adjacent_leader(state, lane, i, "nearest", backend)[0] == pytest.approx(gaps.min(), abs=1e-12)


@pytest.mark.parametrize("scheme", ["euler", "rk4"])
def test_fixed_point(backend, scheme):
    ring = RingConfig(100, (PerturbationSpec(7.0), PerturbationSpec(7.0)))
    rec = run(ring, STABLE, SimOptions(scheme=scheme, duration=1000.0, sample_every=10.0), backend)
    assert np.max(np.abs(rec.headways - 7.0)) < 1e-9
    assert np.max(np.abs(rec.velocities - steady_velocity(7.0, STABLE))) < 1e-9


def test_causality(backend):
    params = make_params(alpha=2.0, p=1.0, q=0.0, lambda1=0.2, lambda2=0.0)
    base = initialize(standard_ring(), params)
    after = step(base, params, 0.1, "euler", backend=backend)
    # disturb the other lane and a follower: lane 1 vehicle 60 must not notice
    x, v, c = base.arrays()
    x2, v2 = x.copy(), v.copy()
    x2[1] = (x2[1] + 1.3) % c[1]
    v2[1] += 0.5
    v2[0, 59] += 0.5
    moved = step(SystemState.from_arrays(x2, v2, c, 0.0), params, 0.1, "euler", backend=backend)
    assert moved.lanes[0].velocities[60] == after.lanes[0].velocities[60]
    assert moved.lanes[0].positions[60] == after.lanes[0].positions[60]
    # its leader does
    v3 = v.copy()
    v3[0, 61] += 0.5
    nudged = step(SystemState.from_arrays(x, v3, c, 0.0), params, 0.1, "euler", backend=backend)
    assert nudged.lanes[0].velocities[60] > after.lanes[0].velocities[60]


def test_determinism(backend, own_lane_params):
    opts = SimOptions(duration=100.0)
    assert run(standard_ring(), own_lane_params, opts, backend).identical(run(standard_ring(), own_lane_params, opts, backend))


def test_zero_duration(own_lane_params):
    rec = run(standard_ring(), own_lane_params, SimOptions(duration=0.0))
    assert rec.times.tolist() == [0.0]
    assert rec.headways.shape == (1, 2, 100)
    assert np.allclose(rec.headways[0, 1, 46:50], 6.7)


def test_record_read_only(own_lane_params):
    rec = run(standard_ring(), own_lane_params, SimOptions(duration=1.0))
    with pytest.raises(ValueError):
        rec.headways[0, 0, 0] = 1.0
    assert rec.sample_at(1.0) == 1
    with pytest.raises(ValueError):
        rec.sample_at(0.5)


@pytest.mark.parametrize("mode", ["nearest", "paired"])
def test_conservation_and_ordering(backend, mode, lateral_unstable_params):
    rec = run(standard_ring(), lateral_unstable_params, SimOptions(duration=300.0, mode=mode), backend)
    assert conservation_error(rec) < 1e-9
    assert ordering_preserved(rec)
    assert np.all(rec.velocities >= 0)


def test_collision_aborts(backend):
    params = make_params(alpha=0.01, p=1.0, q=0.0)
    x = np.array([[0.0, 1.0, 50.0], [0.0, 20.0, 40.0]])
    v = np.array([[10.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
    state = SystemState.from_arrays(x, v, np.array([60.0, 60.0]), 0.0)
    with pytest.raises(SimulationAborted) as info:
        run_from(state, params, SimOptions(dt=0.1, scheme="euler", duration=1.0, sample_every=0.1), backend)
    err = info.value
    assert "collision" in err.reason and err.lane == 0 and err.vehicle == 0
    assert err.time == pytest.approx(0.1)
    assert err.record is not None and err.record.times.tolist() == [0.0]
    v[0, 0] = 30.0  # jumps past its leader in one step
    with pytest.raises(SimulationAborted, match="overtaking"):
        run_from(SystemState.from_arrays(x, v, np.array([60.0, 60.0]), 0.0), params, SimOptions(duration=1.0), backend)


def test_nonfinite_aborts(backend, own_lane_params):
    x, v, c = initialize(standard_ring(), own_lane_params).arrays()
    v[1, 3] = np.nan
    with pytest.raises(SimulationAborted, match="non-finite"):
        run_from(SystemState.from_arrays(x, v, c, 0.0), own_lane_params, SimOptions(duration=1.0), backend)
    with pytest.raises(SimulationAborted, match="non-finite"):
        step(SystemState.from_arrays(x, v, c, 0.0), own_lane_params, 0.1)


def test_translation_invariance(backend, lateral_unstable_params):
    ring = RingConfig(100, (PerturbationSpec(7.0, ((46, 49, -0.1),)), PerturbationSpec(7.0, ((20, 21, -0.2),))))
    opts = SimOptions(duration=50.0, sample_every=10.0)
    x, v, c = initialize(ring, lateral_unstable_params).arrays()
    # keep the lanes staggered: coincident vehicles make the nearest gap hinge on the last bit
    x[1] = (x[1] + 3.5) % c[1]
    ref = run_from(SystemState.from_arrays(x, v, c, 0.0), lateral_unstable_params, opts, backend)
    shifted = run_from(SystemState.from_arrays((x + 123.4) % c[:, None], v, c, 0.0), lateral_unstable_params, opts, backend)
    assert np.max(np.abs(ref.headways - shifted.headways)) < 1e-9


def test_rotation_invariance_unequal_lanes(backend, lateral_unstable_params):
    opts = SimOptions(duration=50.0, sample_every=10.0)
    x, v, c = initialize(standard_ring(), lateral_unstable_params).arrays()
    x[1] = (x[1] + 3.5) % c[1]
    ref = run_from(SystemState.from_arrays(x, v, c, 0.0), lateral_unstable_params, opts, backend)
    turn = 0.137  # fraction of a lap, same angle on both lanes
    rotated = (x + turn * c[:, None]) % c[:, None]
    rot = run_from(SystemState.from_arrays(rotated, v, c, 0.0), lateral_unstable_params, opts, backend)
    assert np.max(np.abs(ref.headways - rot.headways)) < 1e-9


def test_backends_agree(lateral_unstable_params):
    if len(kernels.available()) < 2:
        pytest.skip("compiled backend not built")
    for mode in ("nearest", "paired"):
        for scheme in ("euler", "rk4"):
            opts = SimOptions(duration=200.0, mode=mode, scheme=scheme)
            a = run(standard_ring(), lateral_unstable_params, opts, "cython")
            b = run(standard_ring(), lateral_unstable_params, opts, "python")
            assert np.max(np.abs(a.headways - b.headways)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(x=st.lists(st.floats(0, 99.9), min_size=6, max_size=6), mode=st.sampled_from([0, 1]))
def test_kernel_leaders_agree(x, mode):
    if len(kernels.available()) < 2:
        return
    arr = np.sort(np.array(x).reshape(2, 3), axis=1)
    circ = np.array([100.0, 97.0])
    arr[1] *= 0.97
    g1, i1 = kernels.get("cython").lateral_leaders(arr, circ, mode)
    g2, i2 = kernels.get("python").lateral_leaders(arr, circ, mode)
    assert np.allclose(g1, g2, atol=1e-12)


def test_measure_amplitude(own_lane_params):
    rec = run(standard_ring(), own_lane_params, SimOptions(duration=2.0))
    start = measure_amplitude(rec, (0, 0))
    assert start == pytest.approx([0.1, 0.3])
    with pytest.raises(ValueError):
        measure_amplitude(rec, (5, 6))


@pytest.mark.parametrize("choice", ["python", "cython"])
def test_backend_env_override(choice):
    if choice not in kernels.available():
        pytest.skip("compiled backend not built")
    env = dict(os.environ, LATERAL_OVM_BACKEND=choice)
    out = subprocess.run([sys.executable, "-c", "from lateral_ovm import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == choice
