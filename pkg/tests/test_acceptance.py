"""Acceptance criteria, each at its stated tolerance.

Every test appends one PASS/FAIL line to the "acceptance criteria" section
printed at the end of the pytest run.
"""
import math

import numpy as np
import pytest

from lateral_ovm import mkdv, simulator, stability, validation
from lateral_ovm.simulator import SimOptions, standard_ring

from conftest import ACCEPTANCE_LINES, make_params

OWN_LANE = dict(alpha=2.85, p=1.0, q=0.0, lambda1=0.2, lambda2=0.0)
LATERAL = dict(p=0.8, q=0.2, lambda1=0.16, lambda2=0.04)


def record(label, passed, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
    assert passed, detail


_runs = {}


def cached_run(alpha, duration, mode="nearest", gate="dynamic", **kw):
    key = (alpha, duration, mode, gate, tuple(sorted(kw.items())))
    if key not in _runs:
        params = make_params(alpha=alpha, **(kw or {k: v for k, v in OWN_LANE.items() if k != "alpha"}))
        opts = SimOptions(duration=duration, sample_every=1.0, mode=mode, gate=gate)
        _runs[key] = (params, simulator.run(standard_ring(), params, opts))
    return _runs[key]


def fmt_lanes(amp):
    return f"lane1 {amp[0]:.5g} m, lane2 {amp[1]:.5g} m"


def test_1a_neutral_sensitivity_closed_form():
    params = make_params(**OWN_LANE)
    a_c = stability.neutral_sensitivity(stability.OperatingPoint(7.0, 1.0), params)
    record("1a  a_c at h=7 equals 3.6 (tol 1e-12)", abs(a_c - 3.6) < 1e-12, f"a_c = {a_c!r}")


def test_1b_stable_side_decays():
    _, rec = cached_run(3.8, 2000.0)
    amp = simulator.measure_amplitude(rec, (2000.0, 2000.0))
    record("1b  a=3.8 amplitude at t=2000 s < 0.01 m", bool(np.all(amp < 0.01)), fmt_lanes(amp))


def test_1c_unstable_side_grows():
    _, rec = cached_run(3.4, 2000.0)
    amp = simulator.measure_amplitude(rec, (2000.0, 2000.0))
    record("1c  a=3.4 amplitude at t=2000 s > 0.1 m", bool(np.all(amp > 0.1)), fmt_lanes(amp))


def test_2_own_lane_lane2_exceeds_lane1():
    _, rec = cached_run(2.85, 1000.0)
    start = simulator.measure_amplitude(rec, (0.0, 0.0))
    amp = simulator.measure_amplitude(rec, (900.0, 1000.0))
    grew = bool(np.all(amp > start))
    record("2   own-lane run (a=2.85, q=0): kinks on both lanes, lane2 amplitude > lane1 over [900, 1000] s",
           grew and amp[1] > amp[0], f"{fmt_lanes(amp)} (initial {start[0]:.2g}, {start[1]:.2g} m)")


def test_3_swing_matches_kink_amplitude():
    params, rec = cached_run(2.85, 1000.0)
    c = mkdv.mkdv_coefficients(params, stability.OperatingPoint(7.0, 2.85))
    predicted = 2 * c.kink_amplitude
    amp = simulator.measure_amplitude(rec, (900.0, 1000.0))
    ratio = amp / predicted
    record("3   measured swing vs 2A within +-30%", bool(np.all(np.abs(ratio - 1) <= 0.30)),
           f"2A = {predicted:.4f} m, ratio lane1 {ratio[0]:.4f}, lane2 {ratio[1]:.4f}")


def test_4_mkdv_residual_and_order():
    c = mkdv.mkdv_coefficients(make_params(**OWN_LANE), stability.OperatingPoint(7.0, 2.85))
    worst, orders = 0.0, []
    for B in (1.0, c.B):
        s = max(1.0, math.sqrt(B))
        coarse = mkdv.standard_mkdv_residual(B, dx=2e-2 / s, dt=2e-3 / s**3)
        fine = mkdv.standard_mkdv_residual(B, dx=1e-2 / s, dt=1e-3 / s**3)
        worst = max(worst, fine)
        orders.append(math.log2(coarse / fine))
    ok = worst < 1e-3 and all(abs(o - 2) < 0.2 for o in orders)
    record("4   MKdV residual < 1e-3, second order under refinement", ok,
           f"max residual {worst:.2e}, observed orders {', '.join(f'{o:.3f}' for o in orders)}")


def test_5_invariant_suite():
    params = make_params(**OWN_LANE)
    checks = [validation.check_derivatives(params), validation.check_z2_sign(1000),
              validation.check_amplitude_consistency(1000)]
    fixed = validation.stable_variant(params)
    checks += [validation.check_fixed_point(fixed, 10_000, mode=m) for m in ("nearest", "paired")]
    runs = [rec for (_, rec) in _runs.values()] or [cached_run(2.85, 1000.0)[1]]
    cons = max(validation.conservation_error(r) for r in runs)
    checks.append(validation.Check("headway sum == circumference", cons < validation.CONSERVATION_RTOL,
                                   f"max relative error {cons:.1e}"))
    checks.append(validation.Check("no overtaking", all(validation.ordering_preserved(r) for r in runs),
                                   f"{len(runs)} accepted runs"))
    failed = [c.line() for c in checks if not c.passed]
    record("5   invariant suite", not failed, "; ".join(failed) or f"{len(checks)} checks passed")


def test_6_lateral_unstable_lanes_similar():
    _, rec = cached_run(2.2, 1000.0, **LATERAL)
    start = simulator.measure_amplitude(rec, (0.0, 0.0))
    amp = simulator.measure_amplitude(rec, (900.0, 1000.0))
    diff = abs(amp[1] - amp[0]) / max(amp)
    record("6   lateral run (a=2.2, q=0.2): kinks on both lanes, amplitudes differ < 15%",
           bool(np.all(amp > start)) and diff < 0.15, f"{fmt_lanes(amp)}, relative difference {diff:.3f}")


def test_7_lateral_readings_report():
    params = make_params(alpha=2.85, **LATERAL)
    outcomes = validation.compare_readings(params, standard_ring(), duration=1000.0, gates=("open", "closed"))
    report = validation.readings_report(params, outcomes)
    expected = {"open": 3.6, "closed": 2.8}
    table_ok = len(outcomes) == 4 and all(abs(o.a_c - expected[o.gate]) < 1e-12 for o in outcomes)
    consistent = all(
        o.classification == ("stable" if o.a_c < 2.85 else "unstable")
        and len(o.decays) == 2 and not o.aborted
        and (("yes" if all(o.decays) else "no") in report)
        for o in outcomes)
    decays = ", ".join(f"{o.mode}/{o.gate}: {'decays' if all(o.decays) else 'grows'}" for o in outcomes)
    record("7   lateral run (a=2.85, q=0.2) under 2 modes x 2 gate readings, a_c table 3.6 / 2.8 (tol 1e-12)",
           table_ok and consistent, decays)
