"""Command line: ``lateral-ovm {simulate,stability-map,soliton,validate,readings}``."""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import kernels, mkdv, simulator, stability, validation
from .config import ConfigError, RunManifest, load_config, serialize_config
from .export import csv_text, fmt, profile_csv, render_profile_plot, spacetime_csv, time_label, write_atomic


def _params_lines(m: RunManifest) -> list[str]:
    p = m.params
    lines = [f"alpha = {fmt(p.alpha)} 1/s", f"p = {fmt(p.p)}", f"q = {fmt(p.q)}",
             f"lambda1 = {fmt(p.lambda1)} 1/s", f"lambda2 = {fmt(p.lambda2)} 1/s",
             f"v_max = {fmt(p.v_max)} m/s", f"h_c = {fmt(p.h_c)} m", f"l_v = {fmt(p.l_v)} m", f"d = {fmt(p.d)} m"]
    return lines


def _coeff_lines(c: mkdv.MkdvCoefficients) -> list[str]:
    lines = [f"m{k} = {fmt(getattr(c, f'm{k}'))}" for k in range(1, 6)]
    lines += [f"b = {fmt(c.b)} m/s", f"epsilon = {fmt(c.epsilon)}", f"B = {fmt(c.B)}",
              f"kink amplitude A = {fmt(c.kink_amplitude)} m", f"predicted swing 2A = {fmt(2 * c.kink_amplitude)} m",
              f"coefficients evaluated at = {c.evaluated_at}", f"valid = {c.valid}"]
    if c.reason:
        lines.append(f"reason = {c.reason}")
    return lines


def cmd_simulate(m: RunManifest, out: Path) -> list[Path]:
    params, opts = m.params, m.sim
    h0 = m.ring.lane_perturbations[0].baseline_headway
    gate_open = bool(params.l_v <= h0 < params.d) if opts.gate == "dynamic" else opts.gate == "open"
    point = stability.OperatingPoint(h0, params.alpha, gate_open)
    report = stability.analyze(point, params)

    aborted = None
    try:
        record = simulator.run(m.ring, params, opts)
    except simulator.SimulationAborted as exc:
        aborted, record = exc, exc.record

    written = []
    t_prof = m.resolved_profile_time
    for lane in range(2):
        written.append(write_atomic(out / f"lane{lane + 1}_spacetime.csv", spacetime_csv(record, lane)))
        if record.times[-1] >= t_prof - 1e-9:
            csv_path = write_atomic(out / f"lane{lane + 1}_profile_t{time_label(t_prof)}.csv",
                                    profile_csv(record, lane, t_prof))
            written.append(csv_path)
            written.append(render_profile_plot(csv_path, csv_path.with_suffix(".svg"),
                                               title=f"lane {lane + 1}, t = {time_label(t_prof)} s"))

    lines = ["# simulate", *_params_lines(m), f"n_vehicles = {m.ring.n_vehicles}",
             f"circumferences = {', '.join(fmt(c) for c in record.circumferences)} m",
             f"scheme = {opts.scheme}", f"dt = {fmt(opts.dt)} s", f"duration = {fmt(opts.duration)} s",
             f"mode = {opts.mode}", f"gate = {opts.gate}", f"backend = {kernels.BACKEND}",
             f"a_c = {fmt(report.a_c)} 1/s (gate {'open' if gate_open else 'closed'})",
             f"z1 = {fmt(report.z1)}", f"z2 = {fmt(report.z2)}", f"classification = {report.classification.value}"]
    coeffs = mkdv.mkdv_coefficients(params, stability.OperatingPoint(params.h_c, params.alpha, gate_open))
    lines += _coeff_lines(coeffs)
    window = m.resolved_window
    start = simulator.measure_amplitude(record, (0, 0))
    try:
        amp = simulator.measure_amplitude(record, window)
    except ValueError:
        amp = None
    lines.append(f"initial amplitude = {', '.join(fmt(a) for a in start)} m")
    if amp is not None:
        lines.append(f"measured amplitude [{fmt(window[0])}, {fmt(window[1])}] s = {', '.join(fmt(a) for a in amp)} m")
        lines.append(f"decays = {', '.join('yes' if a < s else 'no' for a, s in zip(amp, start))}")
        if coeffs.valid:
            lines.append(f"measured / predicted swing = {', '.join(fmt(a / (2 * coeffs.kink_amplitude)) for a in amp)}")
    lines.append(f"min velocity = {fmt(record.min_velocity)} m/s")
    lines.append(f"status = {'aborted: ' + str(aborted) if aborted else 'ok'}")
    written.append(write_atomic(out / "summary.txt", "\n".join(lines) + "\n"))
    if aborted:
        raise aborted
    return written


def cmd_stability_map(m: RunManifest, out: Path) -> list[Path]:
    written = []
    h_grid = np.asarray(m.stability.h_grid)
    for name, params in m.parameter_sets():
        open_ = stability.stability_surface(params, h_grid, gate_open=True)
        closed = stability.stability_surface(params, h_grid, gate_open=False)
        rows = ([h, a_o, a_cl] for h, a_o, a_cl in zip(h_grid, open_[:, 1], closed[:, 1]))
        written.append(write_atomic(out / f"stability_{name}.csv",
                                    csv_text(["h_m", "a_c_gate_open_per_s", "a_c_gate_closed_per_s"], rows)))
        curves = {g: {a: (lo, hi) for a, lo, hi in mkdv.coexisting_curve(params, g, m.stability.a_grid)}
                  for g in (True, False)}
        rows = []
        for a in m.stability.a_grid:
            row = [a]
            for g in (True, False):
                row += list(curves[g][a]) if a in curves[g] else ["", ""]
            rows.append(row)
        header = ["a_per_s", "h_low_gate_open_m", "h_high_gate_open_m", "h_low_gate_closed_m", "h_high_gate_closed_m"]
        written.append(write_atomic(out / f"coexisting_{name}.csv", csv_text(header, rows)))
    return written


def cmd_soliton(m: RunManifest, out: Path) -> list[Path]:
    so = m.soliton
    point = stability.OperatingPoint(m.params.h_c, m.params.alpha, so.gate_open)
    coeffs = mkdv.mkdv_coefficients(m.params, point, so.evaluate_at)
    if not coeffs.valid:
        raise mkdv.InvalidCoefficients(f"no kink solution: {coeffs.reason}")
    n = np.arange(so.n_range[0], so.n_range[1] + 1)
    rows = ([t, *mkdv.kink_profile(coeffs, n, t, so.time_rescaled)] for t in so.times)
    header = ["t_s"] + [f"h_n{i}_m" for i in n]
    written = [write_atomic(out / "soliton_profile.csv", csv_text(header, rows))]
    lines = ["# soliton", *_params_lines(m), f"gate_open = {so.gate_open}", f"a_c = {fmt(coeffs.a_c)} 1/s",
             *_coeff_lines(coeffs), f"time_rescaled = {so.time_rescaled}"]
    written.append(write_atomic(out / "summary.txt", "\n".join(lines) + "\n"))
    return written


def cmd_validate(m: RunManifest, out: Path, quick: bool = False) -> tuple[bool, Path]:
    gate_open = m.soliton.gate_open
    checks = validation.run_suite(m.params, m.ring, gate_open=gate_open, quick=quick)
    text = "\n".join(c.line() for c in checks)
    ok = all(c.passed for c in checks)
    path = write_atomic(out / "validate.txt", text + f"\nOVERALL {'PASS' if ok else 'FAIL'}\n")
    print(text)
    return ok, path


def cmd_readings(m: RunManifest, out: Path) -> Path:
    outcomes = validation.compare_readings(m.params, m.ring, duration=m.sim.duration,
                                           dt=m.sim.dt, scheme=m.sim.scheme)
    text = validation.readings_report(m.params, outcomes)
    print(text, end="")
    return write_atomic(out / "readings.txt", text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lateral-ovm", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "run the two-lane ring and export headway tables"),
                        ("stability-map", "neutral stability and coexisting curves"),
                        ("soliton", "analytic kink-antikink headway profile"),
                        ("validate", "run the invariant suite"),
                        ("readings", "compare neighbor modes and gate readings on one experiment")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None, help="output directory (default: [output] dir or .)")
        p.add_argument("--mode", choices=sorted(kernels.MODES))
        p.add_argument("--scheme", choices=sorted(kernels.SCHEMES))
        p.add_argument("--dt", type=float)
        if name == "validate":
            p.add_argument("--quick", action="store_true", help="shorter runs")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = load_config(args.config)
        overrides = {k: getattr(args, k) for k in ("mode", "scheme", "dt") if getattr(args, k) is not None}
        if overrides:
            manifest = dataclasses.replace(manifest, sim=dataclasses.replace(manifest.sim, **overrides))
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = args.out or Path(manifest.out_dir or ".")
    write_atomic(out / "manifest.cfg", serialize_config(manifest))
    try:
        if args.command == "simulate":
            paths = cmd_simulate(manifest, out)
        elif args.command == "stability-map":
            paths = cmd_stability_map(manifest, out)
        elif args.command == "soliton":
            paths = cmd_soliton(manifest, out)
        elif args.command == "readings":
            paths = [cmd_readings(manifest, out)]
        else:
            ok, path = cmd_validate(manifest, out, quick=args.quick)
            print(f"report: {path}")
            return 0 if ok else 1
    except (simulator.SimulationAborted, mkdv.InvalidCoefficients) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
