"""Run manifests: a flat ``key = value`` text format with ``[section]`` headers.

Example::

    [model]
    alpha = 2.85
    p = 1
    q = 0
    lambda1 = 0.2
    lambda2 = 0
    v_max = 4
    h_c = 7

    [lane1]
    baseline_headway = 7
    perturb = 46..49:-0.1

    [lane2]
    perturb = 46..49:-0.3

    [simulation]
    duration = 1000

Sections: ``model``, ``ring``, ``lane1``, ``lane2``, ``simulation``,
``stability_map``, ``soliton``, ``output`` and any number of
``set.<name>`` sections that override model keys for the stability map.
Unknown sections or keys are errors. Grids accept a comma list or
``start:stop:count`` (inclusive, evenly spaced).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields

import numpy as np

from .model import ModelParams
from .simulator import PerturbationSpec, RingConfig, SimOptions

REQUIRED = object()

MODEL_KEYS = {
    "alpha": REQUIRED, "p": REQUIRED, "q": REQUIRED, "lambda1": REQUIRED, "lambda2": REQUIRED,
    "v_max": REQUIRED, "h_c": REQUIRED, "l_v": 5.0, "d": 10.0,
}


@dataclass(frozen=True)
class ConfigIssue:
    line: int | None
    field: str
    reason: str

    def __str__(self):
        where = f"line {self.line}: " if self.line else ""
        return f"{where}{self.field}: {self.reason}"


class ConfigError(ValueError):
    def __init__(self, issues: list[ConfigIssue]):
        self.issues = list(issues)
        super().__init__("invalid config:\n  " + "\n  ".join(str(i) for i in self.issues))


@dataclass(frozen=True)
class StabilityMapOptions:
    h_grid: tuple[float, ...] = tuple(np.linspace(0.5, 14.0, 271).tolist())
    a_grid: tuple[float, ...] = tuple(np.linspace(0.05, 5.0, 100).tolist())
    param_sets: tuple[tuple[str, tuple[tuple[str, float], ...]], ...] = ()


@dataclass(frozen=True)
class SolitonOptions:
    gate_open: bool = True
    evaluate_at: str = "critical"
    n_range: tuple[int, int] = (0, 99)
    times: tuple[float, ...] = (0.0,)
    time_rescaled: bool = False


@dataclass(frozen=True)
class RunManifest:
    params: ModelParams
    ring: RingConfig = RingConfig()
    sim: SimOptions = SimOptions()
    profile_time: float | None = None
    window: tuple[float, float] | None = None
    stability: StabilityMapOptions = StabilityMapOptions()
    soliton: SolitonOptions = SolitonOptions()
    out_dir: str | None = None
    source: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def resolved_profile_time(self) -> float:
        if self.profile_time is not None:
            return self.profile_time
        return min(950.0, self.sim.duration)

    @property
    def resolved_window(self) -> tuple[float, float]:
        if self.window is not None:
            return self.window
        return (max(0.0, self.sim.duration - 100.0), self.sim.duration)

    def parameter_sets(self) -> list[tuple[str, ModelParams]]:
        out = [("base", self.params)]
        for name, overrides in self.stability.param_sets:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out.append((name, self.params.replace(**dict(overrides))))
        return out


# value parsers -------------------------------------------------------------

def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true or false")


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


def _grid(text: str) -> tuple[float, ...]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("grid range is start:stop:count")
        start, stop, count = _float(parts[0]), _float(parts[1]), _int(parts[2])
        if count < 1:
            raise ValueError("grid count must be >= 1")
        return tuple(np.linspace(start, stop, count).tolist())
    values = tuple(_float(t) for t in text.split(",") if t.strip())
    if not values:
        raise ValueError("empty list")
    return values


def _index_range(text: str) -> tuple[int, int]:
    first, sep, last = text.partition("..")
    if not sep:
        return int(first), int(first)
    return int(first), int(last)


def _perturb(text: str) -> tuple[tuple[int, int, float], ...]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        rng, sep, delta = item.partition(":")
        if not sep:
            raise ValueError("perturbation entries look like first..last:delta")
        first, last = _index_range(rng.strip())
        out.append((first, last, _float(delta)))
    return tuple(out)


def _pair(text: str) -> tuple[float, float]:
    values = _grid(text)
    if len(values) != 2:
        raise ValueError("expected two numbers")
    return values


SECTION_KEYS = {
    "model": {k: _float for k in MODEL_KEYS},
    "ring": {"n_vehicles": _int},
    "lane1": {"baseline_headway": _float, "perturb": _perturb},
    "lane2": {"baseline_headway": _float, "perturb": _perturb},
    "simulation": {
        "dt": _float, "scheme": _choice("euler", "rk4"), "duration": _float, "sample_every": _float,
        "mode": _choice("nearest", "paired"), "gate": _choice("dynamic", "open", "closed"),
        "profile_time": _float, "window": _pair,
    },
    "stability_map": {"h_grid": _grid, "a_grid": _grid},
    "soliton": {
        "gate_open": _bool, "evaluate_at": _choice("critical", "actual"),
        "n_range": _index_range, "times": _grid, "time_rescaled": _bool,
    },
    "output": {"dir": str},
}


def _tokenize(text: str, issues: list[ConfigIssue]):
    """Yield ``(section, key, value, line)``; syntax errors go to ``issues``."""
    section = None
    seen: dict[tuple[str, str], int] = {}
    seen_sections: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                issues.append(ConfigIssue(lineno, line, "unterminated section header"))
                section = None
                continue
            section = line[1:-1].strip()
            known = section in SECTION_KEYS or (section.startswith("set.") and len(section) > 4)
            if not known:
                issues.append(ConfigIssue(lineno, f"[{section}]", "unknown section"))
                section = None
            elif section in seen_sections:
                issues.append(ConfigIssue(lineno, f"[{section}]", "duplicate section"))
            seen_sections.add(section or "")
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            issues.append(ConfigIssue(lineno, line, "expected 'key = value'"))
            continue
        if section is None:
            issues.append(ConfigIssue(lineno, key, "key outside a known section"))
            continue
        if (section, key) in seen:
            issues.append(ConfigIssue(lineno, f"{section}.{key}", f"duplicate key (first on line {seen[section, key]})"))
            continue
        seen[section, key] = lineno
        yield section, key, value, lineno


def parse_config(text: str) -> RunManifest:
    """Parse and validate a manifest, raising :class:`ConfigError` with every issue found."""
    issues: list[ConfigIssue] = []
    values: dict[str, dict[str, tuple[object, int]]] = {}
    set_order: list[str] = []
    for section, key, raw, lineno in _tokenize(text, issues):
        if section.startswith("set."):
            parsers = SECTION_KEYS["model"]
            if section not in set_order:
                set_order.append(section)
        else:
            parsers = SECTION_KEYS[section]
        if key not in parsers:
            issues.append(ConfigIssue(lineno, f"{section}.{key}", "unknown key"))
            continue
        try:
            parsed = parsers[key](raw)
        except ValueError as exc:
            issues.append(ConfigIssue(lineno, f"{section}.{key}", f"bad value {raw!r}: {exc}"))
            continue
        values.setdefault(section, {})[key] = (parsed, lineno)

    def get(section, key, default=None):
        entry = values.get(section, {}).get(key)
        return default if entry is None else entry[0]

    def line_of(section, key):
        entry = values.get(section, {}).get(key)
        return None if entry is None else entry[1]

    def check(cond, section, key, reason):
        if not cond:
            issues.append(ConfigIssue(line_of(section, key), f"{section}.{key}", reason))
        return cond

    model = {}
    for key, default in MODEL_KEYS.items():
        value = get("model", key, default)
        if value is REQUIRED:
            issues.append(ConfigIssue(None, f"model.{key}", "missing required field"))
        else:
            model[key] = value
    params = None
    if len(model) == len(MODEL_KEYS):
        ok = True
        for key in ("alpha", "v_max", "h_c"):
            ok &= check(model[key] > 0, "model", key, "must be > 0")
        for key in ("p", "q", "lambda1", "lambda2"):
            ok &= check(model[key] >= 0, "model", key, "must be >= 0")
        ok &= check(0 < model["l_v"] < model["d"], "model", "l_v", "need 0 < l_v < d")
        if ok:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                params = ModelParams(**model)

    n = get("ring", "n_vehicles", 100)
    check(n >= 2, "ring", "n_vehicles", "must be >= 2")
    lanes = []
    for lane in ("lane1", "lane2"):
        base = get(lane, "baseline_headway", model.get("h_c", 7.0))
        deltas = get(lane, "perturb", ())
        good = check(base > 0, lane, "baseline_headway", "must be > 0")
        for first, last, delta in deltas:
            good &= check(0 <= first <= last < max(n, 0), lane, "perturb",
                          f"index range {first}..{last} outside 0..{n - 1}")
            good &= check(base + delta > 0, lane, "perturb", f"headway {base + delta:g} must be > 0")
        if good:
            lanes.append(PerturbationSpec(base, deltas))

    sim_kwargs = {k: get("simulation", k) for k in ("dt", "scheme", "duration", "sample_every", "mode", "gate")}
    sim_kwargs = {k: v for k, v in sim_kwargs.items() if v is not None}
    sim = None
    try:
        sim = SimOptions(**sim_kwargs)
    except ValueError as exc:
        issues.append(ConfigIssue(None, "simulation", str(exc)))

    profile_time = get("simulation", "profile_time")
    window = get("simulation", "window")
    if sim is not None:
        if profile_time is not None:
            check(0 <= profile_time <= sim.duration, "simulation", "profile_time", "must lie in [0, duration]")
        if window is not None:
            check(window[0] <= window[1], "simulation", "window", "start must not exceed end")

    stab_kwargs = {k: get("stability_map", k) for k in ("h_grid", "a_grid")}
    stab_kwargs = {k: v for k, v in stab_kwargs.items() if v is not None}
    if "h_grid" in stab_kwargs:
        check(all(b > a for a, b in zip(stab_kwargs["h_grid"], stab_kwargs["h_grid"][1:])),
              "stability_map", "h_grid", "must be strictly increasing")
    if "a_grid" in stab_kwargs:
        check(all(a > 0 for a in stab_kwargs["a_grid"]), "stability_map", "a_grid", "every a must be > 0")
    param_sets = []
    for section in set_order:
        overrides = tuple((k, v) for k, (v, _) in values.get(section, {}).items())
        param_sets.append((section[4:], overrides))

    sol_kwargs = {k: get("soliton", k) for k in ("gate_open", "evaluate_at", "n_range", "times", "time_rescaled")}
    sol_kwargs = {k: v for k, v in sol_kwargs.items() if v is not None}
    if "n_range" in sol_kwargs:
        check(sol_kwargs["n_range"][0] <= sol_kwargs["n_range"][1], "soliton", "n_range", "first must not exceed last")

    if issues:
        raise ConfigError(issues)
    return RunManifest(
        params=params,
        ring=RingConfig(n, tuple(lanes)),
        sim=sim,
        profile_time=profile_time,
        window=window,
        stability=StabilityMapOptions(**stab_kwargs, param_sets=tuple(param_sets)),
        soliton=SolitonOptions(**sol_kwargs),
        out_dir=get("output", "dir"),
        source={s: {k: line for k, (_, line) in kv.items()} for s, kv in values.items()},
    )


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def serialize_config(m: RunManifest) -> str:
    """Lossless text form: ``parse_config(serialize_config(m)) == m``."""
    out = ["[model]"]
    out += [f"{f.name} = {_fmt(float(getattr(m.params, f.name)))}" for f in fields(m.params)]
    out += ["", "[ring]", f"n_vehicles = {m.ring.n_vehicles}"]
    for k, spec in enumerate(m.ring.lane_perturbations, start=1):
        out += ["", f"[lane{k}]", f"baseline_headway = {_fmt(float(spec.baseline_headway))}"]
        if spec.deltas:
            out.append("perturb = " + ", ".join(f"{a}..{b}:{d!r}" for a, b, d in spec.deltas))
    s = m.sim
    out += ["", "[simulation]", f"dt = {s.dt!r}", f"scheme = {s.scheme}", f"duration = {float(s.duration)!r}",
            f"sample_every = {float(s.sample_every)!r}", f"mode = {s.mode}", f"gate = {s.gate}"]
    if m.profile_time is not None:
        out.append(f"profile_time = {float(m.profile_time)!r}")
    if m.window is not None:
        out.append(f"window = {_fmt(tuple(float(w) for w in m.window))}")
    out += ["", "[stability_map]", f"h_grid = {_fmt(m.stability.h_grid)}", f"a_grid = {_fmt(m.stability.a_grid)}"]
    so = m.soliton
    out += ["", "[soliton]", f"gate_open = {_fmt(so.gate_open)}", f"evaluate_at = {so.evaluate_at}",
            f"n_range = {so.n_range[0]}..{so.n_range[1]}", f"times = {_fmt(tuple(float(t) for t in so.times))}",
            f"time_rescaled = {_fmt(so.time_rescaled)}"]
    for name, overrides in m.stability.param_sets:
        out += ["", f"[set.{name}]"] + [f"{k} = {float(v)!r}" for k, v in overrides]
    if m.out_dir is not None:
        out += ["", "[output]", f"dir = {m.out_dir}"]
    return "\n".join(out) + "\n"


def load_config(path) -> RunManifest:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
