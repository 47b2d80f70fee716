"""Scenario configs and end-to-end runs.

A scenario file is INI-style with a ``schema = 1`` line before the first
section and one section per component::

    schema = 1

    [plant]
    kind = worst-case
    psi = abs
    b_lower = 1
    b_upper = 2

    [schedule]
    kind = uniform
    T = 1
    N = auto

    [controller]
    kind = linear
    K = auto

    [run]
    x0 = 10
    eps = 0.1

    [design]
    M = 10
    lambda = 0.5

``auto`` values are filled from the linear design (or, for the prescribed
law, the period search).  See ``docs/config.md`` for the full key list.
"""

from __future__ import annotations

import configparser
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import adversary as adv
from .control import (PhiFunction, composite_controller, example1_controller, linear_controller,
                      prescribed_controller, relay_controller, zero_controller)
from .model import (BProfile, UncertaintyClass, constant_plant, validate_membership)
from .integrate import DEFAULT_TOL
from .runner import SimOptions, simulate
from .schedules import K_MAX_DEFAULT, explicit, geometric, stretched, uniform
from .synth import (check_contraction, check_invariance, design_linear, late_tail,
                    lemma4_ensemble, select_delta_report)

SCHEMA = "1"
SECTIONS = ("plant", "schedule", "controller", "run", "design")
REQUIRED = ("plant", "schedule", "controller", "run")
AUTO = "auto"

PLANT_KINDS = ("constant", "lemma1", "lemma2", "lemma3", "envelope", "worst-case")
SCHEDULE_KINDS = ("uniform", "geometric", "stretched", "explicit")
CONTROLLER_KINDS = ("zero", "linear", "relay", "composite", "prescribed", "example1")

_HEADER = "__header__"


class ConfigError(ValueError):
    """Schema violation, with the offending line and key when known."""

    def __init__(self, msg, line=None, key=None, path=None):
        where = ":".join(str(p) for p in (path, line) if p is not None)
        super().__init__(f"{where}: {msg}" if where else msg)
        self.line = line
        self.key = key


@dataclass
class Scenario:
    """Parsed scenario: raw sections plus the line of every key."""

    sections: dict
    lines: dict = field(default_factory=dict)
    source: str = "<string>"
    name: str = "scenario"

    def raw(self, section, key, default=None):
        return self.sections.get(section, {}).get(key.lower(), default)

    def has(self, section, key):
        return key.lower() in self.sections.get(section, {})

    def fail(self, section, key, msg):
        raise ConfigError(f"[{section}] {key}: {msg}", self.lines.get((section, key.lower())),
                          key, self.source)

    def get_float(self, section, key, default=None, allow_auto=False):
        value = self.raw(section, key)
        if value is None:
            if default is None:
                self.fail(section, key, "missing required key")
            return default
        if allow_auto and value.strip().lower() == AUTO:
            return AUTO
        try:
            return float(value)
        except ValueError:
            self.fail(section, key, f"expected a number, got {value!r}")

    def get_int(self, section, key, default=None, allow_auto=False, minimum=None):
        value = self.raw(section, key)
        if value is None:
            if default is None:
                self.fail(section, key, "missing required key")
            return default
        if allow_auto and value.strip().lower() == AUTO:
            return AUTO
        try:
            out = int(value)
        except ValueError:
            self.fail(section, key, f"expected an integer, got {value!r}")
        if minimum is not None and out < minimum:
            self.fail(section, key, f"must be >= {minimum}, got {out}")
        return out

    def get_str(self, section, key, default=None, choices=None):
        value = self.raw(section, key, default)
        if value is None:
            self.fail(section, key, "missing required key")
        value = value.strip()
        if choices is not None and value not in choices:
            self.fail(section, key, f"expected one of {', '.join(choices)}, got {value!r}")
        return value

    def get_bool(self, section, key, default=False):
        value = self.raw(section, key)
        if value is None:
            return default
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        self.fail(section, key, f"expected a boolean, got {value!r}")


def parse_config(text: str, source: str = "<string>", name: Optional[str] = None) -> Scenario:
    """Parse scenario text; every error names the line and key involved."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    try:
        parser.read_string(f"[{_HEADER}]\n" + text, source=source)
    except configparser.ParsingError as exc:
        lineno, bad = exc.errors[0]
        raise ConfigError(f"cannot parse {bad.strip()}", lineno - 1, path=source) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno - 1,
                          exc.option, source) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno - 1, exc.section,
                          source) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], path=source) from None
    lines = _key_lines(text)
    header = dict(parser[_HEADER])
    schema = header.pop("schema", None)
    if schema is None:
        raise ConfigError("missing 'schema = 1' line before the first section", 1, "schema",
                          source)
    if schema.strip() != SCHEMA:
        raise ConfigError(f"unsupported schema {schema.strip()!r}, expected {SCHEMA}",
                          lines.get((_HEADER, "schema")), "schema", source)
    for key in header:
        raise ConfigError(f"unexpected key {key!r} before the first section",
                          lines.get((_HEADER, key)), key, source)
    sections = {}
    for sec in parser.sections():
        if sec == _HEADER:
            continue
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]", lines.get((sec, None)), sec, source)
        sections[sec] = dict(parser[sec])
    for sec in REQUIRED:
        if sec not in sections:
            raise ConfigError(f"missing section [{sec}]", None, sec, source)
    sc = Scenario(sections, lines, source, name or sections["run"].get("id") or
                  Path(source).stem)
    _validate(sc)
    return sc


def load_config(path) -> Scenario:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def _key_lines(text):
    out = {}
    section = _HEADER
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), n)
            continue
        key = re.split(r"[=:]", s, 1)[0].strip().lower()
        out.setdefault((section, key), n)
    return out


_KEYS = {
    "plant": {"kind", "psi", "b_lower", "b_upper", "c", "eps", "m", "drift", "b_profile", "f",
              "b", "delta"},
    "schedule": {"kind", "t0", "t", "n", "a", "m", "k_max", "instants", "tail", "delta"},
    "controller": {"kind", "k", "c", "eps", "a", "m"},
    "run": {"x0", "eps", "seed", "dense", "n_dense", "tol", "max_steps", "id"},
    "design": {"m", "eps", "lambda", "ensemble_seed"},
}


def _validate(sc: Scenario):
    for sec, keys in sc.sections.items():
        for key in keys:
            if key not in _KEYS[sec]:
                sc.fail(sec, key, "unknown key")
    sc.get_str("plant", "kind", choices=PLANT_KINDS)
    kind = sc.get_str("schedule", "kind", choices=SCHEDULE_KINDS)
    sc.get_str("controller", "kind", choices=CONTROLLER_KINDS)
    sc.get_float("run", "x0")
    if kind == "uniform":
        if sc.has("schedule", "N"):
            sc.get_int("schedule", "N", allow_auto=True, minimum=1)
        elif not sc.has("schedule", "delta"):
            sc.fail("schedule", "N", "missing required key")
        if sc.get_float("schedule", "T", 1.0) <= 0.0:
            sc.fail("schedule", "T", "horizon must be positive")
    elif kind in ("geometric", "stretched"):
        a = sc.get_float("schedule", "a")
        if not 0.0 < a < 1.0:
            sc.fail("schedule", "a", f"must lie in (0, 1), got {a}")
        sc.get_int("schedule", "k_max", K_MAX_DEFAULT, minimum=1)
    elif kind == "explicit":
        _instants(sc)


def _instants(sc):
    raw = sc.get_str("schedule", "instants")
    try:
        values = [float(v) for v in re.split(r"[,\s]+", raw.strip()) if v]
    except ValueError:
        sc.fail("schedule", "instants", "expected a comma-separated list of numbers")
    if len(values) < 2:
        sc.fail("schedule", "instants", "need at least two instants (one interval)")
    return values


# -- building the objects --------------------------------------------------------

@dataclass
class Built:
    plant: object
    schedule: object
    controller: object
    cls: UncertaintyClass
    x0: float
    opts: SimOptions
    info: dict


def _class(sc):
    psi = sc.get_str("plant", "psi", "zero")
    b_lower = sc.get_float("plant", "b_lower", 1.0)
    b_upper = sc.get_float("plant", "b_upper", math.inf)
    try:
        return UncertaintyClass.named(psi, b_lower, b_upper)
    except ValueError as exc:
        sc.fail("plant", "psi" if "psi" in str(exc) else "b_upper", str(exc))


def build(sc: Scenario, seed: Optional[int] = None) -> Built:
    """Instantiate plant, schedule and controller; resolve ``auto`` values."""
    cls = _class(sc)
    info: dict = {}
    seed = sc.get_int("run", "seed", 0) if seed is None else seed
    x0 = sc.get_float("run", "x0")
    eps = sc.get_float("run", "eps", math.nan)
    eps = None if math.isnan(eps) else eps
    T = sc.get_float("schedule", "T", 1.0)
    t0 = sc.get_float("schedule", "t0", 0.0)
    ckind = sc.get_str("controller", "kind")
    pkind = sc.get_str("plant", "kind")

    design = None
    needs_design = any(str(sc.raw(s, k, "")).strip().lower() == AUTO
                       for s, k in (("schedule", "N"), ("controller", "K"), ("controller", "C")))
    if needs_design and ckind != "prescribed":
        M = sc.get_float("design", "M", abs(x0))
        d_eps = sc.get_float("design", "eps", eps if eps is not None else None)
        lam = sc.get_float("design", "lambda", math.nan)
        if not cls.bounded:
            sc.fail("plant", "b_upper", "auto design needs a finite b_upper")
        try:
            design = design_linear(cls.b_lower, cls.b_upper, cls, M, d_eps, T,
                                   None if math.isnan(lam) else lam)
        except (ValueError, ArithmeticError) as exc:
            raise ConfigError(f"design failed: {exc}", path=sc.source) from None
        info["design"] = design

    # schedule
    skind = sc.get_str("schedule", "kind")
    if skind == "uniform":
        N = sc.get_int("schedule", "N", 0, allow_auto=True) if sc.has("schedule", "N") else None
        if N is None:
            delta = sc.get_float("schedule", "delta")
            N = max(1, round(T / delta))
        tail = sc.get_int("schedule", "tail", 0, minimum=0)
        if N == AUTO and ckind == "prescribed":
            phi = PhiFunction.for_horizon(T)
            M = sc.get_float("design", "M", abs(x0))
            ens = lemma4_ensemble(cls, sc.get_int("design", "ensemble_seed", 0))
            sel = select_delta_report(cls, phi, M, eps, T, ens)
            N = sel.N
            info["selection"] = sel
            if not sc.has("schedule", "tail"):
                tail = late_tail(N)
        elif N == AUTO:
            N = design.N
        schedule = uniform(t0, T, N, tail)
    elif skind == "geometric":
        k_max = sc.get_int("schedule", "k_max", K_MAX_DEFAULT)
        schedule = geometric(sc.get_float("schedule", "a"), k_max, t0, T)
    elif skind == "stretched":
        k_max = sc.get_int("schedule", "k_max", K_MAX_DEFAULT)
        schedule = stretched(sc.get_float("schedule", "a"),
                             sc.get_int("schedule", "m", 1, minimum=1), k_max, t0, T)
    else:
        try:
            schedule = explicit(_instants(sc))
        except ValueError as exc:
            sc.fail("schedule", "instants", str(exc))

    # controller
    def num(key, fallback):
        v = sc.get_float("controller", key, None if fallback is None else math.nan, allow_auto=True)
        if v == AUTO or (isinstance(v, float) and math.isnan(v)):
            if fallback is None:
                sc.fail("controller", key, "auto needs a design")
            return fallback
        return v

    if ckind == "zero":
        controller = zero_controller()
    elif ckind == "linear":
        controller = linear_controller(num("K", design and design.K))
    elif ckind == "relay":
        controller = relay_controller(num("C", design and design.C))
    elif ckind == "composite":
        c_eps = sc.get_float("controller", "eps", eps)
        controller = composite_controller(num("K", design and design.K),
                                          num("C", design and design.C), c_eps)
    elif ckind == "prescribed":
        controller = prescribed_controller(cls, PhiFunction.for_horizon(T))
    else:
        controller = example1_controller(sc.get_float("controller", "A"),
                                         sc.get_int("controller", "m", minimum=1), T, t0)

    plant = _plant(sc, pkind, cls, schedule, seed, design, eps, x0)
    info["cls"] = cls
    opts = SimOptions(eps=eps, tol=sc.get_float("run", "tol", DEFAULT_TOL),
                      dense=sc.get_bool("run", "dense"),
                      n_dense=sc.get_int("run", "n_dense", 8, minimum=1),
                      max_steps=sc.get_int("run", "max_steps", 0, minimum=0) or None)
    return Built(plant, schedule, controller, cls, x0, opts, info)


def _plant(sc, kind, cls, schedule, seed, design, eps, x0):
    profile_kind = sc.get_str("plant", "b_profile", "lower", BProfile.KINDS)

    def profile():
        return BProfile(profile_kind, cls.b_lower, cls.b_upper, seed)

    try:
        if kind == "constant":
            return constant_plant(sc.get_float("plant", "f", 0.0), sc.get_float("plant", "b", 1.0))
        if kind == "lemma1":
            return adv.Lemma1Plant(adv.lemma1_config(cls.b_lower, sc.get_float("plant", "c", 3.0)))
        if kind == "lemma2":
            p_eps = sc.get_float("plant", "eps", eps)
            cfg = adv.lemma2_config(cls, p_eps, sc.get_float("plant", "M"), schedule.deltas)
            return adv.Lemma2Plant(cfg, profile())
        if kind == "lemma3":
            delta = sc.get_float("plant", "delta", schedule.deltas[0])
            return adv.Lemma3Plant(adv.lemma3_config(cls, sc.get_float("plant", "c", 2.0), delta),
                                   cls)
        if kind == "envelope":
            return adv.EnvelopePlant(cls, sc.get_str("plant", "drift", "outward", adv.DRIFTS),
                                     profile())
        if design is None:
            sc.fail("plant", "kind", "worst-case plant needs a linear design (use auto values)")
        return adv.WorstCasePlant(cls.b_lower, cls.b_upper, design.psi_bar_M, design.psi_bar_eps,
                                  design.eps)
    except (ValueError, ArithmeticError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[plant] {exc}", path=sc.source) from None


# -- running -------------------------------------------------------------------

def _checks(built: Built, traj) -> dict:
    """Applicable inequality checks for the scenario, name -> bool."""
    plant, cls = built.plant, built.cls
    xs = traj.xs()
    checks = {}
    ratios = [abs(xs[k + 1]) / abs(xs[k]) for k in range(len(xs) - 1) if xs[k] != 0.0]
    if isinstance(plant, adv.Lemma1Plant):
        c = plant.cfg.c
        checks["nondecreasing"] = all(abs(xs[k + 1]) >= abs(xs[k]) for k in range(len(xs) - 1))
        checks["growth_c_minus_1"] = all(
            abs(xs[k + 1]) >= (c - 1.0) * abs(xs[k]) * (1 - 1e-9)
            for k in range(len(xs) - 1) if traj.steps[k].u != 0.0)
        checks["membership"] = validate_membership(plant, cls, traj).passed
    elif isinstance(plant, adv.Lemma2Plant):
        cfg = plant.cfg
        checks["growth_c"] = all(r >= cfg.c * (1 - 1e-9) for r in ratios)
        checks["reaches_M"] = abs(traj.x_end) >= cfg.M * (1 - 1e-9)
        member = UncertaintyClass(cls.b_lower, cls.b_upper, cls.psi, cls.psi_monotone_even,
                                  cls.psi_slope, d_bound=cfg.D)
        checks["membership"] = validate_membership(plant, member, traj, 1e-9).passed
    elif isinstance(plant, adv.Lemma3Plant):
        thr = plant.cfg.M_threshold
        checks["growth_c"] = all(abs(xs[k + 1]) >= plant.cfg.c * abs(xs[k]) * (1 - 1e-9)
                                 for k in range(len(xs) - 1) if abs(xs[k]) >= thr)
        checks["membership"] = validate_membership(plant, cls, traj).passed
    design = built.info.get("design")
    if design is not None and isinstance(plant, adv.WorstCasePlant):
        ctrl = built.controller.label
        if ctrl.startswith(("linear", "composite")):
            checks["contraction"] = check_contraction(traj, design.lam, design.eps, design.N).passed
        if ctrl.startswith(("relay", "composite")):
            checks["invariance"] = check_invariance(traj, design.eps).passed
    if ("prescribed" in built.controller.label and built.schedule.n_nominal is not None
            and built.opts.eps is not None):
        late = np.abs(xs[built.schedule.n_nominal:])
        checks["late_within_eps"] = bool(late.size and late.max() <= built.opts.eps)
    if isinstance(plant, adv.EnvelopePlant):
        checks["membership"] = validate_membership(plant, cls, traj).passed
    return checks


def run_scenario(sc: Scenario, seed: Optional[int] = None):
    """Simulate a parsed scenario.  Returns ``(trajectory, summary)``."""
    built = build(sc, seed)
    traj = simulate(built.plant, built.schedule, built.controller, built.x0, built.opts)
    checks = _checks(built, traj)
    summary = {
        "scenario": sc.name,
        "plant": built.plant.name,
        "schedule": built.schedule.describe(),
        "controller": built.controller.label,
        "n_steps": traj.n_steps,
        "t_final": traj.t_end,
        "x_final": traj.x_end,
        "abs_x_final": abs(traj.x_end),
        "converged_at": traj.converged_at,
        "diverged": traj.diverged,
        "overflow": traj.overflow,
        "truncated": traj.truncated,
        "config_hash": traj.config_hash,
    }
    if "design" in built.info:
        d = built.info["design"]
        summary.update(design_N=d.N, design_K=d.K, design_C=d.C, design_Delta=d.Delta)
    if "selection" in built.info:
        summary.update(selected_N=built.info["selection"].N,
                       selected_Delta=built.info["selection"].Delta)
    for name, ok in checks.items():
        summary[f"check_{name}"] = ok
    summary["passed"] = all(checks.values())
    return traj, summary


def thread_cap(default: Optional[int] = None) -> int:
    """Worker count from ``PTC_THREADS`` (defaults to the CPU count)."""
    raw = os.environ.get("PTC_THREADS")
    cpu = default or os.cpu_count() or 1
    if raw is None or not raw.strip():
        return cpu
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"PTC_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"PTC_THREADS must be a positive integer, got {raw!r}")
    return n


def _sweep_one(path):
    try:
        sc = load_config(path)
        _, summary = run_scenario(sc)
        return sc.name, summary
    except (OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        return Path(path).stem, {"scenario": Path(path).stem, "error": str(exc), "passed": False}


def sweep(paths, workers: Optional[int] = None) -> dict:
    """Run scenario files in parallel; summaries keyed by scenario id, in sorted order."""
    paths = [str(p) for p in paths]
    workers = min(workers or thread_cap(), thread_cap(), max(1, len(paths)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, paths))
    else:
        results = [_sweep_one(p) for p in paths]
    merged = {}
    for name, summary in results:
        key = name
        n = 2
        while key in merged:
            key = f"{name}#{n}"
            n += 1
        merged[key] = summary
    return dict(sorted(merged.items()))
