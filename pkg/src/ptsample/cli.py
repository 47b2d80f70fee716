"""Command-line front end.

Subcommands: ``design``, ``simulate``, ``lemma`` and ``sweep``.  Exit codes
are 0 when everything checked passes, 1 when an assertion fails and 2 for
usage, schema or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .lemmas import SUITES, run_suite
from .model import UncertaintyClass
from .output import write_csv, write_svg
from .scenario import ConfigError, load_config, run_scenario, sweep, thread_cap
from .synth import design_linear

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _print_kv(d: dict, out=None) -> None:
    out = out or sys.stdout
    for k, v in d.items():
        print(f"{k}={_fmt(v)}", file=out)


def _json_safe(d: dict) -> dict:
    def conv(v):
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        return v
    return {k: conv(v) for k, v in d.items()}


# -- design --------------------------------------------------------------------

def cmd_design(args) -> int:
    M = abs(args.x0) if args.from_x0 is not None else args.M
    if args.from_x0 is not None and args.M is not None:
        print("error: give either --M or --from-x0, not both", file=sys.stderr)
        return EXIT_USAGE
    if M is None:
        print("error: --M or --from-x0 is required", file=sys.stderr)
        return EXIT_USAGE
    if args.eps >= M:
        print(f"error: eps >= M ({args.eps:g} >= {M:g})", file=sys.stderr)
        return EXIT_USAGE
    try:
        cls = UncertaintyClass.named(args.psi, args.b_lower, args.b_upper)
        d = design_linear(args.b_lower, args.b_upper, cls, M, args.eps, args.T, args.lam)
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = {"lambda": d.lam, "Delta": d.Delta, "N": d.N, "K": d.K, "K_upper": d.K_upper,
              "K_slack": d.K_slack, "C": d.C, "Delta_inv": d.Delta_inv,
              "invariance_ok": d.invariance_ok, "psi_bar_M": d.psi_bar_M,
              "psi_bar_eps": d.psi_bar_eps, "delta_bound": d.delta_bound,
              "b_lower": d.b_lower, "b_upper": d.b_upper, "psi": args.psi, "M": d.M,
              "eps": d.eps, "T": d.T}
    _print_kv(report)
    print("--- json")
    print(json.dumps(_json_safe(report), sort_keys=True))
    bad = d.violations()
    for v in bad:
        print(f"violation: {v}", file=sys.stderr)
    return EXIT_FAIL if bad else EXIT_PASS


# -- simulate ------------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        sc = load_config(args.config)
        traj, summary = run_scenario(sc, args.seed)
    except FileNotFoundError:
        print(f"error: config not found: {args.config}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.csv:
            write_csv(traj, args.csv)
        if args.svg:
            write_svg(traj, args.svg, title=f"{sc.name}: {summary['controller']}")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _print_kv(summary)
    return EXIT_PASS if summary["passed"] else EXIT_FAIL


# -- lemma ---------------------------------------------------------------------

_LEMMA_FLAGS = {
    "a": float, "m": int, "A": float, "c": float, "steps": int, "M": float, "eps": float,
    "N": int, "b_lower": float, "b_upper": float, "T": float, "x0": float, "seed": int,
    "Delta": float, "lam": float, "k": int, "psi": str,
}


def cmd_lemma(args) -> int:
    params = {k: getattr(args, k) for k in _LEMMA_FLAGS}
    try:
        results = run_suite(args.which, **params)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{'PASS' if not failed else 'FAIL'} lemma {args.which}: "
          f"{len(results) - failed}/{len(results)} assertions hold")
    return EXIT_FAIL if failed else EXIT_PASS


# -- sweep ---------------------------------------------------------------------

def cmd_sweep(args) -> int:
    paths = []
    for p in args.configs:
        p = Path(p)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.ini")))
        elif p.exists():
            paths.append(p)
        else:
            print(f"error: config not found: {p}", file=sys.stderr)
            return EXIT_USAGE
    if not paths:
        print("error: no scenario files", file=sys.stderr)
        return EXIT_USAGE
    try:
        workers = min(args.jobs or thread_cap(), thread_cap())
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    merged = sweep(paths, workers)
    errors = 0
    for name, summary in merged.items():
        if "error" in summary:
            errors += 1
            print(f"{name}: ERROR {summary['error']}")
            continue
        keys = ("n_steps", "abs_x_final", "converged_at", "diverged", "passed")
        print(f"{name}: " + " ".join(f"{k}={_fmt(summary[k])}" for k in keys))
    if args.json:
        Path(args.json).write_text(json.dumps({k: _json_safe(v) for k, v in merged.items()},
                                              indent=2, sort_keys=True, default=str))
    if errors:
        return EXIT_USAGE
    return EXIT_PASS if all(s["passed"] for s in merged.values()) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ptsample", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("design", help="linear gain + relay synthesis")
    d.add_argument("--b-lower", type=float, required=True)
    d.add_argument("--b-upper", type=float, required=True)
    d.add_argument("--psi", default="abs", help="abs, square, zero, sinabs or const:v")
    d.add_argument("--M", type=float)
    d.add_argument("--from-x0", dest="from_x0", type=float, metavar="X0",
                   help="set M = |X0|")
    d.add_argument("--eps", type=float, required=True)
    d.add_argument("--T", type=float, default=1.0)
    d.add_argument("--lambda", dest="lam", type=float)
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("simulate", help="run a scenario config")
    s.add_argument("--config", required=True)
    s.add_argument("--csv")
    s.add_argument("--svg")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    lm = sub.add_parser("lemma", help="run a named assertion suite")
    lm.add_argument("--which", required=True, choices=SUITES)
    for name, typ in _LEMMA_FLAGS.items():
        flag = "--" + name.replace("_", "-")
        if name == "lam":
            flag = "--lambda"
        lm.add_argument(flag, dest=name, type=typ)
    lm.set_defaults(func=cmd_lemma)

    w = sub.add_parser("sweep", help="run many scenario configs in parallel")
    w.add_argument("configs", nargs="+", help="config files or directories of *.ini")
    w.add_argument("--jobs", type=int, help="worker processes (capped by PTC_THREADS)")
    w.add_argument("--json", help="write merged summaries here")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "from_x0", None) is not None:
        args.x0 = args.from_x0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
