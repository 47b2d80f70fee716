"""Named numerical checks of the growth, contraction and invariance inequalities.

Each suite builds its scenario, runs it and returns a list of
:class:`Assertion` records (measured quantity against the bound it must
respect).  The CLI ``lemma`` command prints them; the acceptance tests
call them directly.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

from . import adversary as adv
from .control import (PhiFunction, example1_controller, linear_controller, prescribed_controller,
                      relay_controller, zero_controller)
from .model import BProfile, UncertaintyClass, validate_membership
from .runner import simulate
from .schedules import example2_ratio, geometric, uniform
from .synth import (check_contraction, check_invariance, design_linear, lemma4_ensemble,
                    select_delta_report)

SUITES = ("1a", "1b", "1c", "2", "3", "4", "linear", "invariance", "example2")
RTOL = 1e-9


class Assertion(NamedTuple):
    name: str
    passed: bool
    measured: float
    bound: float
    relation: str = ">="

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: {self.measured:.6g} {self.relation} {self.bound:.6g}"


def _ge(name, measured, bound, rtol=0.0):
    return Assertion(name, measured >= bound * (1.0 - rtol) if bound > 0 else measured >= bound,
                     measured, bound, ">=")


def _le(name, measured, bound):
    return Assertion(name, measured <= bound, measured, bound, "<=")


def _min_ratio(xs, start=0, stop=None):
    """Smallest ``|x_{k+1}|/|x_k|`` over the given step range (inf if empty)."""
    stop = len(xs) - 1 if stop is None else stop
    out = math.inf
    for k in range(start, stop):
        if xs[k] != 0.0:
            out = min(out, abs(xs[k + 1]) / abs(xs[k]))
    return out


# -- unbounded input gain -------------------------------------------------------

def run_lemma1(a=0.5, m=1, A=1.0, c=3.0, steps=30, x0=1.0, b_lower=1.0):
    cfg = adv.lemma1_config(b_lower, c)
    plant = adv.Lemma1Plant(cfg)
    traj = simulate(plant, geometric(a, steps), example1_controller(A, m), x0)
    return plant, traj


def stepwise_growth(plant, traj, c, b_lower):
    """Per-step assertions for a run against the unbounded-gain adversary."""
    xs = traj.xs()
    drops = sum(abs(xs[k + 1]) < abs(xs[k]) for k in range(len(xs) - 1))
    grow = _min_ratio(xs)
    cls = UncertaintyClass(b_lower)
    return [
        _le("|x_k| nondecreasing (decreasing steps)", drops, 0),
        _ge("min |x_{k+1}|/|x_k|", grow, c - 1.0, RTOL),
        _ge("membership (b_k >= b_lower, f = 0)",
            float(validate_membership(plant, cls, traj).passed), 1.0),
    ]


def suite_1a(a=0.5, m=1, A=1.0, c=3.0, steps=30, x0=1.0, b_lower=1.0, **_):
    plant, traj = run_lemma1(a, m, A, c, steps, x0, b_lower)
    return stepwise_growth(plant, traj, c, b_lower)


def total_growth(traj, c, steps, x0):
    """Growth of ``|x|`` over the whole run against ``(c-1)^n``."""
    n = traj.n_steps
    growth = abs(traj.x_end) / abs(x0)
    return [
        _ge("steps simulated", n, steps),
        _ge(f"|x_{n}|/|x_0|", growth, (c - 1.0) ** n, RTOL),
    ]


def suite_1b(a=0.5, m=1, A=1.0, c=3.0, steps=30, x0=1.0, b_lower=1.0, **_):
    _, traj = run_lemma1(a, m, A, c, steps, x0, b_lower)
    return total_growth(traj, c, steps, x0)


def suite_1c(a=0.5, m=2, A=1.0, c=3.0, b_upper=10.0, x0=1.0, b_lower=1.0, k0_max=10,
             k_max=200, **_):
    """Bounded gain: the control overshoots from some ``k0`` on with ``b <= b_upper``.

    The state still diverges.
    """
    cfg = adv.lemma1_config(b_lower, c)
    plant = adv.Lemma1Plant(cfg)
    sched = geometric(a, k_max)
    traj = simulate(plant, sched, example1_controller(A, m), x0)
    ok = [abs(s.u) >= c * abs(s.x) / (b_upper * sched.deltas[s.k]) for s in traj.steps]
    k0 = len(ok)
    while k0 > 0 and ok[k0 - 1]:
        k0 -= 1
    b_after = max((s.b for s in traj.steps[k0:]), default=0.0)
    return [
        _le("k0 (overshoot condition holds from k0 on)", k0, k0_max),
        _le("max realized b_k for k >= k0", b_after, b_upper),
        _ge("overflow flagged", float(traj.overflow), 1.0),
    ]


# -- unknown drift multiplier ---------------------------------------------------

def lemma2_controllers(cls, T):
    return [zero_controller(), linear_controller(1e3),
            prescribed_controller(cls, PhiFunction.for_horizon(T))]


def suite_2(M=32.0, eps=1.0, N=5, b_lower=1.0, b_upper=2.0, T=1.0, x0=1.0, seed=0, psi="abs",
            **_):
    cls = UncertaintyClass.named(psi, b_lower, b_upper)
    sched = uniform(0.0, T, N)
    cfg = adv.lemma2_config(cls, eps, M, sched.deltas)
    member = UncertaintyClass(b_lower, b_upper, cls.psi, cls.psi_monotone_even, cls.psi_slope,
                              d_bound=cfg.D)
    c_exp = max(1.0, (M / eps) ** (1.0 / N))
    d_expected = max(2.0 * (1.0 + c_exp) * b_upper / b_lower,
                     math.log(1.0 + 2.0 * (c_exp - 1.0))) / (cfg.a * min(sched.deltas))
    out = [Assertion("c", math.isclose(cfg.c, max(1.0, (M / eps) ** (1.0 / N))), cfg.c,
                     max(1.0, (M / eps) ** (1.0 / N)), "=="),
           Assertion("D", math.isclose(cfg.D, d_expected), cfg.D, d_expected, "==")]
    for kind in ("lower", "upper", "alternating", "random"):
        for ctrl in lemma2_controllers(cls, T):
            plant = adv.Lemma2Plant(cfg, BProfile(kind, b_lower, b_upper, seed))
            traj = simulate(plant, sched, ctrl, x0)
            tag = f"[b={kind}, {ctrl.label}]"
            xs = traj.xs()
            d_max = max(plant.adversary_state["d"].values())
            out += [
                _ge(f"min |x_(k+1)|/|x_k| {tag}", _min_ratio(xs), cfg.c, RTOL),
                _ge(f"|x_N| {tag}", abs(traj.x_end), M, RTOL),
                _le(f"max d_k {tag}", d_max, cfg.D * (1.0 + RTOL)),
                _ge(f"membership {tag}",
                    float(validate_membership(plant, member, traj, RTOL).passed), 1.0),
            ]
    return out


# -- superlinear drift, fixed period ---------------------------------------------

def suite_3(c=2.0, Delta=0.1, x0=60.0, gains=(0.0, 10.0, 1e3), psi="square", n_max=200, **_):
    cls = UncertaintyClass.named(psi, 1.0, 1.0)
    cfg = adv.lemma3_config(cls, c, Delta)
    level = (1.0 + 2.0 * c) / Delta
    at = min(cls.psi(cfg.M_threshold), cls.psi(-cfg.M_threshold)) / cfg.M_threshold
    out = [_ge(f"psi(M)/M at M_threshold={cfg.M_threshold:.6g}", at, level, RTOL)]
    for K in gains:
        plant = adv.Lemma3Plant(cfg, cls)
        traj = simulate(plant, uniform(0.0, Delta * n_max, n_max), linear_controller(K), x0)
        xs = traj.xs()
        above = [k for k in range(len(xs) - 1) if abs(xs[k]) >= cfg.M_threshold]
        worst = min((abs(xs[k + 1]) / abs(xs[k]) for k in above), default=math.inf)
        out += [
            _ge(f"min |x_(k+1)|/|x_k| above threshold [K={K:g}]", worst, c, RTOL),
            _ge(f"overflow flagged [K={K:g}]", float(traj.overflow), 1.0),
            _ge(f"membership [K={K:g}]", float(validate_membership(plant, cls, traj).passed), 1.0),
        ]
    return out


# -- prescribed law with a searched period ---------------------------------------

def suite_4(M=10.0, eps=0.01, b_lower=1.0, b_upper=2.0, T=1.0, psi="abs", seed=0, **_):
    cls = UncertaintyClass.named(psi, b_lower, b_upper)
    phi = PhiFunction.for_horizon(T)
    sel = select_delta_report(cls, phi, M, eps, T, lemma4_ensemble(cls, seed))
    out = [Assertion("Delta", True, sel.Delta, T / sel.N_start, "<="),
           Assertion("N = T/Delta", True, sel.N, sel.N_start, ">=")]
    for name, late in sel.late_max.items():
        out.append(_le(f"max |x_k|, k >= N [{name}]", late, eps))
    return out


# -- linear gain + relay ----------------------------------------------------------

def suite_linear(b_lower=1.0, b_upper=2.0, M=10.0, eps=0.1, T=1.0, lam=0.5, psi="abs",
                 atol=1e-9, **_):
    cls = UncertaintyClass.named(psi, b_lower, b_upper)
    d = design_linear(b_lower, b_upper, cls, M, eps, T, lam)
    out = [Assertion("design invariants", not d.violations(), len(d.violations()), 0, "==")]
    for x0 in (M, -M):
        plant = adv.WorstCasePlant(b_lower, b_upper, d.psi_bar_M)
        traj = simulate(plant, uniform(0.0, T, d.N), linear_controller(d.K), x0)
        rep = check_contraction(traj, d.lam, eps, d.N, atol)
        out += [
            _le(f"max |x_(k+1)|/|x_k| while |x_k| >= eps [x0={x0:g}]", rep.worst_ratio,
                d.lam + atol / eps),
            _le(f"first l with |x_l| <= eps [x0={x0:g}]",
                math.inf if rep.converged_at is None else rep.converged_at, d.N),
            _ge(f"contraction check [x0={x0:g}]", float(rep.passed), 1.0),
        ]
    return out


def suite_invariance(b_lower=1.0, b_upper=2.0, M=10.0, eps=0.1, T=1.0, lam=0.5, psi="abs",
                     steps=10_000, x0s: Optional[tuple] = None, **_):
    cls = UncertaintyClass.named(psi, b_lower, b_upper)
    d = design_linear(b_lower, b_upper, cls, M, eps, T, lam)
    out = [_le("Delta", d.Delta, d.Delta_inv)]
    for x0 in x0s or (eps, 0.0):
        plant = adv.WorstCasePlant(b_lower, b_upper, d.psi_bar_eps)
        traj = simulate(plant, uniform(0.0, d.Delta * steps, steps), relay_controller(d.C), x0)
        rep = check_invariance(traj, eps)
        out.append(_le(f"max |x_k| after entry [x0={x0:g}]", rep.max_after_entry, eps))
        out.append(_ge(f"invariance check [x0={x0:g}]", float(rep.passed), 1.0))
    return out


# -- stretched schedule limit ------------------------------------------------------

def suite_example2(a=None, m=None, k=10**6, bound=1e-3, **_):
    a_values = (0.3, 0.5, 0.9) if a is None else (a,)
    m_values = (1, 2, 3) if m is None else (m,)
    out = []
    for av in a_values:
        for mv in m_values:
            r = example2_ratio(av, mv, k)
            out.append(_le(f"ratio(a={av:g}, m={mv}, k={k:g})", r, bound))
            out.append(_le(f"ratio decreasing (a={av:g}, m={mv})", r,
                           example2_ratio(av, mv, k // 100)))
    return out


RUNNERS = {"1a": suite_1a, "1b": suite_1b, "1c": suite_1c, "2": suite_2, "3": suite_3,
           "4": suite_4, "linear": suite_linear, "invariance": suite_invariance,
           "example2": suite_example2}


def run_suite(which: str, **params) -> list[Assertion]:
    try:
        fn = RUNNERS[which]
    except KeyError:
        raise ValueError(f"unknown lemma {which!r}; expected one of {', '.join(SUITES)}") from None
    return fn(**{k: v for k, v in params.items() if v is not None})
