"""End-to-end acceptance criteria at their stated tolerances and time budgets.

Each test appends one PASS/FAIL line to ``RESULTS``; ``conftest.py`` prints
them in the terminal summary.  Timings are the best of several repeats
(single run for the period search, which takes seconds).
"""

import gc
import math
import random
import time

import numpy as np
import pytest

from oracles import Q_ABS_M10_EPS001, RATIO_1E6, phi_integral
from ptsample import adversary as adv
from ptsample.control import PhiFunction, linear_controller
from ptsample.integrate import IntervalDynamics, step_affine, step_general
from ptsample.lemmas import (run_lemma1, stepwise_growth, suite_1c, suite_2, suite_example2,
                             suite_invariance, total_growth)
from ptsample.model import UncertaintyClass
from ptsample.runner import simulate
from ptsample.schedules import uniform
from ptsample.synth import (check_contraction, design_linear, lemma4_ensemble,
                            select_delta_report)

RESULTS: list[str] = []


def timed(fn, repeat=5):
    """Return ``(result of the last call, best wall time in seconds)``.

    The garbage collector is paused while timing, as :mod:`timeit` does.
    """
    best = math.inf
    out = None
    gc.collect()
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(repeat):
            t0 = time.perf_counter()
            out = fn()
            best = min(best, time.perf_counter() - t0)
    finally:
        if was_enabled:
            gc.enable()
    return out, best


def record(num, title, failures, elapsed, budget):
    slow = elapsed >= budget
    ok = not failures and not slow
    detail = f"{elapsed * 1e3:.3g} ms (budget {budget * 1e3:g} ms)"
    if failures:
        detail += "; " + "; ".join(failures[:4])
        if len(failures) > 4:
            detail += f"; ... {len(failures) - 4} more"
    if slow:
        detail += "; over time budget"
    RESULTS.append(f"{'PASS' if ok else 'FAIL'} criterion {num} ({title}): {detail}")
    assert not failures, failures
    assert not slow, f"took {elapsed:.4g} s, budget {budget:g} s"


def failed_lines(assertions):
    return [a.line() for a in assertions if not a.passed]


def test_criterion_01_unbounded_gain_growth():
    def run():
        plant, traj = run_lemma1(a=0.5, m=1, A=1.0, c=3.0, steps=30, x0=1.0)
        return stepwise_growth(plant, traj, 3.0, 1.0) + total_growth(traj, 3.0, 30, 1.0)

    res, dt = timed(run, repeat=20)
    bound = next(a for a in res if a.name.startswith("|x_30|"))
    fails = failed_lines(res)
    if bound.bound < 2.0 ** 30:
        fails.append(f"growth bound {bound.bound:g} below 2^30")
    record(1, "growth under the unbounded-gain adversary", fails, dt, 1e-3)


def test_criterion_02_bounded_gain_overshoot():
    res, dt = timed(lambda: suite_1c(a=0.5, m=2, A=1.0, c=3.0, b_upper=10.0, k0_max=10), repeat=20)
    record(2, "overshoot and divergence with b_upper = 10", failed_lines(res), dt, 1e-3)


def test_criterion_03_stretched_schedule_ratio():
    res, dt = timed(lambda: suite_example2(k=10 ** 6, bound=1e-3))
    fails = failed_lines(res)
    # the log-domain value must agree with the extended-precision oracle either way
    for a in res:
        if a.name.startswith("ratio(") and not a.name.startswith("ratio decreasing"):
            key = (float(a.name.split("a=")[1].split(",")[0]),
                   int(a.name.split("m=")[1].split(",")[0]))
            if not math.isclose(a.measured, RATIO_1E6[key], rel_tol=1e-9):
                fails.append(f"ratio{key} = {a.measured!r}, oracle {RATIO_1E6[key]!r}")
    record(3, "stretched-schedule ratio below 1e-3 at k = 1e6", fails, dt, 10e-3)


def test_criterion_04_drift_multiplier_adversary():
    res, dt = timed(lambda: suite_2(M=32.0, eps=1.0, N=5, b_lower=1.0, b_upper=2.0, T=1.0,
                                    x0=1.0, psi="abs"))
    fails = failed_lines(res)
    c = next(a for a in res if a.name == "c")
    D = next(a for a in res if a.name == "D")
    if not math.isclose(c.measured, 2.0, rel_tol=1e-12):
        fails.append(f"c = {c.measured!r}, expected 2")
    if not math.isclose(D.measured, 60.0, rel_tol=1e-12):
        fails.append(f"D = {D.measured!r}, expected 60")
    if len(res) != 2 + 4 * 3 * 4:
        fails.append(f"expected 4 profiles x 3 controllers, got {len(res)} assertions")
    record(4, "doubling under the drift-multiplier adversary", fails, dt, 10e-3)


def test_criterion_05_superlinear_drift():
    cls = UncertaintyClass.named("square", 1.0, 1.0)

    def run():
        cfg = adv.lemma3_config(cls, 2.0, 0.1)
        sched = uniform(0.0, 20.0, 200)
        out = []
        for K in (0.0, 10.0, 1e3):
            traj = simulate(adv.Lemma3Plant(cfg, cls), sched, linear_controller(K), 60.0)
            xs = np.abs(traj.xs())
            worst = float((xs[1:] / xs[:-1]).min())
            out.append((K, worst, traj.overflow))
        return cfg, out

    (cfg, runs), dt = timed(run, repeat=50)
    fails = []
    if not math.isclose(cfg.M_threshold, 50.0, rel_tol=1e-9):
        fails.append(f"M_threshold = {cfg.M_threshold!r}, expected 50")
    for K, worst, overflow in runs:
        if worst < 2.0:
            fails.append(f"K={K:g}: min |x_(k+1)|/|x_k| = {worst:.6g} < 2")
        if not overflow:
            fails.append(f"K={K:g}: no overflow")
    record(5, "doubling above the superlinear threshold", fails, dt, 1e-3)


def test_criterion_06_prescribed_period_search():
    cls = UncertaintyClass.named("abs", 1.0, 2.0)
    phi = PhiFunction.for_horizon(1.0)

    def run():
        ens = lemma4_ensemble(cls, seed=0)
        return ens, select_delta_report(cls, phi, 10.0, 0.01, 1.0, ens)

    (ens, sel), dt = timed(run, repeat=1)
    fails = []
    if len(ens) != 20 or len({p.name for p in ens}) != 20:
        fails.append("ensemble is not 20 distinct plants")
    if not math.isclose(sel.Q, Q_ABS_M10_EPS001, rel_tol=1e-9):
        fails.append(f"Q = {sel.Q!r}, oracle {Q_ABS_M10_EPS001!r}")
    if sel.N != 24923 or sel.Delta != 1.0 / 24923:
        fails.append(f"N = {sel.N}, Delta = {sel.Delta!r}; expected N = 24923")
    for name, late in sel.late_max.items():
        if not late <= 0.01:
            fails.append(f"{name}: max |x_k| for k >= N is {late:.6g}")
    record(6, "period search keeps every ensemble run inside eps", fails, dt, 5.0)


def test_criterion_07_linear_design():
    cls = UncertaintyClass.named("abs", 1.0, 2.0)

    def run():
        d = design_linear(1.0, 2.0, cls, 10.0, 0.1, 1.0, 0.5)
        reps = []
        for x0 in (10.0, -10.0):
            traj = simulate(adv.WorstCasePlant(1.0, 2.0, d.psi_bar_M), uniform(0.0, 1.0, d.N),
                            linear_controller(d.K), x0)
            reps.append((x0, check_contraction(traj, d.lam, 0.1, d.N, atol=1e-9)))
        return d, reps

    (d, reps), dt = timed(run)
    fails = []
    expected = {"Delta": 1 / 600, "K": 400.0, "C": 0.1, "Delta_inv": 1 / 3}
    for key, want in expected.items():
        got = getattr(d, key)
        if not math.isclose(got, want, rel_tol=1e-12):
            fails.append(f"{key} = {got!r}, expected {want!r}")
    if d.N != 600:
        fails.append(f"N = {d.N}, expected 600")
    for x0, rep in reps:
        if rep.violations:
            fails.append(f"x0={x0:g}: {len(rep.violations)} steps exceed lambda |x_k| + 1e-9")
        if rep.converged_at is None or rep.converged_at > 600:
            fails.append(f"x0={x0:g}: reached eps at {rep.converged_at}")
    record(7, "linear design numbers and worst-case contraction", fails, dt, 100e-3)


def test_criterion_08_relay_invariance():
    res, dt = timed(lambda: suite_invariance(1.0, 2.0, 10.0, 0.1, 1.0, 0.5, "abs", steps=10_000,
                                             x0s=(0.1,)), repeat=3)
    record(8, "relay keeps the eps-interval invariant for 1e4 steps", failed_lines(res), dt,
           100e-3)


def test_criterion_09_integrator_cross_validation():
    rng = random.Random(20240)
    cases = []
    for _ in range(1000):
        x = rng.uniform(-50.0, 50.0)
        alpha = rng.uniform(-5.0, 5.0)
        f0 = rng.uniform(-20.0, 20.0)
        b0 = rng.uniform(0.1, 5.0)
        u = rng.uniform(-10.0, 10.0)
        dt = 10.0 ** rng.uniform(-3.0, 0.0)
        cases.append((x, alpha, f0, b0, u, dt))

    def run():
        worst = 0.0
        bad = []
        for x, alpha, f0, b0, u, dt in cases:
            dyn = IntervalDynamics.general(lambda y, t, a=alpha, f=f0: a * y + f,
                                           lambda y, t, b=b0: b, f0 + alpha * x, b0)
            g = step_general(x, dyn, u, dt).x
            e = step_affine(x, alpha, f0 + b0 * u, dt)
            err = abs(g - e) / max(1.0, abs(x))
            worst = max(worst, err)
            if err > 1e-9:
                bad.append((x, alpha, f0, b0, u, dt, err))
        return worst, bad

    (worst, bad), dt = timed(run, repeat=3)
    fails = [f"{len(bad)} of 1000 intervals exceed 1e-9 max(1,|x|) (worst {worst:.3g})"] if bad \
        else []
    record(9, "general integrator matches the exact affine step", fails, dt, 1.0)


@pytest.mark.parametrize("T", [0.5, 1.0, 10.0])
def test_criterion_10_phi_normalization(T):
    phi = PhiFunction.for_horizon(T)
    val, dt = timed(phi.reciprocal_integral)
    fails = []
    if not math.isclose(val, T, rel_tol=1e-6):
        fails.append(f"integral = {val!r}, expected {T}")
    if not math.isclose(val, phi_integral(T), rel_tol=1e-6):
        fails.append(f"integral = {val!r}, oracle {phi_integral(T)!r}")
    record(10, f"settling-time integral of 1/phi equals T = {T:g}", fails, dt, 10e-3)
