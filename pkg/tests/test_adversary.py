import math

import pytest
from hypothesis import given, strategies as st

from ptsample import adversary as adv
from ptsample.control import (PhiFunction, example1_controller, linear_controller,
                              prescribed_controller, zero_controller)
from ptsample.model import BProfile, Controller, UncertaintyClass, validate_membership
from ptsample.runner import simulate
from ptsample.schedules import explicit, geometric, uniform
from oracles import lemma2_gain, worst_next

ABS12 = UncertaintyClass.named("abs", 1.0, 2.0)
SQUARE = UncertaintyClass.named("square", 1.0, 1.0)


# -- unbounded input gain --------------------------------------------------------

@pytest.mark.parametrize("x,u,expected", [(1, -4, 1.5), (1, 0, 1.0), (0, -4, 1.0)])
def test_lemma1_b(x, u, expected):
    assert adv.lemma1_b(x, u, 0.5, 1.0, 3.0) == expected


@pytest.mark.parametrize("x,u,expected", [(1, -4, -2.0), (5, 0, 5.0), (-1, -4, -4.0)])
def test_lemma1_step(x, u, expected):
    assert adv.lemma1_step(x, u, 0.5, 1.0, 3.0) == expected


def test_lemma1_requires_c_above_two():
    with pytest.raises(ValueError):
        adv.lemma1_config(1.0, 2.0)


# subnormal states are excluded: relative comparisons lose meaning there
_state = st.floats(-1e6, 1e6).filter(lambda v: v == 0.0 or abs(v) >= 1e-300)


@given(_state, _state, st.floats(1e-6, 1.0), st.floats(2.01, 10))
def test_lemma1_step_matches_gain(x, u, dt, c):
    b = adv.lemma1_b(x, u, dt, 1.0, c)
    nxt = adv.lemma1_step(x, u, dt, 1.0, c)
    if math.isfinite(b * u):
        assert nxt == pytest.approx(x + dt * b * u, rel=1e-12, abs=1e-12 * abs(x))
    if u != 0:
        dyn = adv.Lemma1Plant(adv.lemma1_config(1.0, c)).interval(0, 0.0, x, u, dt)
        assert x + dt * dyn.beta == pytest.approx(nxt, rel=1e-12, abs=1e-12 * abs(x))
        assert abs(nxt) >= (c - 1) * abs(x) * (1 - 1e-12)


def _random_law(seed):
    def law(x, t, k):
        h = math.sin(1000.0 * (k + 1) * (seed + 1))
        return -h * 50.0 * x + math.cos(k + seed)
    return Controller(law, f"random-{seed}")


@given(st.integers(0, 10_000), st.lists(st.floats(1e-4, 0.2), min_size=1, max_size=40),
       st.floats(-100, 100).filter(lambda v: v != 0))
def test_lemma1_state_never_shrinks(seed, steps, x0):
    ts = [0.0]
    for d in steps:
        ts.append(ts[-1] + d)
    plant = adv.Lemma1Plant(adv.lemma1_config(1.0, 3.0))
    traj = simulate(plant, explicit(ts), _random_law(seed), x0)
    xs = traj.xs()
    for k in range(len(xs) - 1):
        assert abs(xs[k + 1]) >= abs(xs[k])
        if traj.steps[k].u != 0:
            assert abs(xs[k + 1]) >= 2 * abs(xs[k]) * (1 - 1e-12)


@pytest.mark.parametrize("A,m", [(1, 1), (0.1, 1), (5, 1), (1, 2), (2, 3)])
def test_lemma1_geometric_growth(A, m):
    plant = adv.Lemma1Plant(adv.lemma1_config(1.0, 3.0))
    traj = simulate(plant, geometric(0.5, 40), example1_controller(A, m), 1.0)
    xs = traj.xs()
    for k in range(len(xs)):
        assert abs(xs[k]) >= 2.0 ** k * (1 - 1e-12)


# -- unknown drift multiplier -------------------------------------------------

def _cfg2():
    return adv.lemma2_config(ABS12, 1.0, 32.0, uniform(0, 1, 5).deltas)


def test_lemma2_config_constants():
    cfg = _cfg2()
    assert cfg.a == 1.0 and cfg.c == pytest.approx(2.0, rel=1e-15)
    assert cfg.D == pytest.approx(60.0, rel=1e-14)
    assert cfg.D == pytest.approx(lemma2_gain(1.0, 0.2, 2.0, 1.0, 2.0), rel=1e-15)


def test_lemma2_d_cases():
    cfg = _cfg2()
    assert adv.lemma2_d(1.0, -20.0, 0.2, cfg) == 0.0
    assert adv.lemma2_d(1.0, 0.0, 0.2, cfg) == pytest.approx(60.0, rel=1e-14)
    # q = -3 exactly goes to the zero-drift branch
    assert adv.lemma2_d(1.0, -15.0, 0.2, cfg) == 0.0
    assert adv.lemma2_d(1.0, -14.999, 0.2, cfg) > 0
    with pytest.raises(adv.AdversaryInapplicable):
        adv.lemma2_d(0.0, 1.0, 0.2, cfg)


@given(st.floats(1.0, 1e3), st.floats(-1e4, 1e4), st.floats(1.0, 2.0))
def test_lemma2_step_grows_for_any_admissible_gain(x, u, b):
    cfg = _cfg2()
    for sx in (x, -x):
        nxt = adv.lemma2_next(sx, u, 0.2, b, cfg)
        assert abs(nxt) >= cfg.c * abs(sx) * (1 - 1e-9)


def test_lemma2_needs_positive_ratio_and_bounded_gain():
    with pytest.raises(ValueError):
        adv.lemma2_config(UncertaintyClass.named("zero", 1, 2), 1.0, 32.0, [0.2])
    with pytest.raises(ValueError):
        adv.lemma2_config(UncertaintyClass.named("abs", 1), 1.0, 32.0, [0.2])


def test_infimum_ratio_numeric():
    sq = UncertaintyClass.named("square", 1)
    assert adv.infimum_ratio(sq, 0.5) == pytest.approx(0.5, rel=1e-9)
    const = UncertaintyClass.named("const:3", 1)
    assert adv.infimum_ratio(const, 1.0) == 0.0
    sq_plus = UncertaintyClass(1.0, psi=lambda s: abs(s) + (s * s - 4) ** 2 / 10)
    # minimum of 1 + (s^2-4)^2/(10 s) is 1 at s = 2
    assert adv.infimum_ratio(sq_plus, 1.0) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("kind", ["lower", "upper", "alternating", "random"])
def test_lemma2_runs_are_members(kind):
    cfg = _cfg2()
    member = UncertaintyClass(1.0, 2.0, ABS12.psi, True, 1.0, d_bound=cfg.D)
    for ctrl in (zero_controller(), linear_controller(1e3),
                 prescribed_controller(ABS12, PhiFunction.for_horizon(1.0))):
        plant = adv.Lemma2Plant(cfg, BProfile(kind, 1.0, 2.0, 11))
        traj = simulate(plant, uniform(0, 1, 5), ctrl, 1.0)
        assert validate_membership(plant, member, traj, 1e-9).passed
        assert abs(traj.x_end) >= 32.0


def test_lemma2_plant_rejects_wider_profile():
    with pytest.raises(ValueError):
        adv.Lemma2Plant(_cfg2(), BProfile("upper", 1.0, 3.0))


# -- superlinear drift -------------------------------------------------------

def test_lemma3_threshold():
    cfg = adv.lemma3_config(SQUARE, 2.0, 0.1)
    assert cfg.M_threshold == pytest.approx(50.0, rel=1e-12)
    with pytest.raises(ValueError):
        adv.lemma3_config(UncertaintyClass.named("abs", 1, 1), 2.0, 0.1)


def test_lemma3_cases():
    cfg = adv.lemma3_config(SQUARE, 2.0, 0.1)
    assert adv.lemma3_f(10.0, 0.0, 0.1, cfg, SQUARE) == 0.0
    assert adv.lemma3_f(100.0, -4000.0, 0.1, cfg, SQUARE) == 0.0
    assert abs(adv.lemma3_step(100.0, -4000.0, 0.1, cfg, SQUARE)) >= 300.0
    assert adv.lemma3_f(100.0, -1000.0, 0.1, cfg, SQUARE) == pytest.approx(1e4)
    nxt = adv.lemma3_step(100.0, -1000.0, 0.1, cfg, SQUARE)
    assert nxt - 100.0 == pytest.approx(900.0) and nxt >= 200.0


@given(st.floats(50.0, 1e50), st.floats(-1e60, 1e60))
def test_lemma3_growth_above_threshold(x, u):
    cfg = adv.lemma3_config(SQUARE, 2.0, 0.1)
    for sx in (x, -x):
        assert abs(adv.lemma3_step(sx, u, 0.1, cfg, SQUARE)) >= 2.0 * abs(sx) * (1 - 1e-12)


# -- class members for the positive designs -------------------------------------

def test_envelope_plant_drifts():
    for drift, s in (("zero", 0), ("outward", 1), ("inward", -1)):
        p = adv.EnvelopePlant(ABS12, drift, BProfile("lower", 1, 2))
        assert p.f(-3.0, 0, 0, 0) == s * -3.0
    flip = adv.EnvelopePlant(ABS12, "flip", BProfile("lower", 1, 2))
    assert flip.f(2.0, 0, 0, 0) == 2.0 and flip.f(2.0, 0, 1, 0) == -2.0
    with pytest.raises(ValueError):
        adv.EnvelopePlant(ABS12, "sideways", BProfile("lower", 1, 2))


def test_envelope_plant_nonlinear_envelope_uses_general_mode():
    p = adv.EnvelopePlant(UncertaintyClass.named("square", 1, 2), "outward",
                          BProfile("upper", 1, 2))
    assert p.interval(0, 0.0, 1.0, 0.0, 0.1).mode == "general"


@given(st.floats(-20, 20), st.floats(-1e4, 1e4), st.floats(1e-4, 0.1))
def test_worst_case_plant_maximizes_next_state(x, u, dt):
    p = adv.WorstCasePlant(1.0, 2.0, 10.0)
    dyn = p.interval(0, 0.0, x, u, dt)
    got = abs(x + dt * dyn.beta)
    assert got == pytest.approx(worst_next(x, u, dt, 10.0, 1.0, 2.0), rel=1e-12, abs=1e-15)
