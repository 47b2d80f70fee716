import math
import pickle

import pytest
from hypothesis import given, strategies as st

from ptsample import adversary as adv
from ptsample.control import example1_controller, zero_controller
from ptsample.model import (BProfile, FunctionPlant, StepRecord, Trajectory, UncertaintyClass,
                            constant_plant, named_psi, sign, validate_membership)
from ptsample.runner import simulate
from ptsample.schedules import geometric, uniform


def test_sign_selects_zero_at_origin():
    assert (sign(2.0), sign(-1e-300), sign(0.0), sign(-0.0)) == (1.0, -1.0, 0.0, 0.0)


@pytest.mark.parametrize("name,x,expected", [
    ("abs", -3.0, 3.0), ("square", -3.0, 9.0), ("zero", 5.0, 0.0),
    ("const:2.5", 100.0, 2.5), ("sinabs", math.pi / 2, math.pi / 2),
])
def test_named_psi(name, x, expected):
    assert named_psi(name).fn(x) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("bad", ["cube", "const:x", "const:-1"])
def test_named_psi_rejects(bad):
    with pytest.raises(ValueError):
        named_psi(bad)


def test_class_validation():
    with pytest.raises(ValueError):
        UncertaintyClass(0.0)
    with pytest.raises(ValueError):
        UncertaintyClass(2.0, 1.0)
    assert not UncertaintyClass(1.0).bounded
    assert UncertaintyClass.named("abs", 1, 2).bounded


def test_envelope_rejects_negative_psi():
    cls = UncertaintyClass(1.0, psi=lambda x: -1.0)
    with pytest.raises(ValueError):
        cls.envelope(0.0)


def test_b_profiles():
    assert BProfile("lower", 1, 2)(7) == 1
    assert BProfile("upper", 1, 2)(7) == 2
    alt = BProfile("alternating", 1, 2)
    assert [alt(k) for k in range(4)] == [1, 2, 1, 2]
    with pytest.raises(ValueError):
        BProfile("gauss", 1, 2)


@given(st.integers(0, 10**7), st.integers(0, 2**32 - 1))
def test_random_profile_depends_only_on_seed_and_index(k, seed):
    p, q = BProfile("random", 1.0, 2.0, seed), BProfile("random", 1.0, 2.0, seed)
    q(k + 5000)  # different access order must not matter
    v = p(k)
    assert v == q(k)
    assert 1.0 <= v <= 2.0


def test_random_profile_pickles_without_cache():
    p = BProfile("random", 1, 3, seed=4)
    v = p(10)
    r = pickle.loads(pickle.dumps(p))
    assert r._blocks == {} and r(10) == v


def test_membership_zero_drift_lower_gain_passes():
    cls = UncertaintyClass.named("abs", 1, 2)
    plant = constant_plant(0.0, 1.0)
    traj = simulate(plant, uniform(0, 1, 10), zero_controller(), 3.0)
    rep = validate_membership(plant, cls, traj)
    assert rep.passed and all(rep.f_ok) and all(rep.b_ok)


def test_membership_flags_drift_outside_envelope():
    cls = UncertaintyClass.named("abs", 1, 2)
    plant = constant_plant(0.0, 1.0)
    traj = Trajectory(steps=[StepRecord(0, 0.0, 2.0, 0.0, 0.0, 1.0),
                             StepRecord(1, 0.5, 2.0, 0.0, 2.5, 1.0)],
                      plant_id=plant.name)
    rep = validate_membership(plant, cls, traj)
    assert not rep.passed and rep.first_failure == 1 and rep.f_ok == [True, False]


def test_membership_rejects_foreign_trajectory():
    plant = constant_plant(0.0, 1.0)
    traj = simulate(constant_plant(0.0, 2.0), uniform(0, 1, 2), zero_controller(), 1.0)
    with pytest.raises(ValueError):
        validate_membership(plant, UncertaintyClass(1.0), traj)


def test_lemma1_trajectory_is_member_of_unbounded_class():
    plant = adv.Lemma1Plant(adv.lemma1_config(1.0, 3.0))
    traj = simulate(plant, geometric(0.5, 30), example1_controller(1.0, 1), 1.0)
    assert validate_membership(plant, UncertaintyClass(1.0), traj).passed
    assert min(s.b for s in traj.steps) >= 1.0


def test_function_plant_general_mode():
    plant = FunctionPlant(lambda x, t: -x, lambda x, t: 1.0)
    dyn = plant.interval(0, 0.0, 1.0, 0.0, 0.1)
    assert dyn.mode == "general" and dyn.f0 == -1.0 and dyn.b0 == 1.0


def test_trajectory_state_accessors():
    traj = simulate(constant_plant(1.0, 1.0), uniform(0, 1, 4), zero_controller(), 0.0)
    assert traj.state(4) == traj.x_end == pytest.approx(1.0)
    assert list(traj.ts()) == [0.0, 0.25, 0.5, 0.75, 1.0]
