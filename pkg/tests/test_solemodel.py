import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epdta import automaton as A
from epdta import semantics as S
from epdta import solemodel as M

# Frozen from the closed form 39.6 * (1 - exp(-0.44 * (age / 12 + 0.46))).
VBGF_FROZEN = {
    0: 7.255981048934409,
    12: 18.769273791310418,
    24: 26.184253643992772,
    36: 30.959770730717906,
    48: 34.035377664073756,
}


def zero_model(max_time, **kwargs):
    z = M.ProbTable(np.zeros((5, 12)))
    return M.build_sole_model(z, z, z, max_time=max_time, **kwargs)


def settle(a, s, rng):
    """Step until only Time is possible (all monthly work is done)."""
    while True:
        rules = S.steps(a, s)
        if len(rules) == 1 and rules[0].rule == "time":
            return s
        s, _ = S.sample_step(a, s, rng)


def one_month(a, s, rng):
    s, _ = S.sample_step(a, s, rng)
    return settle(a, s, rng)


# --- growth, weight, classes -------------------------------------------------------

@pytest.mark.parametrize("age, expected", VBGF_FROZEN.items())
def test_vbgf_frozen_values(age, expected):
    assert M.vbgf_length(age) == pytest.approx(expected, rel=1e-12)


def test_vbgf_known_points_and_classes():
    assert M.vbgf_length(12) == pytest.approx(18.77, abs=0.005)
    assert M.vbgf_length(36) == pytest.approx(30.96, abs=0.005)
    assert [M.class_of(M.vbgf_length(a)) for a in (12, 24, 36, 48)] == [1, 2, 3, 4]
    assert M.vbgf_length(10**6) == pytest.approx(39.6)


def test_vbgf_literal_months_switch():
    p = M.GrowthParams(age_unit="months")
    assert M.vbgf_length(12, p=p) == pytest.approx(39.6 * (1 - math.exp(-0.44 * 12.46)))


def test_vbgf_time_varying_k():
    p = M.GrowthParams(k=lambda t: 0.44 if t < 10 else 0.22)
    assert M.vbgf_length(12, 0, p) == pytest.approx(VBGF_FROZEN[12])
    assert M.vbgf_length(12, 10, p) < VBGF_FROZEN[12]


@given(st.floats(0, 39.5))
def test_age_at_length_inverts_vbgf(length):
    age = M.age_at_length(length)
    if age > 0:
        assert M.vbgf_length(age) == pytest.approx(length, abs=1e-9)


def test_weight():
    assert M.weight(0) == 0
    assert M.weight(39.6) == pytest.approx(551, rel=0.005)
    with pytest.raises(ValueError):
        M.weight(-1)


@given(st.floats(0, 39.6), st.floats(0, 39.6))
def test_weight_monotone(a, b):
    if a < b:
        assert M.weight(a) < M.weight(b)


@pytest.mark.parametrize("length, cls", [(0, 0), (18.3, 0), (18.4, 1), (25.8, 1), (25.9, 2), (30.8, 3), (34.0, 4),
                                         (39.6, 4), (18.349, 0), (18.35, 1)])
def test_class_boundaries(length, cls):
    assert M.class_of(length) == cls


@pytest.mark.parametrize("length", [-0.1, 39.7])
def test_class_out_of_range(length):
    with pytest.raises(ValueError):
        M.class_of(length)


def test_class_table_must_be_contiguous():
    with pytest.raises(ValueError):
        M.ClassTable((0.0, 18.5), (18.3, 39.6), ("0", "1"))


def test_monthly_prob_from_annual_index():
    assert M.monthly_prob_from_annual_index(0) == 0
    assert M.monthly_prob_from_annual_index(0.2) == pytest.approx(0.01652854617838251, rel=1e-12)
    assert M.monthly_prob_from_annual_index(0.2) == pytest.approx(0.0165, abs=1e-4)
    assert M.monthly_prob_from_annual_index(1.2) == pytest.approx(0.09516258196404048, rel=1e-12)
    with pytest.raises(ValueError):
        M.monthly_prob_from_annual_index(-1)


# --- tables and configuration ---------------------------------------------------

def test_prob_table_validation_and_overrides():
    with pytest.raises(ValueError):
        M.ProbTable(np.full((5, 12), 1.5))
    with pytest.raises(ValueError):
        M.ProbTable(np.zeros((5, 11)))
    t = M.ProbTable(np.full((5, 12), 0.1), {(2, 14): 0.9})
    assert t.at(2, 14) == 0.9
    assert t.at(2, 13) == 0.1
    assert t.at(0, 3, start_month=10) == 0.1


def test_default_species_tables():
    sp = M.SpeciesConfig()
    assert sp.fishing.values[3, 7] == pytest.approx(0.0165)
    assert sp.breeding.values[0, 0] == 0.3
    assert np.all(sp.breeding_table().values[0] == 0)
    assert sp.breeding_table().values[1, 0] == 0.3
    assert sp.fishing_table(0.0).values.max() == 0
    assert sp.fishing_table(1.2).values[4, 0] == pytest.approx(0.09516258196404048)


def test_species_config_yaml():
    text = """
name: test sole
growth: {k: 0.5}
fishing:
  unit: percent
  values: [[2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2]]
  overrides:
    - {class: 0, month: 3, value: 50}
classes:
  - {label: small, min: 0, max: 20.0}
mortality: [[0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01]]
breeding: [[0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]]
population: {2005: [10]}
fertility_threshold: 6
"""
    sp = M.load_species_config(text)
    assert sp.name == "test sole" and sp.growth.k == 0.5
    assert sp.fishing.values[0, 0] == pytest.approx(0.02)
    assert sp.fishing.at(0, 3) == pytest.approx(0.5)
    assert sp.fertility.threshold == 6
    assert sp.population[2005] == (10,)


def test_species_config_shape_error():
    with pytest.raises(ValueError):
        M.load_species_config("mortality: [[0.1, 0.1]]")
    with pytest.raises(ValueError):
        M.load_species_config("breeding: [[0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]]")


def test_shipped_config_equals_defaults():
    from importlib import resources
    sp = M.load_species_file(str(resources.files("epdta") / "models" / "sole.cfg"))
    d = M.SpeciesConfig()
    for key in ("mortality", "fishing", "breeding"):
        assert np.allclose(getattr(sp, key).values, getattr(d, key).values)
    assert sp.population == d.population and sp.births == d.births
    assert sp.growth == d.growth and sp.classes == d.classes


# --- the built automaton -------------------------------------------------------------

def test_built_automaton_validates():
    model = M.SpeciesConfig().build(max_time=73)
    a = model.automaton
    assert A.validate(a) == []
    assert set(a.locations) == {f"class_{i}" for i in range(5)} | {"dead", "fished"}
    assert a.clocks == ("x",) and a.bools == ("M_c", "F_c", "R_c")
    assert {"age", "length", "lastB"} <= set(a.ints)
    assert a.edges_from("dead") == () and a.edges_from("fished") == ()
    urgent = [e for e in a.edges if e.urgent]
    assert [(e.source, e.distribution[0][0].target) for e in urgent] == [
        (f"class_{i}", f"class_{i + 1}") for i in range(4)]
    actions = set(a.actions)
    assert {f"dead_{i}" for i in range(5)} <= actions and {f"fish_{i}" for i in range(5)} <= actions
    assert {f"breed_{i}" for i in range(1, 5)} <= actions and "breed_0" not in actions


def test_certain_death():
    one = M.ProbTable(np.ones((5, 12)))
    z = M.ProbTable(np.zeros((5, 12)))
    a = M.build_sole_epdta(one, z, z, max_time=3)
    assert S.reach_probability(a, "dead", 1) == 1


def test_promotion_at_age_twelve():
    model = zero_model(4, initial_age=11)
    a = model.automaton
    rng = random.Random(0)
    s = S.initial_state(a)
    assert s.location == "class_0"
    s = one_month(a, s, rng)
    iota = S.interpretation(a, s)
    assert iota["age"] == 12 and iota["length"] == 188
    assert s.location == "class_1"


def test_monthly_checks_exactly_once(sole2):
    a = sole2.automaton
    g = S.enumerate_states(a)
    for s in g.states:
        if s.location not in ("class_0", "class_1"):
            continue
        for d in S.steps(a, s):
            if d.rule != "nonurgent":
                continue
            for succ, _, _ in d.outcomes:
                before, after = S.interpretation(a, s), S.interpretation(a, succ)
                raised = [f for f in ("M_c", "F_c", "R_c") if after[f] and not before[f]]
                # A check flips one flag from ff to tt, never back.
                assert len(raised) <= 1
                if raised:
                    assert not before[raised[0]]


def test_class_consistent_after_settling(sole2):
    a = sole2.automaton
    g = S.enumerate_states(a)
    for s in g.states:
        if s.location.startswith("class_") and [d.rule for d in S.steps(a, s)] == ["time"]:
            length = S.interpretation(a, s)["length"]
            assert M.class_of_mm(length, sole2.classes) == sole2.class_index(s.location)


def test_last_breed_resets_only_on_breeding():
    sp = M.SpeciesConfig()
    model = sp.build(max_time=40, initial_age=30)
    a = model.automaton
    rng = random.Random(5)
    for _ in range(30):
        s = model.state(30, 0, 12)
        prev = 12
        for month in range(36):
            s, _ = S.sample_step(a, s, rng)
            events = []
            while True:
                rules = S.steps(a, s)
                if len(rules) == 1 and rules[0].rule == "time":
                    break
                s, action = S.sample_step(a, s, rng)
                events.append(action)
            if s.location in ("dead", "fished"):
                break
            last = S.interpretation(a, s)["lastB"]
            assert last == (1 if any(e.startswith("breed_") for e in events) else prev + 1)
            prev = last


def test_growth_only_trace_matches_vbgf():
    model = zero_model(30)
    a = model.automaton
    rng = random.Random(1)
    s = S.initial_state(a)
    lengths = [S.interpretation(a, s)["length"]]
    for _ in range(28):
        s = one_month(a, s, rng)
        assert s.location.startswith("class_")
        lengths.append(S.interpretation(a, s)["length"])
    assert lengths == [round(M.vbgf_length(age) * 10 + 1e-9) for age in range(29)]


def test_absolute_month_overrides_switch_the_period():
    z = M.ProbTable(np.zeros((5, 12)))
    spike = M.ProbTable(np.zeros((5, 12)), {(0, 2): 1.0})
    model = M.build_sole_model(spike, z, z, max_time=6)
    assert model.absolute and model.period == 6
    a = model.automaton
    assert S.reach_probability(a, "dead", 2) == 0
    assert S.reach_probability(a, "dead", 3) == 1


def test_time_varying_growth_builds_two_dimensional_table():
    p = M.GrowthParams(k=lambda t: 0.44 if t < 3 else 0.3)
    z = M.ProbTable(np.zeros((5, 12)))
    model = M.build_sole_model(z, z, z, growth=p, max_time=6)
    assert model.automaton.tables["vb"].arity == 2
    g = S.enumerate_states(model.automaton)
    assert not g.deadlocks


def test_reduced_model_is_small(sole2):
    g = S.enumerate_states(sole2.automaton)
    assert len(g.states) < 10**5 and not g.deadlocks
    locations = {s.location for s in g.states}
    assert {"class_0", "class_1", "dead", "fished", A.STOP} == locations


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_single_month_survival_probability(pm, pf):
    mort = M.ProbTable(np.full((5, 12), pm))
    fish = M.ProbTable(np.full((5, 12), pf))
    z = M.ProbTable(np.zeros((5, 12)))
    a = M.build_sole_epdta(mort, fish, z, max_time=3)
    p_dead = S.reach_probability(a, "dead", 1)
    p_fished = S.reach_probability(a, "fished", 1)
    # Checks run in a uniformly random order; the one run first takes the
    # fish with its full probability.
    pm_, pf_ = Fraction(repr(pm)), Fraction(repr(pf))
    dead = (pm_ + pm_ * (1 - pf_)) / 2
    fished = (pf_ + pf_ * (1 - pm_)) / 2
    if pm in (0.0, 1.0) or pf in (0.0, 1.0):
        assert p_dead == pytest.approx(float(dead)) and p_fished == pytest.approx(float(fished))
    else:
        assert p_dead == dead and p_fished == fished
