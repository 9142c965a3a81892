from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from epdta import automaton as A
from conftest import SMALL_MODELS, shipped, shipped_text

BASE = """\
name probe
clocks x, y
bools b = ff
ints
  v in [0, 5] = 0
locations
  l0 invariant: {inv}
  l1
init l0
max_time 4
edges
  edge l0 guard: {guard}
{outcomes}
"""


def model(inv="x <= 2", guard="x >= 1", outcomes="    0.5: a, {}, reset{x}, -> l1\n    0.5: ε, {b <- tt}, reset{}, -> l0"):
    return BASE.format(inv=inv, guard=guard, outcomes=outcomes)


def diagnostics(text):
    with pytest.raises(A.ModelError) as info:
        A.load(text)
    return " | ".join(info.value.diagnostics)


def test_fig1_structure(fig1):
    assert fig1.locations == ("l0", "l1", "l2")
    assert len(fig1.edges) == 2
    (o1, p1), (o2, p2) = fig1.edges[0].distribution
    assert (o1.action, o1.target, p1) == ("a", "l1", Fraction(7, 10))
    assert (o2.action, o2.target, p2) == (A.EPSILON, "l2", Fraction(3, 10))
    assert o1.reset == frozenset({"x"}) and o2.reset == frozenset()
    assert fig1.actions == ("a",)
    assert A.validate(fig1) == []


@pytest.mark.parametrize("name", SMALL_MODELS)
def test_dump_load_round_trip(name):
    a = shipped(name)
    text = A.dump(a)
    b = A.load(text)
    assert A.canonical_form(a) == A.canonical_form(b)
    assert A.dump(b) == text


def test_shipped_sole2_matches_builder(sole2):
    assert shipped_text("sole2") == A.dump(sole2.automaton)


# --- past-closed invariants ------------------------------------------------------

@pytest.mark.parametrize("inv", ["x >= 3", "x > 1", "x = 2", "x <= 2 & y >= 1", "x - y <= 1"])
def test_invariant_must_be_past_closed(inv):
    assert "past-closed" in diagnostics(model(inv=inv))


@pytest.mark.parametrize("inv", ["x <= 2", "x < 3 & y <= 4", "true"])
def test_past_closed_invariants_accepted(inv):
    A.load(model(inv=inv))


_atoms = st.tuples(st.sampled_from(["x", "y"]), st.sampled_from(["<", "<=", "=", ">=", ">"]), st.integers(0, 9))


@given(st.lists(_atoms, min_size=1, max_size=4))
def test_past_closed_is_exactly_upper_bounds(atoms):
    inv = " & ".join(f"{c} {op} {n}" for c, op, n in atoms)
    ok = all(op in ("<", "<=") for _, op, _ in atoms)
    if ok:
        A.load(model(inv=inv))
    else:
        assert "past-closed" in diagnostics(model(inv=inv))


# --- distributions -------------------------------------------------------------------

@pytest.mark.parametrize("p, q, ok", [
    ("0.5", "0.5", True),
    ("0.5", "0.4", False),
    ("0.5", "0.5000000005", True),
    ("0.5", "0.500000002", False),
    ("1/3", "2/3", True),
])
def test_distribution_must_sum_to_one(p, q, ok):
    text = model(outcomes=f"    {p}: a, {{}}, reset{{x}}, -> l1\n    {q}: ε, {{}}, reset{{}}, -> l0")
    if ok:
        A.load(text)
    else:
        assert "sum" in diagnostics(text)


@pytest.mark.parametrize("p", ["0", "1.5", "-0.5"])
def test_probability_range(p):
    text = model(outcomes=f"    {p}: a, {{}}, reset{{x}}, -> l1\n    1: ε, {{}}, reset{{}}, -> l0")
    diagnostics(text)


# --- assignments and names -----------------------------------------------------------

def test_duplicate_assignment_rejected():
    text = model(outcomes="    1: a, {v <- 1, v <- 2}, reset{x}, -> l1")
    assert "more than once" in diagnostics(text)


def test_type_mismatch_rejected():
    text = model(outcomes="    1: a, {b <- 3}, reset{x}, -> l1")
    diagnostics(text)


def test_unknown_target_and_clock_rejected():
    assert "nowhere" in diagnostics(model(outcomes="    1: a, {}, reset{x}, -> nowhere"))
    diagnostics(model(outcomes="    1: a, {}, reset{z}, -> l1"))


def test_global_clock_is_reserved():
    text = model().replace("clocks x, y", "clocks x, t")
    assert "reserved" in diagnostics(text)


def test_stop_location_is_reserved():
    text = model().replace("  l1\n", "  stop\n").replace("-> l1", "-> stop")
    assert "reserved" in diagnostics(text)


def test_init_value_out_of_range():
    text = model().replace("= 0\n", "= 9\n")
    diagnostics(text)


def test_undeclared_variable_in_guard():
    diagnostics(model(guard="x >= 1 & q"))


def test_negative_max_time_rejected():
    diagnostics(model().replace("max_time 4", "max_time -1"))


def test_diagnostics_are_collected():
    text = model(inv="x >= 3", outcomes="    0.5: a, {v <- 1, v <- 2}, reset{x}, -> l1")
    assert len(diagnostics(text).split(" | ")) >= 3


def test_tables_in_file():
    text = """\
name tab
ints
  v in [0, 9] = 1
tables
  f[0..2] = 0.1 1/4 0.73
  g[0..1][0..2] =
    1 2 3
    4 5 6
locations
  l0
init l0
max_time 2
edges
  edge l0 guard: f(v) * 4 = 1
    1: a, {v <- g(1, v + 1)}, reset{}, -> l0
"""
    a = A.load(text)
    assert a.tables["f"](2) == Fraction(73, 100)
    assert a.tables["g"](1, 2) == 6
    assert A.canonical_form(A.load(A.dump(a))) == A.canonical_form(a)
