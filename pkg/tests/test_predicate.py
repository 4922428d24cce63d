"""
Tests for predicate evaluation, composition and rendering.
"""

import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from conftest import first_stmt, scalars
from lazytime.annotator import annotate
from lazytime.astcore import (
    ZERO, Assign, Binary, ExtNat, If, IntLit, Loc, NeedState, Ok, Scalar, State, Universe, Var,
)
from lazytime.errors import EvaluationError, NotApplicable, UndefinedMax
from lazytime.parser import parse_predicate
from lazytime.predicate import (
    FALSE, INF, TIME, TRUE, And, Arith, Binding, Cmp, Compose, Cond, Const, Domain, Fact, Frame,
    Implies, Not, Or, Ref, compose, eval_pred, normalize, one_point_compose, render, signature,
    solve,
)
from lazytime.refine import EXHAUSTIVE, check_refinement

XY = scalars("x", "y")
FAC = Universe(frozenset({"i"}), frozenset({"fac"}), 4)
D4 = Domain(array_bound=4)


def binding(pre, post, time=(ZERO, ZERO), pre_need=(), post_need=(), universe=FAC):
    return Binding(
        State(*pre, time[0]),
        State(*post, time[1]),
        NeedState.from_locations(universe, pre_need),
        NeedState.from_locations(universe, post_need),
    )


def test_quantifier_ranges_stop_at_the_prefix():
    p = parse_predicate("forall j: 0..inf . fac'(j) = fac(j) * 2")
    b = binding(({"i": 0}, {"fac": (1, 2, 3, 4)}), ({"i": 0}, {"fac": (2, 4, 6, 8)}))
    assert eval_pred(p, b, D4)
    other = binding(({"i": 0}, {"fac": (1, 2, 3, 4)}), ({"i": 0}, {"fac": (2, 4, 6, 9)}))
    assert not eval_pred(p, other, D4)


def test_max_and_exists():
    p = parse_predicate("(exists j: i..inf . need fac'(j)) /\\ (max j: i..inf | need fac'(j) . j) = 3")
    b = binding(({"i": 1}, {"fac": (0,) * 4}), ({"i": 1}, {"fac": (0,) * 4}),
                post_need=[Loc("fac", 2), Loc("fac", 3)])
    assert eval_pred(p, b, D4)


def test_max_without_witness_is_undefined():
    p = parse_predicate("(max j: 0..inf | need fac'(j) . j) = 0")
    b = binding(({"i": 0}, {"fac": (0,) * 4}), ({"i": 0}, {"fac": (0,) * 4}))
    with pytest.raises(UndefinedMax):
        eval_pred(p, b, D4)


def test_time_arithmetic_with_infinity():
    p = parse_predicate("t' = t + if need i' then inf else 2 * 3 fi")
    b = binding(({"i": 0}, {"fac": (0,) * 4}), ({"i": 0}, {"fac": (0,) * 4}), (ExtNat(1), ExtNat(7)))
    assert eval_pred(p, b, D4)
    needed = binding(({"i": 0}, {"fac": (0,) * 4}), ({"i": 0}, {"fac": (0,) * 4}), (ExtNat(1), INF),
                     post_need=[Loc("i")])
    assert eval_pred(p, needed, D4)


def test_signature(loop_spec):
    sig = signature(loop_spec["loop"])
    assert sig.scalars == {"i"}
    assert sig.arrays == {"fac"}
    assert sig.uses_time and sig.uses_need
    assert not signature(parse_predicate("forall j: 0..3 . j < 4")).scalars


def test_render_round_trip(loop_spec):
    p = loop_spec["loop"]
    assert parse_predicate(render(p)) == p


def test_normalize_sorts_and_flattens():
    a = parse_predicate("x' = 1 /\\ (y' = 2 /\\ x' = 1) /\\ true")
    b = parse_predicate("y' = 2 /\\ x' = 1")
    assert normalize(a) == normalize(b)
    assert normalize(parse_predicate("x' = 2 + 3")) == parse_predicate("x' = 5")
    assert normalize(parse_predicate("x' = 1 \\/ false \\/ true")) == parse_predicate("true")


def test_solve_pins_assignment_outputs():
    pred = annotate(first_stmt("x := y + 1"), universe=XY).pred
    frame = Frame.empty(XY, Domain())
    frame.pre.update({Loc("x"): 0, Loc("y"): 4, TIME: ZERO})
    frame.post_need.update({Loc("x"): True, Loc("y"): False})
    solve(pred, frame)
    assert frame.post[Loc("x")] == 5
    assert frame.post[Loc("y")] == 4
    assert frame.post[TIME] == 1
    assert frame.pre_need == {Loc("x"): False, Loc("y"): True}


def test_one_point_needs_forward_left_side(loop_spec):
    body = annotate(first_stmt("x := 1"), universe=XY).pred
    assert isinstance(one_point_compose(body, body), Compose)
    with pytest.raises(NotApplicable):
        one_point_compose(parse_predicate("x' > x /\\ t' = t"), body)
    with pytest.raises(NotApplicable):
        one_point_compose(loop_spec["loop"], loop_spec["loop"])


# ---------------------------------------------------------------------------
# Composition laws over x, y with values {0, 1}
# ---------------------------------------------------------------------------

BITS = Domain(scalar_values=(0, 1), time_samples=(ZERO, INF), time_horizon=2)
BITS_TIMED = Domain(scalar_values=(0, 1), time_samples=(ZERO, ExtNat(1), INF), time_horizon=2)

bit_variables = st.sampled_from(["x", "y"])
bit_values = st.one_of(
    st.sampled_from([IntLit(0), IntLit(1)]),
    bit_variables.map(Var),
    bit_variables.map(lambda name: Binary("-", IntLit(1), Var(name))),
)
bit_assignments = st.builds(Assign, bit_variables.map(Scalar), bit_values)
bit_conditions = st.builds(Binary, st.just("="), bit_variables.map(Var), st.sampled_from([IntLit(0), IntLit(1)]))
bit_statements = bit_assignments | st.just(Ok()) | st.builds(If, bit_conditions, bit_assignments, bit_assignments)


def equivalent(p, q, d):
    forward = check_refinement(p, q, d, EXHAUSTIVE, universe=XY)
    backward = check_refinement(q, p, d, EXHAUSTIVE, universe=XY)
    assert forward.holds, forward.counterexample
    assert backward.holds, backward.counterexample
    assert forward.skipped == backward.skipped == 0


def bits_pred(stmt):
    return annotate(stmt, universe=XY).pred


@pytest.mark.slow
@settings(max_examples=25, deadline=None)
@given(bit_statements, bit_statements)
@example(first_stmt("x := y"), first_stmt("y := 1 - y"))
@example(first_stmt("y := 1 - y"), first_stmt("if x = 0 then y := 1 else y := 0 fi"))
@example(first_stmt("if x = 0 then y := 1 else y := 0 fi"), first_stmt("x := y"))
def test_search_and_one_point_composition_agree(first, second):
    a, b = bits_pred(first), bits_pred(second)
    equivalent(compose(a, b, BITS), one_point_compose(a, b), BITS)


def test_composition_is_associative():
    a = bits_pred(first_stmt("x := 1 - y"))
    b = bits_pred(first_stmt("if x = 1 then y := x else y := 0 fi"))
    c = bits_pred(first_stmt("x := y"))
    left = compose(compose(a, b, pin=True), c, pin=True)
    right = compose(a, compose(b, c, pin=True), pin=True)
    equivalent(left, right, BITS_TIMED)


def test_ok_is_identity_of_composition():
    ok = bits_pred(Ok())
    a = bits_pred(first_stmt("if y = 0 then x := 1 else x := y fi"))
    equivalent(compose(ok, a, BITS), a, BITS)
    equivalent(compose(a, ok, BITS), a, BITS)
    equivalent(compose(ok, ok, BITS), ok, BITS)


# ---------------------------------------------------------------------------
# Normalization preserves truth
# ---------------------------------------------------------------------------

refs = st.sampled_from([Ref("x"), Ref("y"), Ref("x", primed=True), Ref("y", primed=True)])
leaves = refs | st.integers(min_value=0, max_value=2).map(Const)
# factorial operands stay small: a difference of two leaves, possibly negative
factorials = st.builds(Fact, leaves | st.builds(Arith, st.just("-"), leaves, leaves))
terms = st.recursive(
    leaves | factorials,
    lambda inner: st.builds(Arith, st.sampled_from(["+", "-", "*", "/"]), inner, inner),
    max_leaves=4,
)
atoms = st.builds(Cmp, st.sampled_from(["=", "<", "!="]), terms, terms) | st.sampled_from([TRUE, FALSE])
formulas = st.recursive(
    atoms,
    lambda inner: (
        st.builds(Not, inner)
        | st.lists(inner, min_size=2, max_size=3).map(lambda parts: And(tuple(parts)))
        | st.lists(inner, min_size=2, max_size=3).map(lambda parts: Or(tuple(parts)))
        | st.builds(Implies, inner, inner)
        | st.builds(Cond, atoms, inner, inner)
    ),
    max_leaves=8,
)
small_ints = st.integers(min_value=0, max_value=2)


def outcome(p, b):
    try:
        return eval_pred(p, b, BITS)
    except EvaluationError:
        return "error"


def test_false_conjunct_decides_over_an_undefined_one():
    b = binding(({"x": 0, "y": 0}, {}), ({"x": 0, "y": 0}, {}), universe=XY)
    p = parse_predicate("1 / x' = 0 /\\ y' = 1")
    q = parse_predicate("y' = 1 /\\ 1 / x' = 0")
    assert outcome(p, b) is outcome(q, b) is False
    assert outcome(normalize(p), b) is False
    assert outcome(parse_predicate("1 / x' = 0 \\/ y' = 0"), b) is True
    assert outcome(parse_predicate("1 / x' = 0 /\\ y' = 0"), b) == "error"


@settings(max_examples=1000, deadline=None)
@given(formulas, small_ints, small_ints, small_ints, small_ints)
def test_normalize_preserves_truth(p, x, y, x1, y1):
    b = binding(({"x": x, "y": y}, {}), ({"x": x1, "y": y1}, {}), universe=XY)
    assert outcome(normalize(p), b) == outcome(p, b)
