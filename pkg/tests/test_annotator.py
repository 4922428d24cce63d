"""
Tests for time and need annotation of statements.
"""

import pytest
from hypothesis import given, settings

from conftest import first_stmt, programs, scalars
from lazytime.annotator import annotate, annotate_statements, eager_annotate, syntactic_needs
from lazytime.astcore import Assign, If, Loc, NeedState, Ok, Seq, Universe, Var, iter_exprs
from lazytime.errors import NotLoopFree, UniverseMismatch, UnknownSpecName, UnsupportedConstruct
from lazytime.parser import parse_predicate, parse_program
from lazytime.predicate import Domain, normalize, render
from lazytime.refine import EXHAUSTIVE, SAMPLED, check_refinement

XY = scalars("x", "y")
ARRAY_X = Universe(frozenset({"y"}), frozenset({"x"}), 2)


def assert_same(stmt_text, universe, expected):
    pred = annotate(first_stmt(stmt_text), universe=universe).pred
    assert normalize(pred) == normalize(parse_predicate(expected)), render(pred)


def assert_equivalent(a, b, d, mode=EXHAUSTIVE, universe=None, samples=400):
    forward = check_refinement(a, b, d, mode, samples=samples, universe=universe)
    backward = check_refinement(b, a, d, mode, samples=samples, universe=universe)
    assert forward.holds, forward.counterexample
    assert backward.holds, backward.counterexample


# ---------------------------------------------------------------------------
# Single statements
# ---------------------------------------------------------------------------

def test_ok():
    assert_same("ok", XY, "x' = x /\\ y' = y /\\ t' = t /\\ need x = need x' /\\ need y = need y'")


def test_assign_constant():
    assert_same("x := 3", XY,
                "x' = 3 /\\ y' = y /\\ t' = t + if need x' then 1 else 0 fi"
                " /\\ ~need x /\\ need y = need y'")


def test_assign_reads_both():
    assert_same("x := x + y", XY,
                "x' = x + y /\\ y' = y /\\ t' = t + if need x' then 1 else 0 fi"
                " /\\ need x = need x' /\\ need y = (need x' \\/ need y')")


def test_cell_assign_constant():
    assert_same("x(0) := 2", ARRAY_X,
                "x'(0) = 2 /\\ x'(1) = x(1) /\\ y' = y /\\ t' = t + if need x'(0) then 1 else 0 fi"
                " /\\ ~need x(0) /\\ need x(1) = need x'(1) /\\ need y = need y'")


def test_cell_assign_from_other_cell():
    assert_same("x(0) := x(1)", ARRAY_X,
                "x'(0) = x(1) /\\ x'(1) = x(1) /\\ y' = y /\\ t' = t + if need x'(0) then 1 else 0 fi"
                " /\\ ~need x(0) /\\ need x(1) = (need x'(0) \\/ need x'(1)) /\\ need y = need y'")


def test_cell_assign_from_scalar():
    assert_same("x(0) := y", ARRAY_X,
                "x'(0) = y /\\ x'(1) = x(1) /\\ y' = y /\\ t' = t + if need x'(0) then 1 else 0 fi"
                " /\\ ~need x(0) /\\ need x(1) = need x'(1) /\\ need y = (need x'(0) \\/ need y')")


def test_stop_needs_nothing():
    pred = annotate(parse_program("stop"), universe=XY).pred
    expected = parse_predicate("x' = x /\\ y' = y /\\ t' = t /\\ ~need x /\\ ~need y")
    assert normalize(pred) == normalize(expected)


def test_print_needs_its_argument():
    pred = annotate(first_stmt("print y"), universe=XY).pred
    expected = parse_predicate("x' = x /\\ y' = y /\\ t' = t + 1 /\\ need x = need x' /\\ need y")
    assert normalize(pred) == normalize(expected)


def test_eager_assignment_always_costs_one():
    pred = eager_annotate(first_stmt("x := 3"), universe=XY).pred
    assert normalize(pred) == normalize(parse_predicate("x' = 3 /\\ y' = y /\\ t' = t + 1"))


# ---------------------------------------------------------------------------
# Conditionals
# ---------------------------------------------------------------------------

CONDITIONAL = "if x = 0 then y := 0 else x := 0 fi"


def test_conditional_shape():
    assert_same(CONDITIONAL, XY,
                "x' = if x = 0 then x else 0 fi /\\ y' = if x = 0 then 0 else y fi"
                " /\\ t' = t + if x = 0 then if need y' then 1 else 0 fi"
                " else if need x' then 1 else 0 fi fi"
                " /\\ need x = (need x' \\/ need y') /\\ need y = need y'")


def test_conditional_timing_matches_guarded_form():
    ours = annotate(first_stmt(CONDITIONAL), universe=XY).pred
    guarded = parse_predicate(
        "x' = if x = 0 then x else 0 fi /\\ y' = if x = 0 then 0 else y fi"
        " /\\ t' = t + if x = 0 /\\ need y' then 1 else if x != 0 /\\ need x' then 1 else 0 fi fi"
        " /\\ need x = (need x' \\/ need y') /\\ need y = need y'"
    )
    assert_equivalent(ours, guarded, Domain(scalar_values=(0, 1)), universe=XY)


def test_one_armed_conditional_keeps_value():
    pred = annotate(first_stmt("if y < 2 then x := 1 fi"), universe=XY).pred
    expected = parse_predicate(
        "x' = if y < 2 then 1 else x fi /\\ y' = y"
        " /\\ t' = t + if y < 2 then if need x' then 1 else 0 fi else 0 fi"
        " /\\ need x = need x' /\\ need y = (need x' \\/ need y')"
    )
    assert normalize(pred) == normalize(expected)


def test_print_inside_conditional_is_rejected():
    with pytest.raises(UnsupportedConstruct):
        annotate(first_stmt("if x = 0 then print x else ok fi"), universe=XY)


def test_computed_index_write_inside_conditional_is_rejected():
    with pytest.raises(UnsupportedConstruct):
        annotate(first_stmt("if y = 0 then x(y) := 1 else ok fi"), universe=ARRAY_X)


# ---------------------------------------------------------------------------
# Loop bodies and whole programs
# ---------------------------------------------------------------------------

FAC_UNIVERSE = Universe(frozenset({"i"}), frozenset({"fac"}), 4)


def test_factorial_body_write_matches_cellwise_needs():
    ours = annotate(first_stmt("fac(i) := fac(i - 1) * i"), universe=FAC_UNIVERSE).pred
    cellwise = parse_predicate(
        "i' = i /\\ fac'(i) = fac(i - 1) * i"
        " /\\ (forall j: 0..inf . j != i ==> fac'(j) = fac(j))"
        " /\\ t' = t + if need fac'(i) then 1 else 0 fi"
        " /\\ need i = (need i' \\/ need fac'(i))"
        " /\\ (forall j: 0..i - 2 . need fac(j) = need fac'(j))"
        " /\\ need fac(i - 1) = (need fac'(i) \\/ need fac'(i - 1))"
        " /\\ ~need fac(i)"
        " /\\ (forall j: i + 1..inf . need fac(j) = need fac'(j))"
    )
    d = Domain(array_bound=4, scalar_values=(0, 1, 2, 3))
    assert_equivalent(ours, cellwise, d, mode=SAMPLED, universe=FAC_UNIVERSE)


def test_increment_keeps_array():
    pred = annotate(first_stmt("i := i + 1"), universe=FAC_UNIVERSE).pred
    expected = parse_predicate(
        "i' = i + 1 /\\ (forall j: 0..inf . fac'(j) = fac(j))"
        " /\\ t' = t + if need i' then 1 else 0 fi"
        " /\\ need i = need i' /\\ (forall j: 0..inf . need fac(j) = need fac'(j))"
    )
    assert normalize(pred) == normalize(expected)


def test_loop_yields_obligation(factorial3, loop_spec):
    annotation = annotate(factorial3, loop_spec)
    assert annotation.pred is not None
    assert len(annotation.obligations) == 1
    obligation = annotation.obligations[0]
    assert obligation.label == "loop <= body; loop"
    assert obligation.lhs == loop_spec["loop"]
    assert obligation.origin is not None


def test_inferred_universe_includes_spec_variables(factorial3, loop_spec):
    annotation = annotate(factorial3, loop_spec, array_bound=5)
    assert annotation.universe.scalars == {"i"}
    assert annotation.universe.arrays == {"fac"}
    assert annotation.universe.array_bound == 5


def test_unknown_spec_name():
    program = parse_program("while true spec missing do ok od; stop")
    with pytest.raises(UnknownSpecName):
        annotate(program, {})


def test_universe_mismatch():
    with pytest.raises(UniverseMismatch):
        annotate(first_stmt("z := 1"), universe=XY)
    with pytest.raises(UniverseMismatch):
        annotate(first_stmt("x(5) := 1"), universe=ARRAY_X)


def test_annotate_statements_one_entry_per_statement(intro):
    pairs = annotate_statements(intro, {}, scalars("x", "y"))
    assert [type(stmt).__name__ for stmt, _ in pairs] == ["Assign", "Assign", "Print", "Stop"]


# ---------------------------------------------------------------------------
# Syntactic needs
# ---------------------------------------------------------------------------

def test_syntactic_needs_intro(intro):
    universe = scalars("x", "y")
    needs = syntactic_needs(intro, NeedState.constant(universe, False), universe)
    assert needs.scalars == {"x": False, "y": False}


def test_syntactic_needs_follow_reads():
    universe = scalars("x", "y")
    stmt = parse_program("x := y + 1; print x; stop")
    needs = syntactic_needs(stmt, NeedState.constant(universe, False), universe)
    assert needs.needed() == [Loc("y")]


def test_syntactic_needs_rejects_loops(factorial3):
    with pytest.raises(NotLoopFree):
        syntactic_needs(factorial3, NeedState(scalars={}, arrays={}))


def _reads(expr):
    return {e.name for e in iter_exprs(expr) if isinstance(e, Var)}


def _targets(stmt):
    if isinstance(stmt, Assign):
        return {stmt.target.name}
    if isinstance(stmt, Seq):
        return _targets(stmt.first) | _targets(stmt.second)
    if isinstance(stmt, If):
        return _targets(stmt.then) | _targets(stmt.orelse)
    return set()


def live_before(stmt, live):
    """Backward strong liveness; a condition is live only if its conditional writes something live."""
    if isinstance(stmt, Ok):
        return set(live)
    if isinstance(stmt, Assign):
        name = stmt.target.name
        if name not in live:
            return set(live)
        return (set(live) - {name}) | _reads(stmt.rhs)
    if isinstance(stmt, Seq):
        return live_before(stmt.first, live_before(stmt.second, live))
    if isinstance(stmt, If):
        result = live_before(stmt.then, live) | live_before(stmt.orelse, live)
        if _targets(stmt) & set(live):
            result |= _reads(stmt.cond)
        return result
    raise AssertionError(f"unexpected statement {stmt!r}")


@settings(max_examples=1000, deadline=None)
@given(programs())
def test_syntactic_needs_match_liveness(program):
    body, rest = program.first, program.second
    shown = rest.first.arg.name
    universe = scalars("x", "y", "z", bound=1)
    needs = syntactic_needs(program, NeedState.constant(universe, False), universe)
    assert {loc.name for loc in needs.needed()} == live_before(body, {shown})
