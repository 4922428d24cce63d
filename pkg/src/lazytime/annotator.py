"""
Translation of statements into predicates with time and need variables.

Every statement becomes a conjunction of result equations (final values as
functions of initial values), a timing equation ``t' = t + cost`` and, in lazy
mode, need equations that give the need for each initial value as a function
of the needs for final values.  An initial value is needed exactly when it
occurs in the right side of a result equation whose final value is needed.

Loops are not annotated automatically: a while loop stands for the named
specification it carries, and produces the obligation that the specification
is refined by one iteration followed by the specification.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Set, Tuple

from . import config
from .astcore import (
    Assign,
    If,
    IntLit,
    Loc,
    NeedState,
    Ok,
    Print,
    Scalar,
    Seq,
    SourceSpan,
    Stmt,
    Stop,
    Universe,
    While,
    flatten_seq,
    is_loop_free,
    state_from_items,
    universe_of,
)
from .errors import NotApplicable, NotLoopFree, UniverseMismatch, UnknownSpecName, UnsupportedConstruct
from .predicate import (
    TIME,
    Cmp,
    Compose,
    Cond,
    Const,
    Domain,
    Forall,
    Frame,
    Implies,
    Not,
    Pred,
    Ref,
    compose,
    conj,
    disj,
    eq,
    from_expr,
    ite,
    need_equation,
    one_point_compose,
    plus,
    signature,
    solve,
    walk,
)

logger = logging.getLogger(__name__)

ZERO_COST = Const(0)
UNIT_COST = Const(1)


@dataclass
class RefinementObligation:
    """spec <= rhs, where rhs is the annotated loop body composed with the spec."""
    lhs: Pred
    rhs: Pred
    origin: Optional[SourceSpan] = None
    label: str = ""


@dataclass
class Annotation:
    stmt: Stmt
    pred: Pred
    obligations: List[RefinementObligation] = field(default_factory=list)
    universe: Optional[Universe] = None


# ---------------------------------------------------------------------------
# Terms over locations
# ---------------------------------------------------------------------------

def _pre(loc: Loc) -> Ref:
    index = None if loc.index is None else Const(loc.index)
    return Ref(loc.name, index=index)


def _post(loc: Loc) -> Ref:
    index = None if loc.index is None else Const(loc.index)
    return Ref(loc.name, primed=True, index=index)


def _need_pre(loc: Loc) -> Ref:
    index = None if loc.index is None else Const(loc.index)
    return Ref(loc.name, need=True, index=index)


def _need_post(loc: Loc) -> Ref:
    index = None if loc.index is None else Const(loc.index)
    return Ref(loc.name, primed=True, need=True, index=index)


Read = Tuple[str, Optional[Pred]]


def term_reads(p: Pred) -> FrozenSet[Read]:
    """Unprimed store references of a term: (name, None) or (array, index term)."""
    reads: Set[Read] = set()
    for node in walk(p):
        if isinstance(node, Ref) and not node.primed and not node.need and node.name != TIME.name:
            reads.add((node.name, node.index))
    return frozenset(reads)


def _literal(index: Pred) -> Optional[int]:
    if isinstance(index, Const) and isinstance(index.value, int) and not isinstance(index.value, bool):
        return index.value
    return None


def substitute(p: Pred, env: Mapping[Loc, Pred]) -> Pred:
    """Replace unprimed store references by their symbolic values in env."""
    if not env:
        return p
    if isinstance(p, Ref):
        if p.primed or p.need or p.name == TIME.name:
            return p
        if p.index is None:
            return env.get(Loc(p.name), p)
        index = substitute(p.index, env)
        k = _literal(index)
        if k is not None:
            return env.get(Loc(p.name, k), Ref(p.name, index=index))
        if any(loc.name == p.name and loc.index is not None for loc in env):
            raise UnsupportedConstruct(
                f"array {p.name} is read at a computed index after a write in the same conditional"
            )
        return Ref(p.name, index=index)
    if isinstance(p, Const):
        return p
    fields = {}
    for name, value in vars(p).items():
        if isinstance(value, tuple):
            fields[name] = tuple(substitute(part, env) for part in value)
        elif name in ("op", "var", "pinned") or value is None:
            fields[name] = value
        else:
            fields[name] = substitute(value, env)
    return type(p)(**fields)


def _read_contributions(target: Loc, reads: FrozenSet[Read], need: Pred,
                        env: Mapping[Loc, Pred]) -> List[Pred]:
    """Need terms that reading `reads` contributes to the location `target`."""
    if target.index is None:
        return [need] if (target.name, None) in reads else []
    result = []
    for name, index in reads:
        if name != target.name or index is None:
            continue
        index = substitute(index, env)
        k = _literal(index)
        if k is None:
            result.append(conj(eq(index, Const(target.index)), need))
        elif k == target.index:
            result.append(need)
    return result


# ---------------------------------------------------------------------------
# Symbolic execution of loop-free conditional branches
# ---------------------------------------------------------------------------

def _literal_target(stmt: Assign, universe: Universe) -> Optional[Loc]:
    target = stmt.target
    if isinstance(target, Scalar):
        return Loc(target.name)
    if isinstance(target.index, IntLit):
        k = target.index.value
        if not 0 <= k < universe.array_bound:
            raise UniverseMismatch(
                f"{target.name}({k}) is outside the modeled prefix of length {universe.array_bound}"
            )
        return Loc(target.name, k)
    return None


def _branch_target(stmt: Assign, universe: Universe) -> Loc:
    loc = _literal_target(stmt, universe)
    if loc is None:
        raise UnsupportedConstruct("write at a computed index inside a conditional")
    return loc


def _symbolic(stmt: Stmt, env: Dict[Loc, Pred], universe: Universe) -> Dict[Loc, Pred]:
    """Forward symbolic state after stmt, as terms over the state at the conditional."""
    if isinstance(stmt, Ok):
        return env
    if isinstance(stmt, Assign):
        loc = _branch_target(stmt, universe)
        result = dict(env)
        result[loc] = substitute(from_expr(stmt.rhs), env)
        return result
    if isinstance(stmt, Seq):
        return _symbolic(stmt.second, _symbolic(stmt.first, env, universe), universe)
    if isinstance(stmt, If):
        then = _symbolic(stmt.then, env, universe)
        orelse = _symbolic(stmt.orelse, env, universe)
        cond = substitute(from_expr(stmt.cond), env)
        result = dict(env)
        for loc in _assigned(stmt, universe):
            current = env.get(loc, _pre(loc))
            result[loc] = Cond(cond, then.get(loc, current), orelse.get(loc, current))
        return result
    raise UnsupportedConstruct(f"{type(stmt).__name__.lower()} inside a conditional")


def _assigned(stmt: Stmt, universe: Universe) -> Set[Loc]:
    if isinstance(stmt, Assign):
        return {_branch_target(stmt, universe)}
    if isinstance(stmt, Seq):
        return _assigned(stmt.first, universe) | _assigned(stmt.second, universe)
    if isinstance(stmt, If):
        return _assigned(stmt.then, universe) | _assigned(stmt.orelse, universe)
    if isinstance(stmt, Ok):
        return set()
    raise UnsupportedConstruct(f"{type(stmt).__name__.lower()} inside a conditional")


def _branch_cost(stmt: Stmt, env: Dict[Loc, Pred], after: Dict[Loc, Pred],
                 universe: Universe, lazy: bool) -> Tuple[Pred, Dict[Loc, Pred]]:
    """
    Cost of a branch and the need for each tracked location before it.

    Args:
        stmt: Loop-free statement inside a conditional
        env: Symbolic state before stmt
        after: Need term of every tracked location after stmt
        universe: Variables in scope
        lazy: Count only assignments whose target is needed

    Returns:
        (cost term, need terms before stmt)
    """
    if isinstance(stmt, Ok):
        return ZERO_COST, after
    if isinstance(stmt, Seq):
        middle = _symbolic(stmt.first, env, universe)
        second_cost, mid_needs = _branch_cost(stmt.second, middle, after, universe, lazy)
        first_cost, before = _branch_cost(stmt.first, env, mid_needs, universe, lazy)
        return plus(first_cost, second_cost), before
    if isinstance(stmt, Assign):
        loc = _branch_target(stmt, universe)
        cost = ite(after[loc], UNIT_COST, ZERO_COST) if lazy else UNIT_COST
        reads = term_reads(from_expr(stmt.rhs))
        before = {}
        for target, need in after.items():
            contributions = [] if target == loc else [need]
            contributions += _read_contributions(target, reads, after[loc], env)
            before[target] = disj(*contributions)
        return cost, before
    if isinstance(stmt, If):
        cond = from_expr(stmt.cond)
        then_cost, _ = _branch_cost(stmt.then, env, after, universe, lazy)
        else_cost, _ = _branch_cost(stmt.orelse, env, after, universe, lazy)
        cost = ite(substitute(cond, env), then_cost, else_cost)
        then_local = _symbolic(stmt.then, {}, universe)
        else_local = _symbolic(stmt.orelse, {}, universe)
        assigned = _assigned(stmt, universe)
        cond_reads = term_reads(cond)
        before = {}
        for target, need in after.items():
            contributions = [] if target in assigned else [need]
            for loc in sorted(assigned):
                reads = (cond_reads | term_reads(then_local.get(loc, _pre(loc)))
                         | term_reads(else_local.get(loc, _pre(loc))))
                contributions += _read_contributions(target, reads, after[loc], env)
            before[target] = disj(*contributions)
        return cost, before
    raise UnsupportedConstruct(f"{type(stmt).__name__.lower()} inside a conditional")


# ---------------------------------------------------------------------------
# Assembly of a single-statement predicate
# ---------------------------------------------------------------------------

@dataclass
class _Effect:
    """What a loop-free statement does to the store, and what it costs."""
    results: Dict[Loc, Pred] = field(default_factory=dict)
    indexed: Optional[Tuple[str, Pred, Pred]] = None  # array, index term, value term
    cost: Pred = ZERO_COST
    printed: Optional[Pred] = None
    stops: bool = False


def _index_var(universe: Universe) -> str:
    taken = universe.scalars | universe.arrays
    for name in ("j", "k", "m", "n"):
        if name not in taken:
            return name
    suffix = 1
    while f"j{suffix}" in taken:
        suffix += 1
    return f"j{suffix}"


def _assemble(effect: _Effect, universe: Universe, lazy: bool) -> Pred:
    j = _index_var(universe)
    J = Ref(j)
    expanded = {loc.name for loc in effect.results if loc.index is not None}
    indexed_array = effect.indexed[0] if effect.indexed else None
    conjuncts: List[Pred] = []

    # results
    for name in sorted(universe.scalars):
        loc = Loc(name)
        conjuncts.append(eq(_post(loc), effect.results.get(loc, _pre(loc))))
    for name in sorted(universe.arrays):
        if name in expanded:
            for k in range(universe.array_bound):
                loc = Loc(name, k)
                conjuncts.append(eq(_post(loc), effect.results.get(loc, _pre(loc))))
        elif name == indexed_array:
            _, index, value = effect.indexed
            conjuncts.append(eq(Ref(name, primed=True, index=index), value))
            conjuncts.append(Forall(j, Const(0), None, Implies(
                Cmp("!=", J, index),
                eq(Ref(name, primed=True, index=J), Ref(name, index=J)),
            )))
        else:
            conjuncts.append(Forall(j, Const(0), None,
                                    eq(Ref(name, primed=True, index=J), Ref(name, index=J))))

    # timing
    conjuncts.append(eq(Ref(TIME.name, primed=True), plus(Ref(TIME.name), effect.cost)))

    if not lazy:
        return conj(*conjuncts)

    # needs, by the occurrence rule
    if effect.stops:
        for name in sorted(universe.scalars):
            conjuncts.append(Not(_need_pre(Loc(name))))
        for name in sorted(universe.arrays):
            conjuncts.append(Forall(j, Const(0), None, Not(Ref(name, need=True, index=J))))
        return conj(*conjuncts)

    items: List[Tuple[Pred, FrozenSet[Read]]] = []
    for loc in sorted(effect.results):
        items.append((_need_post(loc), term_reads(effect.results[loc])))
    if effect.indexed:
        name, index, value = effect.indexed
        items.append((Ref(name, primed=True, need=True, index=index),
                      term_reads(value) | term_reads(index)))
    if effect.printed is not None:
        items.append((Const(True), term_reads(effect.printed)))
    frames: List[Tuple[Pred, FrozenSet[Read]]] = []
    for name in sorted(universe.scalars):
        if Loc(name) not in effect.results:
            frames.append((_need_post(Loc(name)), frozenset({(name, None)})))
    for name in sorted(expanded):
        for k in range(universe.array_bound):
            if Loc(name, k) not in effect.results:
                frames.append((_need_post(Loc(name, k)), frozenset({(name, Const(k))})))

    for name in sorted(universe.scalars):
        loc = Loc(name)
        contributions = []
        for need, reads in items + frames:
            contributions += _read_contributions(loc, reads, need, {})
        conjuncts.append(need_equation(_need_pre(loc), contributions))
    for name in sorted(universe.arrays):
        if name in expanded:
            for k in range(universe.array_bound):
                loc = Loc(name, k)
                contributions = []
                for need, reads in items + frames:
                    contributions += _read_contributions(loc, reads, need, {})
                conjuncts.append(need_equation(_need_pre(loc), contributions))
            continue
        frame_need = Ref(name, primed=True, need=True, index=J)
        if name == indexed_array:
            contributions = [conj(Cmp("!=", J, effect.indexed[1]), frame_need)]
        else:
            contributions = [frame_need]
        for need, reads in items:
            for array, index in sorted(reads, key=lambda r: (r[0], str(r[1]))):
                if array == name and index is not None:
                    contributions.append(conj(eq(J, index), need))
        conjuncts.append(Forall(j, Const(0), None,
                                need_equation(Ref(name, need=True, index=J), contributions)))
    return conj(*conjuncts)


def _effect(stmt: Stmt, universe: Universe, lazy: bool) -> _Effect:
    if isinstance(stmt, Ok):
        return _Effect()
    if isinstance(stmt, Stop):
        return _Effect(stops=True)
    if isinstance(stmt, Print):
        return _Effect(cost=UNIT_COST, printed=from_expr(stmt.arg))
    if isinstance(stmt, Assign):
        loc = _literal_target(stmt, universe)
        value = from_expr(stmt.rhs)
        if loc is not None:
            cost = ite(_need_post(loc), UNIT_COST, ZERO_COST) if lazy else UNIT_COST
            return _Effect(results={loc: value}, cost=cost)
        index = from_expr(stmt.target.index)
        name = stmt.target.name
        need = Ref(name, primed=True, need=True, index=index)
        cost = ite(need, UNIT_COST, ZERO_COST) if lazy else UNIT_COST
        return _Effect(indexed=(name, index, value), cost=cost)
    if isinstance(stmt, If):
        cond = from_expr(stmt.cond)
        then = _symbolic(stmt.then, {}, universe)
        orelse = _symbolic(stmt.orelse, {}, universe)
        assigned = _assigned(stmt, universe)
        results = {
            loc: Cond(cond, then.get(loc, _pre(loc)), orelse.get(loc, _pre(loc)))
            for loc in assigned
        }
        after = {loc: _need_post(loc) for loc in assigned}
        then_cost, _ = _branch_cost(stmt.then, {}, after, universe, lazy)
        else_cost, _ = _branch_cost(stmt.orelse, {}, after, universe, lazy)
        return _Effect(results=results, cost=ite(cond, then_cost, else_cost))
    raise UnsupportedConstruct(f"cannot annotate {type(stmt).__name__}")


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def check_universe(stmt: Stmt, specs: Mapping[str, Pred], universe: Universe):
    """Raise UniverseMismatch if stmt or a spec it uses mentions variables outside universe."""
    used = universe_of(stmt, universe.array_bound)
    scalars, arrays = set(used.scalars), set(used.arrays)
    for node in _loops(stmt):
        if node.spec_name in specs:
            sig = signature(specs[node.spec_name])
            scalars |= sig.scalars
            arrays |= sig.arrays
    problems = []
    if scalars - universe.scalars:
        problems.append("scalars " + ", ".join(sorted(scalars - universe.scalars)))
    if arrays - universe.arrays:
        problems.append("arrays " + ", ".join(sorted(arrays - universe.arrays)))
    if problems:
        raise UniverseMismatch("not in the variable universe: " + "; ".join(problems))


def _loops(stmt: Stmt) -> List[While]:
    if isinstance(stmt, While):
        return [stmt] + _loops(stmt.body)
    if isinstance(stmt, Seq):
        return _loops(stmt.first) + _loops(stmt.second)
    if isinstance(stmt, If):
        return _loops(stmt.then) + _loops(stmt.orelse)
    return []


def infer_universe(stmt: Stmt, specs: Mapping[str, Pred], array_bound: int) -> Universe:
    """Variables of the program plus those of the loop specifications it uses."""
    universe = universe_of(stmt, array_bound)
    for node in _loops(stmt):
        if node.spec_name in specs:
            sig = signature(specs[node.spec_name])
            universe = universe.merge(Universe(sig.scalars, sig.arrays, array_bound))
    return universe


def _compose(first: Pred, second: Pred) -> Pred:
    try:
        return one_point_compose(first, second)
    except NotApplicable:
        return compose(first, second, pin=True)


def _translate(stmt: Stmt, specs: Mapping[str, Pred], universe: Universe,
               lazy: bool, obligations: List[RefinementObligation]) -> Pred:
    if isinstance(stmt, Seq):
        first = _translate(stmt.first, specs, universe, lazy, obligations)
        second = _translate(stmt.second, specs, universe, lazy, obligations)
        return _compose(first, second)
    if isinstance(stmt, While):
        if stmt.spec_name is None or stmt.spec_name not in specs:
            raise UnknownSpecName(stmt.spec_name)
        spec = specs[stmt.spec_name]
        body = _translate(stmt.body, specs, universe, lazy, obligations)
        obligations.append(RefinementObligation(
            lhs=spec,
            rhs=Compose(body, spec, pinned=True),
            origin=stmt.span,
            label=f"{stmt.spec_name} <= body; {stmt.spec_name}",
        ))
        return spec
    return _assemble(_effect(stmt, universe, lazy), universe, lazy)


def annotate(s: Stmt, specs: Optional[Mapping[str, Pred]] = None,
             universe: Optional[Universe] = None, lazy: bool = True,
             array_bound: int = config.DEFAULT_ARRAY_BOUND) -> Annotation:
    """
    Predicate with time and need variables for a statement.

    Args:
        s: Statement or whole program
        specs: Loop specifications by name
        universe: Variables in scope (inferred from s and specs if omitted)
        lazy: Add need variables and charge assignments only when needed
        array_bound: Prefix length used when the universe is inferred

    Returns:
        Annotation with the predicate and one obligation per while loop

    Raises:
        UnknownSpecName: a loop names no known specification
        UniverseMismatch: s uses variables outside universe
        UnsupportedConstruct: a conditional contains a loop, print or computed-index write
    """
    specs = specs or {}
    if universe is None:
        universe = infer_universe(s, specs, array_bound)
    check_universe(s, specs, universe)
    obligations: List[RefinementObligation] = []
    pred = _translate(s, specs, universe, lazy, obligations)
    logger.debug("annotated %s with %d obligation(s)", type(s).__name__, len(obligations))
    return Annotation(s, pred, obligations, universe)


def eager_annotate(s: Stmt, specs: Optional[Mapping[str, Pred]] = None,
                   universe: Optional[Universe] = None,
                   array_bound: int = config.DEFAULT_ARRAY_BOUND) -> Annotation:
    """Eager semantics: no need variables, every assignment and print costs 1."""
    return annotate(s, specs, universe, lazy=False, array_bound=array_bound)


def annotate_statements(program: Stmt, specs: Mapping[str, Pred], universe: Universe,
                        lazy: bool = True) -> List[Tuple[Stmt, Pred]]:
    """Predicate of each top-level statement of a program, in order."""
    return [
        (stmt, annotate(stmt, specs, universe, lazy).pred)
        for stmt in flatten_seq(program)
    ]


def syntactic_needs(s: Stmt, post_need: NeedState, universe: Optional[Universe] = None,
                    state=None) -> NeedState:
    """
    Needs for initial values given the needs for final values.

    Solves the need equations of annotate(s); computed indices are resolved
    against `state` (all zeros if omitted).

    Raises:
        NotLoopFree: s contains a while loop
    """
    if not is_loop_free(s):
        raise NotLoopFree("syntactic needs are defined for loop-free statements only")
    if universe is None:
        bound = max((len(cells) for cells in post_need.arrays.values()), default=1)
        universe = Universe(frozenset(post_need.scalars), frozenset(post_need.arrays), bound)
    pred = annotate(s, {}, universe).pred
    frame = Frame.empty(universe, Domain(array_bound=universe.array_bound))
    if state is None:
        state = state_from_items(universe, {})
    frame.pre.update(state.items())
    frame.pre[TIME] = state.time
    frame.post_need.update(post_need.items())
    solve(pred, frame)
    return NeedState(
        {name: frame.pre_need[Loc(name)] for name in universe.scalars},
        {name: tuple(frame.pre_need[Loc(name, k)] for k in range(universe.array_bound))
         for name in universe.arrays},
    )
