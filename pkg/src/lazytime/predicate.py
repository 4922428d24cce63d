"""
Specification predicates over pre/post states, time and need variables.

A predicate is evaluated against a Binding (pre state, post state, pre and
post need states) over a finite Domain.  Sequential composition is kept as a
Compose node; evaluating it searches for an intermediate state, pinning every
component that the one-point equations of either side determine and
enumerating the rest.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from . import config
from .astcore import (
    ArrayRef,
    Binary,
    BoolLit,
    ExtNat,
    INF,
    IntLit,
    Loc,
    NeedState,
    State,
    Unary,
    Universe,
    Var,
    ZERO,
    apply_binary,
    apply_unary,
    index_value,
)
from .errors import (
    DomainTooLarge,
    EvaluationError,
    IndexOutOfRange,
    NotApplicable,
    UnboundVariable,
    UndefinedMax,
    ValueTypeError,
)

logger = logging.getLogger(__name__)

TIME = Loc("t")


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: Union[int, bool, ExtNat]


@dataclass(frozen=True)
class Ref:
    """A variable reference: x, x', need x, need x', a(i), need a'(i), t, t', or a bound index."""
    name: str
    primed: bool = False
    need: bool = False
    index: Optional["Pred"] = None


@dataclass(frozen=True)
class Arith:
    op: str  # + - * /
    left: "Pred"
    right: "Pred"


@dataclass(frozen=True)
class Neg:
    operand: "Pred"


@dataclass(frozen=True)
class Fact:
    operand: "Pred"


@dataclass(frozen=True)
class Cond:
    cond: "Pred"
    then: "Pred"
    orelse: "Pred"


@dataclass(frozen=True)
class Max:
    """max var: lo..hi | guard . body  (hi None means the last modeled index)."""
    var: str
    lo: "Pred"
    hi: Optional["Pred"]
    guard: "Pred"
    body: "Pred"


@dataclass(frozen=True)
class Cmp:
    op: str  # = != < <= > >=; '=' doubles as equivalence of binary values
    left: "Pred"
    right: "Pred"


@dataclass(frozen=True)
class Not:
    operand: "Pred"


@dataclass(frozen=True)
class And:
    parts: Tuple["Pred", ...]


@dataclass(frozen=True)
class Or:
    parts: Tuple["Pred", ...]


@dataclass(frozen=True)
class Implies:
    left: "Pred"
    right: "Pred"


@dataclass(frozen=True)
class Forall:
    var: str
    lo: "Pred"
    hi: Optional["Pred"]
    body: "Pred"


@dataclass(frozen=True)
class Exists:
    var: str
    lo: "Pred"
    hi: Optional["Pred"]
    body: "Pred"


@dataclass(frozen=True)
class Compose:
    """Sequential composition A;B with the intermediate state existentially bound."""
    first: "Pred"
    second: "Pred"
    pinned: bool = True


Pred = Union[Const, Ref, Arith, Neg, Fact, Cond, Max, Cmp, Not, And, Or, Implies, Forall, Exists, Compose]

TRUE = Const(True)
FALSE = Const(False)


# Smart constructors used by the annotator

def conj(*parts: Pred) -> Pred:
    flat: List[Pred] = []
    for part in parts:
        if part == TRUE:
            continue
        if part == FALSE:
            return FALSE
        if isinstance(part, And):
            flat.extend(part.parts)
        else:
            flat.append(part)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*parts: Pred) -> Pred:
    flat: List[Pred] = []
    for part in parts:
        if part == FALSE:
            continue
        if part == TRUE:
            return TRUE
        if isinstance(part, Or):
            items = part.parts
        else:
            items = (part,)
        for item in items:
            if item not in flat:
                flat.append(item)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def eq(left: Pred, right: Pred) -> Pred:
    return Cmp("=", left, right)


def ite(cond: Pred, then: Pred, orelse: Pred) -> Pred:
    if cond == TRUE:
        return then
    if cond == FALSE:
        return orelse
    if then == orelse:
        return then
    return Cond(cond, then, orelse)


def need_equation(target: Pred, contributions: Sequence[Pred]) -> Pred:
    """need v = (c1 \\/ c2 ...), or ~need v when nothing contributes."""
    rhs = disj(*contributions)
    if rhs == FALSE:
        return Not(target)
    if rhs == TRUE:
        return target
    return eq(target, rhs)


def plus(left: Pred, right: Pred) -> Pred:
    if right == Const(0):
        return left
    if left == Const(0):
        return right
    return Arith("+", left, right)


def from_expr(e, primed: bool = False) -> Pred:
    """Convert a program expression to a predicate term over (un)primed variables."""
    if isinstance(e, IntLit):
        return Const(e.value)
    if isinstance(e, BoolLit):
        return Const(e.value)
    if isinstance(e, Var):
        return Ref(e.name, primed=primed)
    if isinstance(e, ArrayRef):
        return Ref(e.name, primed=primed, index=from_expr(e.index, primed))
    if isinstance(e, Unary):
        operand = from_expr(e.operand, primed)
        if e.op == "neg":
            return Neg(operand)
        if e.op == "not":
            return Not(operand)
        return Fact(operand)
    if isinstance(e, Binary):
        left = from_expr(e.left, primed)
        right = from_expr(e.right, primed)
        if e.op in ("+", "-", "*", "/"):
            return Arith(e.op, left, right)
        if e.op == "and":
            return And((left, right))
        if e.op == "or":
            return Or((left, right))
        return Cmp(e.op, left, right)
    raise ValueTypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Domains and bindings
# ---------------------------------------------------------------------------

def _default_time_samples() -> Tuple[ExtNat, ...]:
    return tuple(INF if n is None else ExtNat(n) for n in config.DEFAULT_TIME_SAMPLES)


@dataclass(frozen=True)
class Domain:
    """Finite value sets used to enumerate bindings and intermediate states."""
    array_bound: int = config.DEFAULT_ARRAY_BOUND
    scalar_values: Tuple[int, ...] = config.DEFAULT_SCALAR_VALUES
    time_samples: Tuple[ExtNat, ...] = field(default_factory=_default_time_samples)
    enumeration_cap: int = config.DEFAULT_ENUMERATION_CAP
    time_horizon: int = config.TIME_HORIZON

    def __post_init__(self):
        if self.array_bound < 1:
            raise ValueError("array bound must be at least 1")
        if not self.scalar_values:
            raise ValueError("scalar value set must not be empty")
        if ZERO not in self.time_samples or INF not in self.time_samples:
            raise ValueError("time samples must include 0 and inf")

    def with_bound(self, array_bound: int) -> "Domain":
        return Domain(array_bound, self.scalar_values, self.time_samples,
                      self.enumeration_cap, self.time_horizon)


@dataclass(frozen=True)
class Binding:
    """Values for every free variable of a predicate."""
    pre: State
    post: State
    pre_need: NeedState
    post_need: NeedState
    env: Dict[str, int] = field(default_factory=dict)

    @property
    def array_bound(self) -> Optional[int]:
        return self.pre.array_bound

    def to_dict(self) -> dict:
        return {
            "pre": self.pre.to_dict(),
            "post": self.post.to_dict(),
            "preNeed": self.pre_need.to_dict(),
            "postNeed": self.post_need.to_dict(),
        }


# ---------------------------------------------------------------------------
# Evaluation frames
# ---------------------------------------------------------------------------

class _Budget:
    """Counts enumeration steps across one top-level evaluation."""

    def __init__(self, cap: int):
        self.cap = cap
        self.used = 0

    def charge(self, n: int = 1):
        self.used += n
        if self.used > self.cap:
            raise DomainTooLarge(self.used, self.cap, "composition search")


class Frame:
    """
    Mutable view of a (possibly partial) binding.

    Store tables map Loc to integers (TIME maps to an ExtNat); need tables map
    Loc to booleans.  Missing keys are unknown.  Compositions hand their
    operands child frames that share the outer tables and a fresh intermediate.
    """

    __slots__ = ("pre", "post", "pre_need", "post_need", "env", "bound",
                 "store_keys", "need_keys", "domain", "budget", "children")

    def __init__(self, pre, post, pre_need, post_need, env, bound,
                 store_keys, need_keys, domain, budget):
        self.pre = pre
        self.post = post
        self.pre_need = pre_need
        self.post_need = post_need
        self.env = env
        self.bound = bound
        self.store_keys = store_keys
        self.need_keys = need_keys
        self.domain = domain
        self.budget = budget
        self.children = {}

    @staticmethod
    def empty(universe: Universe, domain: "Domain") -> "Frame":
        locs = universe.locations()
        return Frame({}, {}, {}, {}, {}, universe.array_bound,
                     frozenset(locs) | {TIME}, frozenset(locs), domain,
                     _Budget(domain.enumeration_cap))

    @staticmethod
    def from_binding(b: Binding, domain: "Domain") -> "Frame":
        pre = dict(b.pre.items())
        pre[TIME] = b.pre.time
        post = dict(b.post.items())
        post[TIME] = b.post.time
        locs = [loc for loc, _ in b.pre.items()]
        bound = b.array_bound or domain.array_bound
        return Frame(pre, post, dict(b.pre_need.items()), dict(b.post_need.items()),
                     dict(b.env), bound, frozenset(locs) | {TIME}, frozenset(locs),
                     domain, _Budget(domain.enumeration_cap))

    def derive(self, pre, post, pre_need, post_need) -> "Frame":
        return Frame(pre, post, pre_need, post_need, self.env, self.bound,
                     self.store_keys, self.need_keys, self.domain, self.budget)

    def child(self, node: "Compose") -> Tuple["Frame", "Frame"]:
        key = id(node)
        if key not in self.children:
            store, need = {}, {}
            self.children[key] = (
                self.derive(self.pre, store, self.pre_need, need),
                self.derive(store, self.post, need, self.post_need),
            )
        return self.children[key]

    def table(self, ref: Ref) -> dict:
        if ref.need:
            return self.post_need if ref.primed else self.pre_need
        return self.post if ref.primed else self.pre

    def allowed(self, ref: Ref, loc: Loc) -> bool:
        return loc in (self.need_keys if ref.need else self.store_keys)

    def to_binding(self, universe: Universe) -> Binding:
        """Freeze a fully known frame into a Binding (raises UnboundVariable if incomplete)."""
        return Binding(
            _state_from_table(universe, self.pre),
            _state_from_table(universe, self.post),
            _needs_from_table(universe, self.pre_need),
            _needs_from_table(universe, self.post_need),
        )


def _state_from_table(universe: Universe, table: dict) -> State:
    for loc in universe.locations() + [TIME]:
        if loc not in table:
            raise UnboundVariable(str(loc))
    return State(
        {name: table[Loc(name)] for name in universe.scalars},
        {name: tuple(table[Loc(name, k)] for k in range(universe.array_bound))
         for name in universe.arrays},
        table[TIME],
    )


def _needs_from_table(universe: Universe, table: dict) -> NeedState:
    for loc in universe.locations():
        if loc not in table:
            raise UnboundVariable(f"need {loc}")
    return NeedState(
        {name: table[Loc(name)] for name in universe.scalars},
        {name: tuple(table[Loc(name, k)] for k in range(universe.array_bound))
         for name in universe.arrays},
    )


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _is_bound_index(p: Ref, f: Frame) -> bool:
    return p.index is None and not p.primed and not p.need and p.name in f.env


def _ref_loc(p: Ref, f: Frame) -> Loc:
    if p.index is None:
        return Loc(p.name)
    index = index_value(p.name, _eval(p.index, f))
    if index >= f.bound:
        raise IndexOutOfRange(p.name, index, f.bound)
    return Loc(p.name, index)


def _eval_ref(p: Ref, f: Frame):
    if _is_bound_index(p, f):
        return f.env[p.name]
    loc = _ref_loc(p, f)
    try:
        return f.table(p)[loc]
    except KeyError:
        raise UnboundVariable(render(p)) from None


def _range(lo: Pred, hi: Optional[Pred], f: Frame) -> range:
    low = _int(_eval(lo, f))
    high = f.bound - 1 if hi is None else _int(_eval(hi, f))
    return range(max(low, 0), min(high, f.bound - 1) + 1)


def _int(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueTypeError(f"quantifier bound must be an integer, got {value!r}")
    return value


def _truth(value) -> bool:
    if not isinstance(value, bool):
        raise ValueTypeError(f"expected a binary value, got {value!r}")
    return value


def _with_index(f: Frame, var: str, value: int, thunk):
    missing = object()
    saved = f.env.get(var, missing)
    f.env[var] = value
    try:
        return thunk()
    finally:
        if saved is missing:
            del f.env[var]
        else:
            f.env[var] = saved


def _junction(parts: Sequence[Pred], decisive: bool, f: Frame) -> bool:
    """
    Conjunction (decisive=False) or disjunction (decisive=True) of parts.

    A part evaluating to the decisive value settles the result even when an
    earlier part could not be evaluated, so the order of parts never matters.
    An error is raised only when no part is decisive.
    """
    error: Optional[EvaluationError] = None
    for part in parts:
        try:
            if _truth(_eval(part, f)) == decisive:
                return decisive
        except EvaluationError as exc:
            error = error or exc
    if error is not None:
        raise error
    return not decisive


def _eval(p: Pred, f: Frame):
    kind = type(p)
    if kind is Ref:
        return _eval_ref(p, f)
    if kind is Const:
        return p.value
    if kind is Cmp:
        return apply_binary(p.op, _eval(p.left, f), _eval(p.right, f))
    if kind is And:
        return _junction(p.parts, False, f)
    if kind is Or:
        return _junction(p.parts, True, f)
    if kind is Arith:
        return apply_binary(p.op, _eval(p.left, f), _eval(p.right, f))
    if kind is Not:
        return not _truth(_eval(p.operand, f))
    if kind is Implies:
        if not _truth(_eval(p.left, f)):
            return True
        return _truth(_eval(p.right, f))
    if kind is Cond:
        branch = p.then if _truth(_eval(p.cond, f)) else p.orelse
        return _eval(branch, f)
    if kind is Forall:
        for j in _range(p.lo, p.hi, f):
            if not _with_index(f, p.var, j, lambda: _truth(_eval(p.body, f))):
                return False
        return True
    if kind is Exists:
        for j in _range(p.lo, p.hi, f):
            if _with_index(f, p.var, j, lambda: _truth(_eval(p.body, f))):
                return True
        return False
    if kind is Max:
        best = None
        for j in _range(p.lo, p.hi, f):
            if _with_index(f, p.var, j, lambda: _truth(_eval(p.guard, f))):
                value = _with_index(f, p.var, j, lambda: _eval(p.body, f))
                if best is None or apply_binary(">", value, best):
                    best = value
        if best is None:
            raise UndefinedMax(f"no {p.var} in range satisfies {render(p.guard)}")
        return best
    if kind is Neg:
        return apply_unary("neg", _eval(p.operand, f))
    if kind is Fact:
        return apply_unary("fac", _eval(p.operand, f))
    if kind is Compose:
        return _eval_compose(p, f)
    raise ValueTypeError(f"not a predicate: {p!r}")


def eval_pred(p: Pred, b: Binding, d: Domain) -> bool:
    """
    Truth value of a predicate under a binding.

    Args:
        p: Predicate to evaluate
        b: Values for unprimed, primed, need and time variables
        d: Domain used for quantifier bounds and composition search

    Returns:
        True or False
    """
    return _truth(_eval(p, Frame.from_binding(b, d)))


def eval_in_frame(p: Pred, f: Frame) -> bool:
    """
    Truth value of p in a fully known frame.

    Compositions already pinned by solve(p, f) reuse the intermediate values
    found there instead of solving them again.
    """
    return _truth(_eval(p, f))


# ---------------------------------------------------------------------------
# One-point pinning
# ---------------------------------------------------------------------------

def _ref_unknown(ref: Ref, f: Frame) -> Optional[Loc]:
    """The location of ref if it is unknown and may be solved for, else None."""
    if _is_bound_index(ref, f):
        return None
    loc = _ref_loc(ref, f)
    if loc in f.table(ref) or not f.allowed(ref, loc):
        return None
    return loc


def _assign(ref: Ref, loc: Loc, value, f: Frame) -> bool:
    if ref.need:
        if not isinstance(value, bool):
            return False
    elif loc == TIME:
        if isinstance(value, bool):
            return False
        try:
            value = ExtNat.coerce(value)
        except ValueTypeError:
            return False
    elif isinstance(value, bool) or not isinstance(value, int):
        return False
    f.table(ref)[loc] = value
    return True


def _solve_eq(left: Pred, right: Pred, f: Frame) -> bool:
    for target, source in ((left, right), (right, left)):
        if type(target) is not Ref:
            continue
        try:
            loc = _ref_unknown(target, f)
            if loc is None:
                continue
            value = _eval(source, f)
        except EvaluationError:
            continue
        return _assign(target, loc, value, f)
    return False


def _solve_atom(ref: Ref, value: bool, f: Frame) -> bool:
    if not ref.need:
        return False
    try:
        loc = _ref_unknown(ref, f)
    except EvaluationError:
        return False
    if loc is None:
        return False
    return _assign(ref, loc, value, f)


def _solve_pass(p: Pred, f: Frame) -> bool:
    """One sweep over the conjuncts of p, pinning unknowns they determine."""
    kind = type(p)
    if kind is And:
        changed = False
        for part in p.parts:
            changed = _solve_pass(part, f) or changed
        return changed
    if kind is Cmp:
        return p.op == "=" and _solve_eq(p.left, p.right, f)
    if kind is Ref:
        return _solve_atom(p, True, f)
    if kind is Not:
        return type(p.operand) is Ref and _solve_atom(p.operand, False, f)
    if kind is Forall:
        try:
            indices = _range(p.lo, p.hi, f)
        except EvaluationError:
            return False
        changed = False
        for j in indices:
            changed = _with_index(f, p.var, j, lambda: _solve_pass(p.body, f)) or changed
        return changed
    if kind is Implies:
        try:
            guard = _truth(_eval(p.left, f))
        except EvaluationError:
            return False
        return guard and _solve_pass(p.right, f)
    if kind is Cond:
        try:
            taken = _truth(_eval(p.cond, f))
        except EvaluationError:
            return False
        return _solve_pass(p.then if taken else p.orelse, f)
    if kind is Compose and p.pinned:
        first, second = f.child(p)
        changed = False
        while True:
            a = _solve_pass(p.first, first)
            b = _solve_pass(p.second, second)
            if not (a or b):
                return changed
            changed = True
    return False


def solve(p: Pred, f: Frame) -> Frame:
    """Pin every unknown of f that the equations of p determine; returns f."""
    while _solve_pass(p, f):
        pass
    return f


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------

def _candidates(key: Loc, channel: str, f: Frame) -> List:
    if channel == "need":
        return [False, True]
    if key == TIME:
        values: List[ExtNat] = []
        start = f.pre.get(TIME)
        if start is not None:
            values.extend(start + k for k in range(f.domain.time_horizon + 1))
        end = f.post.get(TIME)
        if end is not None:
            values.append(end)
        values.extend(f.domain.time_samples)
        values.append(INF)
    else:
        values = [v for v in (f.pre.get(key), f.post.get(key)) if v is not None]
        values.extend(f.domain.scalar_values)
    unique = []
    for value in values:
        if value not in unique:
            unique.append(value)
    return unique


def _first_unknown(f: Frame, store: dict, need: dict) -> Optional[Tuple[Loc, str]]:
    for key in sorted(f.need_keys):
        if key not in need:
            return key, "need"
    for key in sorted(f.store_keys - {TIME}):
        if key not in store:
            return key, "store"
    if TIME not in store:
        return TIME, "store"
    return None


def _search(p: Compose, f: Frame, store: dict, need: dict) -> bool:
    first = f.derive(f.pre, store, f.pre_need, need)
    second = f.derive(store, f.post, need, f.post_need)
    if p.pinned:
        while _solve_pass(p.first, first) | _solve_pass(p.second, second):
            pass
    unknown = _first_unknown(f, store, need)
    if unknown is None:
        return _truth(_eval(p.first, first)) and _truth(_eval(p.second, second))
    key, channel = unknown
    error: Optional[EvaluationError] = None
    for value in _candidates(key, channel, f):
        f.budget.charge()
        store2, need2 = dict(store), dict(need)
        (need2 if channel == "need" else store2)[key] = value
        try:
            if _search(p, f, store2, need2):
                return True
        except EvaluationError as exc:
            error = error or exc
    if error is not None:
        raise error
    return False


def _eval_compose(p: Compose, f: Frame) -> bool:
    cached = f.children.get(id(p)) if p.pinned and not f.env else None
    if cached is None:
        return _search(p, f, {}, {})
    # values pinned by an earlier solve of f are forced, so the search starts from them
    first, _ = cached
    return _search(p, f, dict(first.post), dict(first.post_need))


def compose(a: Pred, b: Pred, d: Optional[Domain] = None, pin: bool = False) -> Compose:
    """
    Semantic sequential composition of two predicates.

    Evaluation enumerates intermediate states and needs over the domain; with
    pin=True, intermediate components fixed by one-point equations are computed
    rather than enumerated.
    """
    return Compose(a, b, pinned=pin)


def one_point_compose(a: Pred, b: Pred) -> Compose:
    """
    Composition with the intermediate eliminated by the one-point law.

    The left operand must state every final value and the final time as
    functions of initial values (the shape produced for ok, assignment and
    print).  The intermediate is then the unique witness these equations
    name, and the backward need equations of b determine the needs.

    Raises:
        NotApplicable: if a is not forward-deterministic
    """
    missing = _undetermined_outputs(a)
    if missing:
        logger.debug("one-point composition not applicable: %s", missing)
        raise NotApplicable(
            "left operand does not determine " + ", ".join(sorted(missing))
        )
    return Compose(a, b, pinned=True)


def _undetermined_outputs(a: Pred) -> List[str]:
    sig = signature(a)
    defined = set()
    has_time = False
    for part in conjuncts(a):
        target = _defining_target(part)
        if target is None:
            continue
        if target == TIME.name:
            has_time = True
        else:
            defined.add(target)
    missing = [f"{name}'" for name in sorted((sig.scalars | sig.arrays) - defined)]
    if not has_time:
        missing.append("t'")
    return missing


def _defining_target(part: Pred) -> Optional[str]:
    """Name of the primed variable a conjunct defines from unprimed values, if any."""
    if isinstance(part, Forall):
        body = part.body
        if isinstance(body, Implies):
            body = body.right
        return _defining_target(body)
    if not (isinstance(part, Cmp) and part.op == "="):
        return None
    left, right = part.left, part.right
    if isinstance(left, Ref) and left.primed and not left.need and not _mentions_primed_store(right):
        return left.name
    return None


def _mentions_primed_store(p: Pred) -> bool:
    for node in walk(p):
        if isinstance(node, Ref) and node.primed and not node.need:
            return True
    return False


# ---------------------------------------------------------------------------
# Structure
# ---------------------------------------------------------------------------

def children(p: Pred) -> List[Pred]:
    if isinstance(p, Ref):
        return [p.index] if p.index is not None else []
    if isinstance(p, (Arith, Cmp, Implies)):
        return [p.left, p.right]
    if isinstance(p, (Neg, Fact, Not)):
        return [p.operand]
    if isinstance(p, Cond):
        return [p.cond, p.then, p.orelse]
    if isinstance(p, Max):
        return [p.lo] + ([p.hi] if p.hi is not None else []) + [p.guard, p.body]
    if isinstance(p, (Forall, Exists)):
        return [p.lo] + ([p.hi] if p.hi is not None else []) + [p.body]
    if isinstance(p, (And, Or)):
        return list(p.parts)
    if isinstance(p, Compose):
        return [p.first, p.second]
    return []


def walk(p: Pred) -> Iterable[Pred]:
    yield p
    for child in children(p):
        yield from walk(child)


def conjuncts(p: Pred) -> List[Pred]:
    if isinstance(p, And):
        result = []
        for part in p.parts:
            result.extend(conjuncts(part))
        return result
    return [p]


@dataclass(frozen=True)
class Signature:
    """Free program variables of a predicate and whether it mentions time or needs."""
    scalars: FrozenSet[str]
    arrays: FrozenSet[str]
    uses_time: bool
    uses_need: bool

    def merge(self, other: "Signature") -> "Signature":
        return Signature(self.scalars | other.scalars, self.arrays | other.arrays,
                         self.uses_time or other.uses_time, self.uses_need or other.uses_need)

    def universe(self, array_bound: int) -> Universe:
        return Universe(self.scalars, self.arrays, array_bound)


def signature(p: Pred) -> Signature:
    scalars, arrays = set(), set()
    uses_time = uses_need = False

    def visit(node: Pred, bound: FrozenSet[str]):
        nonlocal uses_time, uses_need
        if isinstance(node, Ref):
            if node.need:
                uses_need = True
            if node.index is not None:
                arrays.add(node.name)
                visit(node.index, bound)
            elif node.name == TIME.name and not node.need:
                uses_time = True
            elif node.name not in bound or node.primed or node.need:
                scalars.add(node.name)
            return
        if isinstance(node, (Forall, Exists, Max)):
            visit(node.lo, bound)
            if node.hi is not None:
                visit(node.hi, bound)
            inner = bound | {node.var}
            if isinstance(node, Max):
                visit(node.guard, inner)
            visit(node.body, inner)
            return
        for child in children(node):
            visit(child, bound)

    visit(p, frozenset())
    return Signature(frozenset(scalars), frozenset(arrays), uses_time, uses_need)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_LEVEL_QUANT = 0
_LEVEL_IMPLIES = 1
_LEVEL_OR = 2
_LEVEL_AND = 3
_LEVEL_NOT = 4
_LEVEL_CMP = 5
_LEVEL_ADD = 6
_LEVEL_MUL = 7
_LEVEL_NEG = 8
_LEVEL_FACT = 9
_LEVEL_ATOM = 10


def _level(p: Pred) -> int:
    if isinstance(p, (Forall, Exists, Max, Compose)):
        return _LEVEL_QUANT
    if isinstance(p, Implies):
        return _LEVEL_IMPLIES
    if isinstance(p, Or):
        return _LEVEL_OR
    if isinstance(p, And):
        return _LEVEL_AND
    if isinstance(p, Not):
        return _LEVEL_NOT
    if isinstance(p, Cmp):
        return _LEVEL_CMP
    if isinstance(p, Arith):
        return _LEVEL_ADD if p.op in "+-" else _LEVEL_MUL
    if isinstance(p, Neg):
        return _LEVEL_NEG
    if isinstance(p, Fact):
        return _LEVEL_FACT
    if isinstance(p, Const) and isinstance(p.value, int) and not isinstance(p.value, bool) and p.value < 0:
        return _LEVEL_NEG
    return _LEVEL_ATOM


def _wrap(p: Pred, min_level: int) -> str:
    text = render(p)
    return text if _level(p) >= min_level else f"({text})"


def _render_range(lo: Pred, hi: Optional[Pred]) -> str:
    high = "inf" if hi is None else _wrap(hi, _LEVEL_ADD)
    return f"{_wrap(lo, _LEVEL_ADD)}..{high}"


def render(p: Pred) -> str:
    """Single-line surface syntax of a predicate."""
    if isinstance(p, Const):
        if isinstance(p.value, bool):
            return "true" if p.value else "false"
        return str(p.value)
    if isinstance(p, Ref):
        text = ("need " if p.need else "") + p.name + ("'" if p.primed else "")
        if p.index is not None:
            text += f"({render(p.index)})"
        return text
    if isinstance(p, Arith):
        level = _level(p)
        return f"{_wrap(p.left, level)} {p.op} {_wrap(p.right, level + 1)}"
    if isinstance(p, Neg):
        if isinstance(p.operand, (Ref, Cond)):
            return f"-{render(p.operand)}"
        return f"-({render(p.operand)})"
    if isinstance(p, Fact):
        return f"{_wrap(p.operand, _LEVEL_ATOM)}!" if not isinstance(p.operand, Fact) else f"{render(p.operand)}!"
    if isinstance(p, Cond):
        return f"if {render(p.cond)} then {render(p.then)} else {render(p.orelse)} fi"
    if isinstance(p, Max):
        return (f"max {p.var}: {_render_range(p.lo, p.hi)} | {render(p.guard)} . "
                f"{render(p.body)}")
    if isinstance(p, Cmp):
        return f"{_wrap(p.left, _LEVEL_ADD)} {p.op} {_wrap(p.right, _LEVEL_ADD)}"
    if isinstance(p, Not):
        return f"~{_wrap(p.operand, _LEVEL_NOT)}"
    if isinstance(p, And):
        return " /\\ ".join(_wrap(part, _LEVEL_AND + 1) for part in p.parts)
    if isinstance(p, Or):
        return " \\/ ".join(_wrap(part, _LEVEL_OR + 1) for part in p.parts)
    if isinstance(p, Implies):
        return f"{_wrap(p.left, _LEVEL_IMPLIES + 1)} ==> {_wrap(p.right, _LEVEL_IMPLIES)}"
    if isinstance(p, (Forall, Exists)):
        word = "forall" if isinstance(p, Forall) else "exists"
        return f"{word} {p.var}: {_render_range(p.lo, p.hi)} . {render(p.body)}"
    if isinstance(p, Compose):
        return f"({render(p.first)}) ; ({render(p.second)})"
    raise ValueTypeError(f"not a predicate: {p!r}")


def render_block(p: Pred, indent: str = "    ") -> str:
    """Multi-line form: top-level conjuncts one per line, compositions split at ';'."""
    if isinstance(p, Compose):
        return (render_block(p.first, indent) + "\n;\n" + render_block(p.second, indent))
    if isinstance(p, And):
        parts = [_wrap(part, _LEVEL_AND + 1) for part in p.parts]
        return parts[0] + "".join(f"\n{indent}/\\ {part}" for part in parts[1:])
    return render(p)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def _fold(p: Pred) -> Pred:
    if isinstance(p, Arith) and isinstance(p.left, Const) and isinstance(p.right, Const):
        try:
            return Const(apply_binary(p.op, p.left.value, p.right.value))
        except EvaluationError:
            return p
    if isinstance(p, Neg) and isinstance(p.operand, Const) and isinstance(p.operand.value, int) \
            and not isinstance(p.operand.value, bool):
        return Const(-p.operand.value)
    if isinstance(p, Fact) and isinstance(p.operand, Const):
        try:
            return Const(apply_unary("fac", p.operand.value))
        except EvaluationError:
            return p
    if isinstance(p, Not) and isinstance(p.operand, Const) and isinstance(p.operand.value, bool):
        return Const(not p.operand.value)
    if isinstance(p, Cond) and isinstance(p.cond, Const) and isinstance(p.cond.value, bool):
        return p.then if p.cond.value else p.orelse
    return p


def normalize(p: Pred) -> Pred:
    """
    Canonical form: flattened and sorted conjunctions and disjunctions,
    constant folding of literal arithmetic and of boolean constants.
    """
    if isinstance(p, (Const,)):
        return p
    if isinstance(p, Ref):
        return p if p.index is None else Ref(p.name, p.primed, p.need, normalize(p.index))
    if isinstance(p, (And, Or)):
        cls = type(p)
        flat: List[Pred] = []
        for part in p.parts:
            part = normalize(part)
            if isinstance(part, cls):
                flat.extend(part.parts)
            else:
                flat.append(part)
        unit, zero = (TRUE, FALSE) if cls is And else (FALSE, TRUE)
        if zero in flat:
            return zero
        unique = sorted({render(part): part for part in flat if part != unit}.items())
        items = tuple(part for _, part in unique)
        if not items:
            return unit
        if len(items) == 1:
            return items[0]
        return cls(items)
    if isinstance(p, Arith):
        return _fold(Arith(p.op, normalize(p.left), normalize(p.right)))
    if isinstance(p, Cmp):
        return Cmp(p.op, normalize(p.left), normalize(p.right))
    if isinstance(p, Neg):
        return _fold(Neg(normalize(p.operand)))
    if isinstance(p, Fact):
        return _fold(Fact(normalize(p.operand)))
    if isinstance(p, Not):
        return _fold(Not(normalize(p.operand)))
    if isinstance(p, Implies):
        return Implies(normalize(p.left), normalize(p.right))
    if isinstance(p, Cond):
        return _fold(Cond(normalize(p.cond), normalize(p.then), normalize(p.orelse)))
    if isinstance(p, Max):
        hi = normalize(p.hi) if p.hi is not None else None
        return Max(p.var, normalize(p.lo), hi, normalize(p.guard), normalize(p.body))
    if isinstance(p, (Forall, Exists)):
        hi = normalize(p.hi) if p.hi is not None else None
        return type(p)(p.var, normalize(p.lo), hi, normalize(p.body))
    if isinstance(p, Compose):
        return Compose(normalize(p.first), normalize(p.second), p.pinned)
    raise ValueTypeError(f"not a predicate: {p!r}")
