"""
Abstract syntax, values and states for lazytime.

The object language is a small imperative language over integer scalars and
integer arrays.  Time values are extended naturals (naturals plus infinity).
"""

import math
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Tuple, Union

from .errors import (
    DivisionByZero,
    IndexOutOfRange,
    InexactDivision,
    NegativeFactorial,
    UnboundVariable,
    ValueTypeError,
)


# ---------------------------------------------------------------------------
# Extended naturals
# ---------------------------------------------------------------------------

@total_ordering
@dataclass(frozen=True)
class ExtNat:
    """
    A natural number or infinity.

    ``n`` is the finite value, or None for infinity.  Integers mix freely with
    ExtNat in arithmetic and comparisons; they are promoted first.
    """
    n: Optional[int] = 0

    def __post_init__(self):
        if self.n is not None and (isinstance(self.n, bool) or self.n < 0):
            raise ValueTypeError(f"time value must be a natural number, got {self.n!r}")

    @staticmethod
    def fin(n: int) -> "ExtNat":
        return ExtNat(n)

    @staticmethod
    def coerce(value) -> "ExtNat":
        if isinstance(value, ExtNat):
            return value
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueTypeError(f"expected a time or integer value, got {value!r}")
        return ExtNat(value)

    @property
    def is_inf(self) -> bool:
        return self.n is None

    def __add__(self, other) -> "ExtNat":
        other = ExtNat.coerce(other)
        if self.is_inf or other.is_inf:
            return INF
        return ExtNat(self.n + other.n)

    __radd__ = __add__

    def __sub__(self, other) -> "ExtNat":
        other = ExtNat.coerce(other)
        if other.is_inf:
            raise ValueTypeError("cannot subtract infinity")
        if self.is_inf:
            return INF
        if other.n > self.n:
            raise ValueTypeError(f"time subtraction {self.n} - {other.n} is negative")
        return ExtNat(self.n - other.n)

    def __rsub__(self, other) -> "ExtNat":
        return ExtNat.coerce(other) - self

    def __mul__(self, other) -> "ExtNat":
        other = ExtNat.coerce(other)
        if self.is_inf or other.is_inf:
            if self.n == 0 or other.n == 0:
                raise ValueTypeError("infinity times zero is undefined")
            return INF
        return ExtNat(self.n * other.n)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if isinstance(other, bool):
            return False
        if isinstance(other, int):
            return self.n == other
        if isinstance(other, ExtNat):
            return self.n == other.n
        return NotImplemented

    def __hash__(self) -> int:
        return hash(("ExtNat", self.n))

    def __lt__(self, other) -> bool:
        if isinstance(other, int) and not isinstance(other, bool):
            if other < 0:
                return False
            other = ExtNat(other)
        if not isinstance(other, ExtNat):
            return NotImplemented
        if self.is_inf:
            return False
        if other.is_inf:
            return True
        return self.n < other.n

    def __str__(self) -> str:
        return "inf" if self.is_inf else str(self.n)

    def __repr__(self) -> str:
        return "Inf" if self.is_inf else f"Fin({self.n})"


INF = ExtNat(None)
ZERO = ExtNat(0)


def extnat_add(a: ExtNat, b: ExtNat) -> ExtNat:
    """Saturating addition: infinity absorbs everything."""
    return a + b


# ---------------------------------------------------------------------------
# Source positions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SourceSpan:
    """Position of a token or node in its source text (1-based line/column)."""
    line: int
    column: int
    start: int
    end: int

    def to_dict(self) -> dict:
        return {"line": self.line, "column": self.column, "start": self.start, "end": self.end}


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class ArrayRef:
    name: str
    index: "Expr"


@dataclass(frozen=True)
class Unary:
    op: str  # neg, not, fac
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[IntLit, BoolLit, Var, ArrayRef, Unary, Binary]

COMPARE_OPS = ("=", "!=", "<", "<=", ">", ">=")
LOGIC_OPS = ("and", "or")


# ---------------------------------------------------------------------------
# Lvalues and locations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scalar:
    name: str


@dataclass(frozen=True)
class ArrayCell:
    name: str
    index: Expr


Lvalue = Union[Scalar, ArrayCell]


class Loc(NamedTuple):
    """A concrete storage location: a scalar (index None) or an array cell."""
    name: str
    index: Optional[int] = None

    def __str__(self) -> str:
        if self.index is None:
            return self.name
        return f"{self.name}({self.index})"


PRINT_SINK = Loc("print")


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ok:
    pass


@dataclass(frozen=True)
class Assign:
    target: Lvalue
    rhs: Expr


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Stmt"
    orelse: "Stmt"


@dataclass(frozen=True)
class While:
    cond: Expr
    body: "Stmt"
    spec_name: Optional[str] = None
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class Seq:
    first: "Stmt"
    second: "Stmt"


@dataclass(frozen=True)
class Print:
    arg: Expr


@dataclass(frozen=True)
class Stop:
    pass


Stmt = Union[Ok, Assign, If, While, Seq, Print, Stop]


def seq(*stmts: Stmt) -> Stmt:
    """Right-nested sequential composition; seq() is Ok."""
    if not stmts:
        return Ok()
    result = stmts[-1]
    for stmt in reversed(stmts[:-1]):
        result = Seq(stmt, result)
    return result


def flatten_seq(stmt: Stmt) -> List[Stmt]:
    """Statements of a (possibly nested) sequence, in execution order."""
    if isinstance(stmt, Seq):
        return flatten_seq(stmt.first) + flatten_seq(stmt.second)
    return [stmt]


def is_loop_free(stmt: Stmt) -> bool:
    if isinstance(stmt, While):
        return False
    if isinstance(stmt, Seq):
        return is_loop_free(stmt.first) and is_loop_free(stmt.second)
    if isinstance(stmt, If):
        return is_loop_free(stmt.then) and is_loop_free(stmt.orelse)
    return True


def iter_stmts(stmt: Stmt) -> Iterable[Stmt]:
    """Pre-order walk over every statement node."""
    yield stmt
    if isinstance(stmt, Seq):
        yield from iter_stmts(stmt.first)
        yield from iter_stmts(stmt.second)
    elif isinstance(stmt, If):
        yield from iter_stmts(stmt.then)
        yield from iter_stmts(stmt.orelse)
    elif isinstance(stmt, While):
        yield from iter_stmts(stmt.body)


def iter_exprs(expr: Expr) -> Iterable[Expr]:
    yield expr
    if isinstance(expr, ArrayRef):
        yield from iter_exprs(expr.index)
    elif isinstance(expr, Unary):
        yield from iter_exprs(expr.operand)
    elif isinstance(expr, Binary):
        yield from iter_exprs(expr.left)
        yield from iter_exprs(expr.right)


def stmt_exprs(stmt: Stmt) -> List[Expr]:
    """Expressions appearing directly in a statement (not in sub-statements)."""
    if isinstance(stmt, Assign):
        exprs = [stmt.rhs]
        if isinstance(stmt.target, ArrayCell):
            exprs.append(stmt.target.index)
        return exprs
    if isinstance(stmt, (If, While)):
        return [stmt.cond]
    if isinstance(stmt, Print):
        return [stmt.arg]
    return []


# ---------------------------------------------------------------------------
# Variable universe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Universe:
    """Program variables in scope and the modeled array prefix length."""
    scalars: FrozenSet[str]
    arrays: FrozenSet[str]
    array_bound: int

    def __post_init__(self):
        if self.array_bound < 1:
            raise ValueError("array bound must be at least 1")
        clash = self.scalars & self.arrays
        if clash:
            raise ValueTypeError(f"used both as scalar and array: {', '.join(sorted(clash))}")

    def locations(self) -> List[Loc]:
        """Every modeled location, scalars first, in a stable order."""
        locs = [Loc(name) for name in sorted(self.scalars)]
        for name in sorted(self.arrays):
            locs.extend(Loc(name, k) for k in range(self.array_bound))
        return locs

    def merge(self, other: "Universe") -> "Universe":
        return Universe(
            self.scalars | other.scalars,
            self.arrays | other.arrays,
            max(self.array_bound, other.array_bound),
        )

    def with_bound(self, array_bound: int) -> "Universe":
        return Universe(self.scalars, self.arrays, array_bound)


def universe_of(stmt: Stmt, array_bound: int) -> Universe:
    """Infer declarations from use: names used with an index are arrays."""
    scalars = set()
    arrays = set()
    for node in iter_stmts(stmt):
        if isinstance(node, Assign):
            if isinstance(node.target, ArrayCell):
                arrays.add(node.target.name)
            else:
                scalars.add(node.target.name)
        for expr in stmt_exprs(node):
            for sub in iter_exprs(expr):
                if isinstance(sub, Var):
                    scalars.add(sub.name)
                elif isinstance(sub, ArrayRef):
                    arrays.add(sub.name)
    return Universe(frozenset(scalars), frozenset(arrays), array_bound)


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class State:
    """A concrete store: scalar values, array prefixes of length N, and the time."""
    scalars: Dict[str, int]
    arrays: Dict[str, Tuple[int, ...]]
    time: ExtNat = ZERO

    def read(self, loc: Loc) -> int:
        if loc.index is None:
            if loc.name not in self.scalars:
                raise UnboundVariable(loc.name)
            return self.scalars[loc.name]
        if loc.name not in self.arrays:
            raise UnboundVariable(loc.name)
        cells = self.arrays[loc.name]
        if not 0 <= loc.index < len(cells):
            raise IndexOutOfRange(loc.name, loc.index, len(cells))
        return cells[loc.index]

    @property
    def array_bound(self) -> Optional[int]:
        for cells in self.arrays.values():
            return len(cells)
        return None

    @staticmethod
    def zeros(universe: Universe, time: ExtNat = ZERO) -> "State":
        return State(
            {name: 0 for name in universe.scalars},
            {name: (0,) * universe.array_bound for name in universe.arrays},
            time,
        )

    def items(self) -> List[Tuple[Loc, int]]:
        pairs = [(Loc(name), value) for name, value in sorted(self.scalars.items())]
        for name, cells in sorted(self.arrays.items()):
            pairs.extend((Loc(name, k), value) for k, value in enumerate(cells))
        return pairs

    def to_dict(self) -> dict:
        return {
            "scalars": dict(sorted(self.scalars.items())),
            "arrays": {name: list(cells) for name, cells in sorted(self.arrays.items())},
            "time": str(self.time),
        }


@dataclass(frozen=True)
class NeedState:
    """Per-location need flags, structured exactly like a State."""
    scalars: Dict[str, bool]
    arrays: Dict[str, Tuple[bool, ...]]

    def read(self, loc: Loc) -> bool:
        if loc.index is None:
            if loc.name not in self.scalars:
                raise UnboundVariable(f"need {loc.name}")
            return self.scalars[loc.name]
        cells = self.arrays.get(loc.name)
        if cells is None:
            raise UnboundVariable(f"need {loc.name}")
        if not 0 <= loc.index < len(cells):
            raise IndexOutOfRange(loc.name, loc.index, len(cells))
        return cells[loc.index]

    @staticmethod
    def constant(universe: Universe, value: bool) -> "NeedState":
        return NeedState(
            {name: value for name in universe.scalars},
            {name: (value,) * universe.array_bound for name in universe.arrays},
        )

    @staticmethod
    def from_locations(universe: Universe, needed: Iterable[Loc]) -> "NeedState":
        needed = set(needed)
        return NeedState(
            {name: Loc(name) in needed for name in universe.scalars},
            {
                name: tuple(Loc(name, k) in needed for k in range(universe.array_bound))
                for name in universe.arrays
            },
        )

    def needed(self) -> List[Loc]:
        locs = [Loc(name) for name, flag in sorted(self.scalars.items()) if flag]
        for name, cells in sorted(self.arrays.items()):
            locs.extend(Loc(name, k) for k, flag in enumerate(cells) if flag)
        return locs

    def items(self) -> List[Tuple[Loc, bool]]:
        pairs = [(Loc(name), flag) for name, flag in sorted(self.scalars.items())]
        for name, cells in sorted(self.arrays.items()):
            pairs.extend((Loc(name, k), flag) for k, flag in enumerate(cells))
        return pairs

    def to_dict(self) -> dict:
        return {
            "scalars": dict(sorted(self.scalars.items())),
            "arrays": {name: list(cells) for name, cells in sorted(self.arrays.items())},
        }


def state_from_items(universe: Universe, values: Dict[Loc, int], time: ExtNat = ZERO) -> State:
    """Build a State from per-location values; missing locations read 0."""
    scalars = {name: values.get(Loc(name), 0) for name in universe.scalars}
    arrays = {
        name: tuple(values.get(Loc(name, k), 0) for k in range(universe.array_bound))
        for name in universe.arrays
    }
    return State(scalars, arrays, time)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

def value_kind(value) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, ExtNat):
        return "time"
    raise ValueTypeError(f"not a value: {value!r}")


def _require_int(op: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueTypeError(f"operator {op} expects an integer, got {value!r}")
    return value


def _require_bool(op: str, value) -> bool:
    if not isinstance(value, bool):
        raise ValueTypeError(f"operator {op} expects a binary value, got {value!r}")
    return value


def apply_unary(op: str, value):
    if op == "neg":
        return -_require_int("-", value)
    if op == "not":
        return not _require_bool("~", value)
    if op == "fac":
        n = _require_int("!", value)
        if n < 0:
            raise NegativeFactorial(n)
        return math.factorial(n)
    raise ValueTypeError(f"unknown unary operator {op}")


def exact_divide(a: int, b: int) -> int:
    if b == 0:
        raise DivisionByZero(f"{a} / 0")
    if a % b != 0:
        raise InexactDivision(a, b)
    return a // b


def apply_binary(op: str, a, b):
    """Apply a binary operator to integer, binary or time operands."""
    if op in LOGIC_OPS:
        a = _require_bool(op, a)
        b = _require_bool(op, b)
        return (a and b) if op == "and" else (a or b)

    kind_a, kind_b = value_kind(a), value_kind(b)
    if op in ("=", "!="):
        if (kind_a == "bool") != (kind_b == "bool"):
            raise ValueTypeError(f"cannot compare {a!r} with {b!r}")
        equal = a == b
        return equal if op == "=" else not equal

    if kind_a == "bool" or kind_b == "bool":
        raise ValueTypeError(f"operator {op} expects numbers, got {a!r} and {b!r}")

    if op in COMPARE_OPS:
        order = _compare(a, b)
        if op == "<":
            return order < 0
        if op == "<=":
            return order <= 0
        if op == ">":
            return order > 0
        return order >= 0

    if kind_a == "time" or kind_b == "time":
        if op == "+":
            return ExtNat.coerce(a) + ExtNat.coerce(b)
        if op == "-":
            return ExtNat.coerce(a) - ExtNat.coerce(b)
        if op == "*":
            return ExtNat.coerce(a) * ExtNat.coerce(b)
        raise ValueTypeError(f"operator {op} is not defined on time values")

    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return exact_divide(a, b)
    raise ValueTypeError(f"unknown binary operator {op}")


def _compare(a, b) -> int:
    """Three-way comparison of integers and time values; negatives sort below every time."""
    if isinstance(a, int) and isinstance(b, int):
        return (a > b) - (a < b)
    if isinstance(a, int) and a < 0:
        return -1
    if isinstance(b, int) and b < 0:
        return 1
    a, b = ExtNat.coerce(a), ExtNat.coerce(b)
    return (a > b) - (a < b)


# ---------------------------------------------------------------------------
# Expression evaluation and read sets
# ---------------------------------------------------------------------------

def index_value(name: str, value) -> int:
    index = _require_int("index", value)
    if index < 0:
        raise IndexOutOfRange(name, index)
    return index


def eval_expr(e: Expr, store):
    """
    Evaluate an expression against any store exposing ``read(loc)``.

    Args:
        e: Expression to evaluate
        store: State, Memory or any object with a read(Loc) method

    Returns:
        Integer or binary value
    """
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, Var):
        return store.read(Loc(e.name))
    if isinstance(e, ArrayRef):
        index = index_value(e.name, eval_expr(e.index, store))
        return store.read(Loc(e.name, index))
    if isinstance(e, Unary):
        return apply_unary(e.op, eval_expr(e.operand, store))
    if isinstance(e, Binary):
        return apply_binary(e.op, eval_expr(e.left, store), eval_expr(e.right, store))
    raise ValueTypeError(f"not an expression: {e!r}")


def reads_of(e: Expr) -> FrozenSet[Lvalue]:
    """
    Locations syntactically read by an expression.

    Scalars appear as Scalar(name), array reads as ArrayCell(name, index) with
    the index expression kept symbolic.  Reads of index expressions are included.
    """
    reads = set()
    for sub in iter_exprs(e):
        if isinstance(sub, Var):
            reads.add(Scalar(sub.name))
        elif isinstance(sub, ArrayRef):
            reads.add(ArrayCell(sub.name, sub.index))
    return frozenset(reads)


def locations_read(e: Expr, store) -> FrozenSet[Loc]:
    """Concrete locations read when evaluating e against store."""
    locs = set()
    for sub in iter_exprs(e):
        if isinstance(sub, Var):
            locs.add(Loc(sub.name))
        elif isinstance(sub, ArrayRef):
            index = index_value(sub.name, eval_expr(sub.index, store))
            locs.add(Loc(sub.name, index))
    return frozenset(locs)


def target_location(target: Lvalue, store) -> Loc:
    if isinstance(target, Scalar):
        return Loc(target.name)
    return Loc(target.name, index_value(target.name, eval_expr(target.index, store)))


def target_reads(target: Lvalue, store) -> FrozenSet[Loc]:
    """Locations read to resolve an assignment target (its index expression)."""
    if isinstance(target, ArrayCell):
        return locations_read(target.index, store)
    return frozenset()
