"""
Eager and lazy execution of programs.

Lazy execution is computed in two passes: the program is run eagerly while a
dependence trace is recorded (which earlier events each assignment and print
read from, and which condition reads it ran under), then the events the
printed output actually depends on are collected.  Lazy time is the number of
collected events.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

from . import config
from .astcore import (
    ExtNat,
    PRINT_SINK,
    Assign,
    If,
    Loc,
    Ok,
    Print,
    Scalar,
    Seq,
    State,
    Stmt,
    Stop,
    While,
    eval_expr,
    locations_read,
    reads_of,
    target_location,
    target_reads,
)
from .errors import EvaluationError, IndexOutOfRange, RuntimeFault, UnboundVariable, ValueTypeError

logger = logging.getLogger(__name__)

EXACT = "exact"
FUEL_STABLE = "fuel-stable"
UNSTABLE = "unstable"

Events = FrozenSet[int]
NO_EVENTS: Events = frozenset()


# ---------------------------------------------------------------------------
# Memory
# ---------------------------------------------------------------------------

class Memory:
    """
    Concrete store used during execution.

    Arrays are unbounded to the right: cells past the modeled prefix read 0
    until written.  Negative indices are errors.
    """

    def __init__(self, state: State):
        self.scalars: Dict[str, int] = dict(state.scalars)
        self.arrays: Set[str] = set(state.arrays)
        self.cells: Dict[Loc, int] = {}
        self.bound = state.array_bound or config.DEFAULT_ARRAY_BOUND
        for name, cells in state.arrays.items():
            for k, value in enumerate(cells):
                self.cells[Loc(name, k)] = value

    def read(self, loc: Loc):
        if loc.index is None:
            if loc.name not in self.scalars:
                raise UnboundVariable(loc.name)
            return self.scalars[loc.name]
        if loc.name not in self.arrays:
            raise UnboundVariable(loc.name)
        if loc.index < 0:
            raise IndexOutOfRange(loc.name, loc.index)
        return self.cells.get(loc, 0)

    def write(self, loc: Loc, value):
        if isinstance(value, bool):
            raise ValueTypeError(f"cannot store binary value {value} in {loc}")
        if loc.index is None:
            self.scalars[loc.name] = value
        else:
            self.arrays.add(loc.name)
            self.cells[loc] = value

    def snapshot(self, time: ExtNat) -> State:
        """State restricted to the modeled prefix of every array."""
        arrays = {
            name: tuple(self.cells.get(Loc(name, k), 0) for k in range(self.bound))
            for name in self.arrays
        }
        return State(dict(self.scalars), arrays, time)


class _Scratch:
    """Overlay of a Memory used to follow both branches of a conditional."""

    def __init__(self, base, values=None, unknown=None):
        self.base = base
        self.values: Dict[Loc, int] = dict(values or {})
        self.unknown: Set[Loc] = set(unknown or ())

    def read(self, loc: Loc):
        if loc in self.unknown:
            raise EvaluationError(f"value of {loc} is not known on this path")
        if loc in self.values:
            return self.values[loc]
        return self.base.read(loc)

    def fork(self) -> "_Scratch":
        return _Scratch(self.base, self.values, self.unknown)


# ---------------------------------------------------------------------------
# Trace
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceEvent:
    """One executed assignment or print."""
    id: int
    kind: str  # "assign" or "print"
    target: Loc
    value: int
    reads: FrozenSet[Loc]
    data_deps: Events
    control_deps: Events

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "target": str(self.target),
            "value": self.value,
            "reads": sorted(str(loc) for loc in self.reads),
            "dataDeps": sorted(self.data_deps),
            "controlDeps": sorted(self.control_deps),
        }


@dataclass
class DemandTrace:
    """
    Eager event sequence with dependencies.

    `demand` maps each location to the events its final value depends on;
    this is the last write, widened at conditionals by the dependencies of
    the branch not taken and at loop exits by the loop's condition events.
    `segments` holds (first id, end id) of every loop execution cut short
    by fuel.
    """
    events: List[TraceEvent] = field(default_factory=list)
    truncated: bool = False
    last_write: Dict[Loc, int] = field(default_factory=dict)
    demand: Dict[Loc, Events] = field(default_factory=dict)
    segments: List[Tuple[int, int]] = field(default_factory=list)
    final_state: Optional[State] = None

    @property
    def print_events(self) -> List[TraceEvent]:
        return [event for event in self.events if event.kind == "print"]


@dataclass
class Closure:
    events: Events
    stability: str
    offending: Optional[Loc] = None


@dataclass
class ExecReport:
    mode: str
    time: Optional[ExtNat]
    printed: List[int]
    final_state: Optional[State] = None
    fuel_exceeded: Optional[int] = None
    stability: Optional[str] = None
    needed_events: List[int] = field(default_factory=list)
    offending: Optional[Loc] = None

    @property
    def time_text(self) -> str:
        if self.fuel_exceeded is not None:
            return f"fuel exceeded ({self.fuel_exceeded})"
        return str(self.time)

    def to_dict(self) -> dict:
        if self.fuel_exceeded is not None:
            time = {"fuelExceeded": self.fuel_exceeded}
        elif self.time.is_inf:
            time = "inf"
        else:
            time = {"fin": self.time.n}
        return {
            "mode": self.mode,
            "time": time,
            "printed": list(self.printed),
            "stability": self.stability,
            "neededEvents": list(self.needed_events),
        }


class _Halted(Exception):
    """Raised inside a halting run once its fuel is spent."""


class _Tracer:
    """
    Runs a statement eagerly and records a DemandTrace.

    With `halt` set, fuel is one budget for the whole run and the run stops
    when it is spent.  Otherwise each loop gets `fuel` events of its own and
    execution resumes after a loop that is cut.
    """

    def __init__(self, memory: Memory, fuel: int, halt: bool = False):
        self.memory = memory
        self.fuel = fuel
        self.halt = halt
        self.limit = fuel * config.LOOP_STEP_FACTOR
        self.trace = DemandTrace()

    def _fault(self, error: EvaluationError) -> RuntimeFault:
        return RuntimeFault(len(self.trace.events), error)

    def _deps(self, locs: Iterable[Loc]) -> Events:
        result: Set[int] = set()
        for loc in locs:
            result |= self.trace.demand.get(loc, NO_EVENTS)
        return frozenset(result)

    def _emit(self, kind: str, target: Loc, value, reads: FrozenSet[Loc], control: Events) -> TraceEvent:
        if self.halt and len(self.trace.events) >= self.fuel:
            raise _Halted()
        event = TraceEvent(len(self.trace.events), kind, target, value, reads,
                           self._deps(reads), control)
        self.trace.events.append(event)
        return event

    def _out_of_fuel(self) -> bool:
        return len(self.trace.events) >= self.limit

    def run(self, stmt: Stmt, control: Events = NO_EVENTS):
        if isinstance(stmt, (Ok, Stop)):
            return
        if isinstance(stmt, Seq):
            self.run(stmt.first, control)
            self.run(stmt.second, control)
            return
        if isinstance(stmt, Assign):
            try:
                target = target_location(stmt.target, self.memory)
                reads = locations_read(stmt.rhs, self.memory) | target_reads(stmt.target, self.memory)
                value = eval_expr(stmt.rhs, self.memory)
                self.memory.write(target, value)
            except EvaluationError as error:
                raise self._fault(error) from error
            event = self._emit("assign", target, value, reads, control)
            self.trace.last_write[target] = event.id
            self.trace.demand[target] = frozenset({event.id})
            return
        if isinstance(stmt, Print):
            try:
                reads = locations_read(stmt.arg, self.memory)
                value = eval_expr(stmt.arg, self.memory)
            except EvaluationError as error:
                raise self._fault(error) from error
            self._emit("print", PRINT_SINK, value, reads, control)
            return
        if isinstance(stmt, If):
            self._run_if(stmt, control)
            return
        if isinstance(stmt, While):
            self._run_while(stmt, control)
            return
        raise ValueTypeError(f"not a statement: {stmt!r}")

    def _condition(self, cond, store) -> Tuple[bool, FrozenSet[Loc]]:
        reads = locations_read(cond, store)
        value = eval_expr(cond, store)
        if not isinstance(value, bool):
            raise ValueTypeError(f"condition evaluated to {value!r}")
        return value, reads

    def _run_if(self, stmt: If, control: Events):
        try:
            taken, cond_reads = self._condition(stmt.cond, self.memory)
        except EvaluationError as error:
            raise self._fault(error) from error
        join = None
        if _loop_free(stmt):
            deps = transfer(stmt, _Scratch(self.memory), {})
            join = {loc: self._deps(sources) for loc, sources in deps.items()}
        inner = control | self._deps(cond_reads)
        self.run(stmt.then if taken else stmt.orelse, inner)
        if join is None:
            return
        for loc, events in join.items():
            self.trace.demand[loc] = self.trace.demand.get(loc, NO_EVENTS) | events

    def _run_while(self, stmt: While, control: Events):
        start = len(self.trace.events)
        loop_control: Set[int] = set()
        iterations = 0
        while True:
            try:
                proceed, reads = self._condition(stmt.cond, self.memory)
            except EvaluationError as error:
                raise self._fault(error) from error
            loop_control |= self._deps(reads)
            if not proceed:
                self._widen_exit(start, frozenset(loop_control))
                return
            # the budget only matters for an iteration that would actually run
            if self._loop_spent(start, iterations):
                self.trace.truncated = True
                self.trace.segments.append((start, len(self.trace.events)))
                logger.debug("loop cut after %d iterations (%d events)",
                             iterations, len(self.trace.events) - start)
                if self.halt:
                    raise _Halted()
                return
            try:
                self.run(stmt.body, control | frozenset(loop_control))
            except _Halted:
                self.trace.segments.append((start, len(self.trace.events)))
                raise
            iterations += 1

    def _loop_spent(self, start: int, iterations: int) -> bool:
        if iterations >= self.limit:
            return True
        if self.halt:
            return False
        return len(self.trace.events) - start >= self.fuel or self._out_of_fuel()

    def _widen_exit(self, start: int, loop_control: Events):
        """Values left by a loop that exited depend on every evaluation of its condition."""
        written = {event.target for event in self.trace.events[start:] if event.kind == "assign"}
        for loc in written:
            self.trace.demand[loc] = self.trace.demand.get(loc, NO_EVENTS) | loop_control


def _loop_free(stmt: Stmt) -> bool:
    if isinstance(stmt, While):
        return False
    if isinstance(stmt, Seq):
        return _loop_free(stmt.first) and _loop_free(stmt.second)
    if isinstance(stmt, If):
        return _loop_free(stmt.then) and _loop_free(stmt.orelse)
    return True


def transfer(stmt: Stmt, store: _Scratch, deps: Dict[Loc, FrozenSet[Loc]]) -> Dict[Loc, FrozenSet[Loc]]:
    """
    Concrete forward dependence over a loop-free statement.

    Returns, for every location the statement may assign on either branch of
    its conditionals, the locations at entry its value depends on.  Values are
    tracked in `store`; a path that fails to evaluate makes its targets unknown
    instead of raising.
    """
    def sources(locs: Iterable[Loc]) -> FrozenSet[Loc]:
        result: Set[Loc] = set()
        for loc in locs:
            result |= deps.get(loc, frozenset({loc}))
        return frozenset(result)

    if isinstance(stmt, (Ok, Stop, Print)):
        return deps
    if isinstance(stmt, Seq):
        return transfer(stmt.second, store, transfer(stmt.first, store, deps))
    if isinstance(stmt, Assign):
        try:
            target = target_location(stmt.target, store)
        except EvaluationError:
            return deps
        result = dict(deps)
        try:
            reads = locations_read(stmt.rhs, store) | target_reads(stmt.target, store)
        except EvaluationError:
            reads = frozenset(loc for loc in _scalar_reads(stmt.rhs))
        result[target] = sources(reads)
        try:
            store.values[target] = eval_expr(stmt.rhs, store)
            store.unknown.discard(target)
        except EvaluationError:
            store.unknown.add(target)
        return result
    if isinstance(stmt, If):
        try:
            cond_reads = locations_read(stmt.cond, store)
            taken = eval_expr(stmt.cond, store)
        except EvaluationError:
            cond_reads = frozenset(_scalar_reads(stmt.cond))
            taken = None
        then_store, else_store = store.fork(), store.fork()
        then_deps = transfer(stmt.then, then_store, deps)
        else_deps = transfer(stmt.orelse, else_store, deps)
        result = dict(deps)
        for loc in (set(then_deps) | set(else_deps)) - set(deps) | _changed(deps, then_deps, else_deps):
            result[loc] = (sources(cond_reads)
                           | then_deps.get(loc, frozenset({loc}))
                           | else_deps.get(loc, frozenset({loc})))
            if taken is True:
                chosen = then_store
            elif taken is False:
                chosen = else_store
            else:
                chosen = None
            if chosen is not None and loc not in chosen.unknown:
                try:
                    store.values[loc] = chosen.read(loc)
                    store.unknown.discard(loc)
                    continue
                except EvaluationError:
                    pass
            store.unknown.add(loc)
        return result
    raise ValueTypeError(f"transfer is defined for loop-free statements, got {type(stmt).__name__}")


def _changed(deps, then_deps, else_deps) -> Set[Loc]:
    return {loc for loc in deps if then_deps.get(loc) is not deps[loc]
            or else_deps.get(loc) is not deps[loc]}


def _scalar_reads(e) -> List[Loc]:
    return [Loc(r.name) for r in reads_of(e) if isinstance(r, Scalar)]


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def build_trace(p: Stmt, s0: State, fuel: int = config.DEFAULT_FUEL, halt: bool = False) -> DemandTrace:
    """
    Run p eagerly and record every event with its dependencies.

    Each loop may produce at most `fuel` events before it is cut short; the
    cut is recorded and execution continues after the loop.  With `halt`,
    fuel is instead one budget for the whole run: the trace stops at the
    `fuel`-th event and nothing after the cut is executed.

    Raises:
        RuntimeFault: an expression failed to evaluate
    """
    if fuel < 1:
        raise ValueError(f"fuel must be positive, got {fuel}")
    memory = Memory(s0)
    tracer = _Tracer(memory, fuel, halt)
    try:
        tracer.run(p)
    except _Halted:
        tracer.trace.truncated = True
        logger.debug("run halted after %d events", len(tracer.trace.events))
    trace = tracer.trace
    trace.final_state = memory.snapshot(s0.time + ExtNat.fin(len(trace.events)))
    logger.debug("trace: %d events, truncated=%s", len(trace.events), trace.truncated)
    return trace


def _window(segment: Tuple[int, int], width: float) -> range:
    start, end = segment
    size = math.ceil(width * (end - start))
    return range(end - size, end)


def _stability(trace: DemandTrace, closure: Events, root_locs: Iterable[Loc],
               window: float) -> Tuple[str, Optional[Loc]]:
    if not trace.truncated:
        return EXACT, None
    root_locs = list(root_locs)
    for segment in trace.segments:
        tail = _window(segment, window)
        for event_id in tail:
            if event_id in closure:
                return UNSTABLE, trace.events[event_id].target
        demanded = set(root_locs)
        for event_id in closure:
            if event_id >= segment[1]:
                demanded |= trace.events[event_id].reads
        writes = [trace.events[event_id].target for event_id in tail]
        for loc in sorted(demanded):
            if loc.index is None:
                if loc in writes:
                    return UNSTABLE, loc
                continue
            indices = [w.index for w in writes if w.name == loc.name and w.index is not None]
            ascending = all(a <= b for a, b in zip(indices, indices[1:]))
            if not (ascending and all(k > loc.index for k in indices)):
                return UNSTABLE, loc
    return FUEL_STABLE, None


def demand_closure(tr: DemandTrace, roots: Iterable[Union[int, Loc]],
                   window: float = config.DEFAULT_STABILITY_WINDOW) -> Closure:
    """
    Events needed to produce the given roots.

    Args:
        tr: Trace from build_trace
        roots: Event ids (normally the print events) and/or final locations
        window: Fraction of each cut loop inspected for rewrites of demanded locations

    Returns:
        Closure with the event set and an exact / fuel-stable / unstable verdict
    """
    pending: List[int] = []
    root_locs: List[Loc] = []
    for root in roots:
        if isinstance(root, Loc):
            root_locs.append(root)
            pending.extend(tr.demand.get(root, NO_EVENTS))
        else:
            pending.append(root)
    needed: Set[int] = set()
    while pending:
        event_id = pending.pop()
        if event_id in needed:
            continue
        needed.add(event_id)
        event = tr.events[event_id]
        pending.extend(event.data_deps - needed)
        pending.extend(event.control_deps - needed)
    closure = frozenset(needed)
    stability, offending = _stability(tr, closure, root_locs, window)
    if stability == UNSTABLE:
        logger.warning("lazy result is unstable: %s is rewritten near the fuel limit", offending)
    return Closure(closure, stability, offending)


def run_eager(p: Stmt, s0: State, fuel: int = config.DEFAULT_FUEL) -> ExecReport:
    """Conventional execution; time counts every assignment and print."""
    return eager_report(build_trace(p, s0, fuel, halt=True), fuel)


def eager_report(trace: DemandTrace, fuel: int) -> ExecReport:
    """
    Eager report of a trace.

    A run that spends its fuel reports only the output produced before the
    cut, even when the trace went on past a cut loop.
    """
    if trace.truncated or len(trace.events) > fuel:
        cut = min([end for _, end in trace.segments] + [fuel])
        printed = [event.value for event in trace.print_events if event.id < cut]
        return ExecReport("eager", None, printed, fuel_exceeded=fuel)
    return ExecReport(
        "eager",
        ExtNat.fin(len(trace.events)),
        [event.value for event in trace.print_events],
        final_state=trace.final_state,
        needed_events=[event.id for event in trace.events],
    )


def run_lazy(p: Stmt, s0: State, fuel: int = config.DEFAULT_FUEL,
             window: float = config.DEFAULT_STABILITY_WINDOW) -> ExecReport:
    """Lazy execution; time counts only the events the printed output depends on."""
    trace = build_trace(p, s0, fuel)
    report, _ = lazy_report(trace, window)
    return report


def lazy_report(trace: DemandTrace, window: float = config.DEFAULT_STABILITY_WINDOW
                ) -> Tuple[ExecReport, Closure]:
    prints = trace.print_events
    closure = demand_closure(trace, [event.id for event in prints], window)
    time = ExtNat.fin(len(closure.events))
    final_state = None
    if trace.final_state is not None:
        final_state = State(trace.final_state.scalars, trace.final_state.arrays, time)
    report = ExecReport(
        "lazy",
        time,
        [event.value for event in prints],
        final_state=final_state,
        stability=closure.stability,
        needed_events=sorted(closure.events),
        offending=closure.offending,
    )
    return report, closure
