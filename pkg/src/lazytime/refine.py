"""
Refinement checking over bounded domains.

A refines B (written A <= B) when every binding that satisfies B also
satisfies A.  Checks are either exhaustive over a finite domain or sampled
with a fixed seed; a failing check reports a shrunk counterexample binding.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import config
from .annotator import Annotation
from .astcore import ZERO, ExtNat, Loc, NeedState, State, Universe, state_from_items
from .errors import DomainTooLarge, EvaluationError
from .predicate import (
    TIME,
    Binding,
    Domain,
    Frame,
    Pred,
    eval_in_frame,
    eval_pred,
    render,
    signature,
    solve,
)

logger = logging.getLogger(__name__)

EXHAUSTIVE = "exhaustive"
SAMPLED = "sampled"
AUTO = "auto"
MODES = (AUTO, EXHAUSTIVE, SAMPLED)


@dataclass
class RefinementReport:
    """Outcome of checking claim <= implementation over a domain."""
    claim: str
    holds: bool
    mode: str
    bindings_checked: int
    skipped: int = 0
    counterexample: Optional[Binding] = None
    seed: Optional[int] = None
    budget: Dict[str, object] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        if not self.holds:
            return "fails"
        if self.mode == SAMPLED:
            return f"holds(sampled, {self.bindings_checked})"
        return "holds(exhaustive)"

    def to_dict(self) -> dict:
        return {
            "claim": self.claim,
            "verdict": self.verdict,
            "bindingsChecked": self.bindings_checked,
            "skipped": self.skipped,
            "counterexample": self.counterexample.to_dict() if self.counterexample else None,
            "seed": self.seed,
            "domain": dict(self.budget),
        }


# ---------------------------------------------------------------------------
# Binding spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Space:
    """Which channels of a binding vary, over which values."""
    universe: Universe
    uses_time: bool
    uses_need: bool
    domain: Domain

    @property
    def locations(self) -> List[Loc]:
        return self.universe.locations()

    def time_values(self) -> Tuple[ExtNat, ...]:
        return self.domain.time_samples if self.uses_time else (ZERO,)

    def need_values(self) -> Tuple[bool, ...]:
        return (False, True) if self.uses_need else (False,)

    def size(self) -> int:
        n = len(self.locations)
        values = len(self.domain.scalar_values)
        return (values ** (2 * n)) * (len(self.time_values()) ** 2) * (len(self.need_values()) ** (2 * n))


def _space(a: Pred, b: Pred, d: Domain, universe: Optional[Universe]) -> _Space:
    sig = signature(a).merge(signature(b))
    if universe is None:
        universe = sig.universe(d.array_bound)
    else:
        universe = universe.with_bound(d.array_bound)
    return _Space(universe, sig.uses_time, sig.uses_need, d)


def _binding(space: _Space, pre: Sequence[int], post: Sequence[int], times: Tuple[ExtNat, ExtNat],
             pre_need: Sequence[bool], post_need: Sequence[bool]) -> Binding:
    locs = space.locations
    universe = space.universe
    return Binding(
        state_from_items(universe, dict(zip(locs, pre)), times[0]),
        state_from_items(universe, dict(zip(locs, post)), times[1]),
        NeedState.from_locations(universe, [loc for loc, flag in zip(locs, pre_need) if flag]),
        NeedState.from_locations(universe, [loc for loc, flag in zip(locs, post_need) if flag]),
    )


def _enumerate(space: _Space) -> Iterator[Binding]:
    n = len(space.locations)
    stores = list(itertools.product(space.domain.scalar_values, repeat=n))
    needs = list(itertools.product(space.need_values(), repeat=n))
    times = list(itertools.product(space.time_values(), repeat=2))
    for pre, post, time, pre_need, post_need in itertools.product(stores, stores, times, needs, needs):
        yield _binding(space, pre, post, time, pre_need, post_need)


def _classify(a: Pred, b: Pred, binding: Binding, d: Domain,
              frame: Optional[Frame] = None) -> Optional[bool]:
    """
    True for a counterexample, False for a passing binding, None when evaluation fails.

    `frame`, when given, holds the same binding already solved for b.
    """
    try:
        holds = eval_in_frame(b, frame) if frame is not None else eval_pred(b, binding, d)
        if not holds:
            return False
        return not eval_pred(a, binding, d)
    except EvaluationError as error:
        logger.debug("binding skipped: %s", error)
        return None


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def _array_store(bound: int, rng: np.random.Generator, consistent: bool,
                 d: Domain) -> Tuple[int, ...]:
    if consistent:
        c = int(rng.choice(config.STORE_MULTIPLIERS))
        return tuple(c * math.factorial(k) for k in range(bound))
    return tuple(int(v) for v in rng.choice(d.scalar_values, size=bound))


def _inputs(space: _Space, sample: int, samples: int, rng: np.random.Generator) -> Tuple[dict, ExtNat, dict]:
    """
    Pre store, pre time and post needs for one sample.

    Scalars, needs and time are walked in mixed radix when the sample budget
    covers them all, and drawn otherwise; array stores are always drawn, half
    of them factorial-consistent.
    """
    universe = space.universe
    scalars = sorted(universe.scalars)
    radices = [len(space.domain.scalar_values)] * len(scalars)
    need_locs = space.locations if space.uses_need else []
    radices += [2] * len(need_locs)
    radices.append(len(space.time_values()))
    total = math.prod(radices)
    if total <= samples:
        index = sample % total
        digits = []
        for radix in radices:
            digits.append(index % radix)
            index //= radix
    else:
        digits = [int(rng.integers(radix)) for radix in radices]

    pre: Dict[Loc, object] = {}
    for name, digit in zip(scalars, digits):
        pre[Loc(name)] = space.domain.scalar_values[digit]
    consistent = sample % 2 == 0
    for name in sorted(universe.arrays):
        cells = _array_store(universe.array_bound, rng, consistent, space.domain)
        for k, value in enumerate(cells):
            pre[Loc(name, k)] = value
    need_digits = digits[len(scalars):len(scalars) + len(need_locs)]
    post_need = {loc: bool(bit) for loc, bit in zip(need_locs, need_digits)}
    if not space.uses_need:
        post_need = {loc: False for loc in space.locations}
    time = space.time_values()[digits[-1]]
    return pre, time, post_need


def _pick(rng: np.random.Generator, values: Sequence):
    return values[int(rng.integers(len(values)))]


def _directed_binding(b: Pred, space: _Space, sample: int, samples: int,
                      rng: np.random.Generator) -> Tuple[Binding, Frame]:
    """Draw inputs, pin outputs by the equations of b, draw whatever b leaves free."""
    frame = Frame.empty(space.universe, space.domain)
    pre, time, post_need = _inputs(space, sample, samples, rng)
    frame.pre.update(pre)
    frame.pre[TIME] = time
    frame.post_need.update(post_need)
    if not space.uses_need:
        frame.pre_need.update({loc: False for loc in space.locations})
    try:
        solve(b, frame)
    except EvaluationError as error:
        logger.debug("pinning stopped early: %s", error)
    for loc in space.locations:
        if loc not in frame.post:
            frame.post[loc] = _pick(rng, [frame.pre[loc], *space.domain.scalar_values])
        if loc not in frame.pre_need:
            frame.pre_need[loc] = bool(rng.integers(2))
    if TIME not in frame.post:
        frame.post[TIME] = _pick(rng, [time, time + 1, *space.time_values()])
    return frame.to_binding(space.universe), frame


# ---------------------------------------------------------------------------
# Shrinking
# ---------------------------------------------------------------------------

def _truncate(binding: Binding, bound: int) -> Binding:
    def store(s: State) -> State:
        return State(dict(s.scalars), {n: c[:bound] for n, c in s.arrays.items()}, s.time)

    def needs(n: NeedState) -> NeedState:
        return NeedState(dict(n.scalars), {k: c[:bound] for k, c in n.arrays.items()})

    return Binding(store(binding.pre), store(binding.post),
                   needs(binding.pre_need), needs(binding.post_need), dict(binding.env))


def _simplifications(binding: Binding) -> Iterator[Binding]:
    bound = binding.array_bound
    if bound is not None and bound > 1:
        yield _truncate(binding, bound - 1)
    for side in ("pre", "post"):
        state: State = getattr(binding, side)
        for name, value in sorted(state.scalars.items()):
            if value != 0:
                scalars = dict(state.scalars, **{name: 0})
                yield _replace(binding, side, State(scalars, state.arrays, state.time))
        for name, cells in sorted(state.arrays.items()):
            for k, value in enumerate(cells):
                if value != 0:
                    arrays = dict(state.arrays)
                    arrays[name] = cells[:k] + (0,) + cells[k + 1:]
                    yield _replace(binding, side, State(state.scalars, arrays, state.time))
    for side in ("pre_need", "post_need"):
        needs: NeedState = getattr(binding, side)
        for loc in needs.needed():
            remaining = [other for other in needs.needed() if other != loc]
            scalars = {name: Loc(name) in remaining for name in needs.scalars}
            arrays = {name: tuple(Loc(name, k) in remaining for k in range(len(cells)))
                      for name, cells in needs.arrays.items()}
            yield _replace(binding, side, NeedState(scalars, arrays))


def _replace(binding: Binding, side: str, value) -> Binding:
    fields = {
        "pre": binding.pre, "post": binding.post,
        "pre_need": binding.pre_need, "post_need": binding.post_need,
    }
    fields[side] = value
    return Binding(env=dict(binding.env), **fields)


def shrink(a: Pred, b: Pred, binding: Binding, d: Domain) -> Binding:
    """Greedily simplify a counterexample while it stays one."""
    current = binding
    improved = True
    while improved:
        improved = False
        for candidate in _simplifications(current):
            domain = d.with_bound(candidate.array_bound or d.array_bound)
            if _classify(a, b, candidate, domain):
                current = candidate
                improved = True
                break
    return current


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def _budget(space: _Space, mode: str, samples: int) -> Dict[str, object]:
    budget: Dict[str, object] = {
        "arrayBound": space.universe.array_bound,
        "scalarValues": list(space.domain.scalar_values),
        "timeSamples": [str(t) for t in space.time_values()],
        "enumerationCap": space.domain.enumeration_cap,
    }
    if mode == SAMPLED:
        budget["samples"] = samples
    return budget


def check_refinement(a: Pred, b: Pred, d: Optional[Domain] = None, mode: str = AUTO,
                     samples: int = config.DEFAULT_SAMPLES, seed: int = config.DEFAULT_SEED,
                     universe: Optional[Universe] = None, claim: Optional[str] = None
                     ) -> RefinementReport:
    """
    Check that a is refined by b (every binding satisfying b satisfies a).

    Args:
        a: The specification
        b: The implementation, usually an annotated program or loop body
        d: Domain of values (defaults to Domain())
        mode: "exhaustive", "sampled" or "auto" (exhaustive when it fits the cap)
        samples: Number of sampled bindings
        seed: Seed of the sampler
        universe: Variables to bind (defaults to the free variables of a and b)
        claim: Label for the report (defaults to the rendered a)

    Returns:
        RefinementReport; a failing report carries a shrunk counterexample

    Raises:
        DomainTooLarge: exhaustive mode was requested and the domain exceeds the cap
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}, expected one of {', '.join(MODES)}")
    d = d or Domain()
    space = _space(a, b, d, universe)
    label = claim or render(a)
    size = space.size()
    if mode == EXHAUSTIVE and size > d.enumeration_cap:
        raise DomainTooLarge(size, d.enumeration_cap)
    chosen = EXHAUSTIVE if mode == EXHAUSTIVE or (mode == AUTO and size <= d.enumeration_cap) else SAMPLED
    logger.debug("checking %s: %s mode, space of %d bindings", label, chosen, size)

    checked = skipped = 0
    counterexample = None
    if chosen == EXHAUSTIVE:
        bindings: Iterator[Tuple[Binding, Optional[Frame]]] = (
            (binding, None) for binding in _enumerate(space)
        )
    else:
        rng = np.random.default_rng(seed)
        bindings = (_directed_binding(b, space, k, samples, rng) for k in range(samples))
    for binding, frame in bindings:
        outcome = _classify(a, b, binding, d, frame)
        if outcome is None:
            skipped += 1
            continue
        checked += 1
        if outcome:
            counterexample = shrink(a, b, binding, d)
            break

    if skipped:
        logger.debug("%s: %d binding(s) skipped after evaluation errors", label, skipped)
    return RefinementReport(
        claim=label,
        holds=counterexample is None,
        mode=chosen,
        bindings_checked=checked,
        skipped=skipped,
        counterexample=counterexample,
        seed=seed if chosen == SAMPLED else None,
        budget=_budget(space, chosen, samples),
    )


def check_obligations(p: Annotation, claims: Sequence[Pred] = (), d: Optional[Domain] = None,
                      mode: str = AUTO, samples: int = config.DEFAULT_SAMPLES,
                      seed: int = config.DEFAULT_SEED) -> List[RefinementReport]:
    """
    Check every loop obligation of an annotated program, then each claim about the program.

    A claim C is checked as C <= annotation of the whole program.
    """
    d = d or Domain(array_bound=p.universe.array_bound)
    reports = []
    for obligation in p.obligations:
        reports.append(check_refinement(obligation.lhs, obligation.rhs, d, mode, samples, seed,
                                        universe=p.universe, claim=obligation.label))
    for claim in claims:
        reports.append(check_refinement(claim, p.pred, d, mode, samples, seed,
                                        universe=p.universe, claim=f"{render(claim)} <= program"))
    for report in reports:
        if not report.holds:
            logger.warning("refinement fails: %s", report.claim)
    return reports


def specialize_check(strong: Pred, weak: Pred, d: Optional[Domain] = None, mode: str = AUTO,
                     samples: int = config.DEFAULT_SAMPLES,
                     seed: int = config.DEFAULT_SEED) -> RefinementReport:
    """Check that strong implies weak."""
    return check_refinement(weak, strong, d, mode, samples, seed,
                            claim=f"{render(strong)} ==> {render(weak)}")
