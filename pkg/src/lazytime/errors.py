"""
Exception hierarchy for lazytime.

Library code raises these; only the command-line front end turns them into
diagnostics and exit codes.
"""

from typing import Optional


class LazyTimeError(Exception):
    """Base class for every error raised by lazytime."""


# Evaluation

class EvaluationError(LazyTimeError):
    """An expression or predicate could not be evaluated."""


class IndexOutOfRange(EvaluationError):
    def __init__(self, name: str, index: int, bound: Optional[int] = None):
        self.name = name
        self.index = index
        self.bound = bound
        where = f"[0, {bound})" if bound is not None else "the non-negative integers"
        super().__init__(f"index {index} of {name} is outside {where}")


class InexactDivision(EvaluationError):
    def __init__(self, dividend: int, divisor: int):
        self.dividend = dividend
        self.divisor = divisor
        super().__init__(f"{dividend} / {divisor} leaves a remainder")


class DivisionByZero(EvaluationError):
    pass


class NegativeFactorial(EvaluationError):
    def __init__(self, operand: int):
        self.operand = operand
        super().__init__(f"factorial of negative number {operand}")


class ValueTypeError(EvaluationError):
    """An operator received a value of the wrong kind (integer, binary, time)."""


class UnboundVariable(EvaluationError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"variable {name} is not bound")


class UndefinedMax(EvaluationError):
    """A max-comprehension found no element satisfying its guard."""


# Parsing

class ParseError(LazyTimeError):
    """Malformed program or specification text."""

    def __init__(self, message: str, span=None):
        self.message = message
        self.span = span
        if span is not None:
            message = f"{message} at line {span.line}, column {span.column}"
        super().__init__(message)


class UnboundQuantifierVariable(ParseError):
    """A quantifier-bound index was used as a program variable or outside its quantifier."""


# Annotation

class UnknownSpecName(LazyTimeError):
    def __init__(self, name: Optional[str]):
        self.name = name
        if name is None:
            super().__init__("while loop has no spec clause")
        else:
            super().__init__(f"no specification named {name}")


class UniverseMismatch(LazyTimeError):
    pass


class NotLoopFree(LazyTimeError):
    pass


class UnsupportedConstruct(LazyTimeError):
    pass


# Predicates and refinement

class NotApplicable(LazyTimeError):
    """One-point composition requested for a non forward-deterministic left side."""


class DomainTooLarge(LazyTimeError):
    def __init__(self, estimate: int, cap: int, what: str = "enumeration"):
        self.estimate = estimate
        self.cap = cap
        super().__init__(f"{what} needs {estimate} cases, budget is {cap}")


# Execution

class RuntimeFault(LazyTimeError):
    """An evaluation error raised while executing the event with the given id."""

    def __init__(self, event_id: int, cause: EvaluationError):
        self.event_id = event_id
        self.cause = cause
        super().__init__(f"event {event_id}: {cause}")
