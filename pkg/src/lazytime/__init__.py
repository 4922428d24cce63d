"""
lazytime

Eager and lazy execution time of small imperative programs, with automatic
time and need annotations and bounded refinement checking.
"""

__version__ = "0.1.0"

from .astcore import INF, ExtNat, Loc, NeedState, State, Universe
from .parser import parse_predicate, parse_program, parse_spec, pretty_print
from .predicate import Binding, Domain, compose, eval_pred, normalize, one_point_compose, render
from .annotator import Annotation, RefinementObligation, annotate, eager_annotate, syntactic_needs
from .execution import DemandTrace, ExecReport, TraceEvent, build_trace, demand_closure, run_eager, run_lazy
from .refine import RefinementReport, check_obligations, check_refinement, specialize_check

__all__ = [
    "INF",
    "ExtNat",
    "Loc",
    "NeedState",
    "State",
    "Universe",
    "parse_predicate",
    "parse_program",
    "parse_spec",
    "pretty_print",
    "Binding",
    "Domain",
    "compose",
    "eval_pred",
    "normalize",
    "one_point_compose",
    "render",
    "Annotation",
    "RefinementObligation",
    "annotate",
    "eager_annotate",
    "syntactic_needs",
    "DemandTrace",
    "ExecReport",
    "TraceEvent",
    "build_trace",
    "demand_closure",
    "run_eager",
    "run_lazy",
    "RefinementReport",
    "check_obligations",
    "check_refinement",
    "specialize_check",
]
