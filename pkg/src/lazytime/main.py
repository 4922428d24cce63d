"""
Main entry point for lazytime.

Usage:
    lazytime run [--eager | --lazy] PROGRAM [options]
    lazytime annotate PROGRAM [--specs SPECS]
    lazytime check PROGRAM --specs SPECS [--claim TEXT ...]
    lazytime crosscheck PROGRAM [--specs SPECS]
"""

import argparse
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from . import __version__, config
from .annotator import annotate, annotate_statements, infer_universe
from .astcore import ZERO, Loc, NeedState, State, Universe, is_loop_free, state_from_items
from .errors import LazyTimeError, UniverseMismatch
from .execution import UNSTABLE, build_trace, eager_report, lazy_report
from .parser import format_stmt, parse_predicate, parse_program, parse_spec
from .predicate import TIME, Binding, Domain, Frame, Pred, eval_pred, render, render_block, solve
from .refine import AUTO, MODES, check_obligations

logger = logging.getLogger(__name__)

_SET_PATTERN = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\(\s*(\d+)\s*\))?\s*=\s*(-?\d+)\s*$")


@dataclass
class RunConfig:
    """Options shared by every subcommand."""
    program_path: str
    spec_path: Optional[str] = None
    array_bound: int = config.DEFAULT_ARRAY_BOUND
    fuel: int = config.DEFAULT_FUEL
    eager: bool = False
    seed: int = config.DEFAULT_SEED
    samples: int = config.DEFAULT_SAMPLES
    check_mode: str = AUTO
    output_format: str = "text"
    claims: List[str] = field(default_factory=list)
    assignments: List[str] = field(default_factory=list)
    window: float = config.DEFAULT_STABILITY_WINDOW
    trace_csv: Optional[str] = None
    plot: Optional[str] = None
    output: Optional[str] = None

    @property
    def json(self) -> bool:
        return self.output_format == "json"


# ---------------------------------------------------------------------------
# Loading inputs
# ---------------------------------------------------------------------------

def load_program(path: str):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    if path.suffix != config.PROGRAM_SUFFIX:
        print(f"Warning: File may not be a program ({config.PROGRAM_SUFFIX}): {path}", file=sys.stderr)
    return parse_program(path.read_text())


def load_specs(path: Optional[str]) -> Dict[str, Pred]:
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    if path.suffix != config.SPEC_SUFFIX:
        print(f"Warning: File may not be a specification file ({config.SPEC_SUFFIX}): {path}", file=sys.stderr)
    return parse_spec(path.read_text())


def parse_assignment(text: str) -> Tuple[Loc, int]:
    """Parse NAME=VALUE or NAME(K)=VALUE from --set."""
    match = _SET_PATTERN.match(text)
    if match is None:
        raise ValueError(f"--set expects NAME=VALUE or NAME(K)=VALUE, got {text!r}")
    name, index, value = match.groups()
    return Loc(name, None if index is None else int(index)), int(value)


def initial_state(universe: Universe, assignments: List[str]) -> State:
    """All-zero store with the --set overrides applied."""
    values = {}
    for text in assignments:
        loc, value = parse_assignment(text)
        if loc.index is None and loc.name not in universe.scalars:
            raise UniverseMismatch(f"{loc.name} is not a scalar of the program")
        if loc.index is not None:
            if loc.name not in universe.arrays:
                raise UniverseMismatch(f"{loc.name} is not an array of the program")
            if loc.index >= universe.array_bound:
                raise UniverseMismatch(
                    f"{loc} is outside the modeled prefix of length {universe.array_bound}"
                )
        values[loc] = value
    return state_from_items(universe, values)


def resolve_fuel(flag: Optional[int]) -> int:
    """Fuel from the flag, else LAZYTIME_FUEL, else the default."""
    if flag is not None:
        fuel = flag
    else:
        raw = os.environ.get(config.FUEL_ENV_VAR)
        if raw is None:
            return config.DEFAULT_FUEL
        try:
            fuel = int(raw)
        except ValueError:
            raise ValueError(f"{config.FUEL_ENV_VAR} must be a positive integer, got {raw!r}") from None
    if fuel < 1:
        raise ValueError(f"fuel must be a positive integer, got {fuel}")
    return fuel


def _emit(data: dict, text: str, cfg: RunConfig):
    if cfg.json:
        print(json.dumps(data, indent=2))
    else:
        print(text)
    if cfg.output:
        from .export import write_json
        path = write_json(data, cfg.output)
        print(f"Report written to {path}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_run(cfg: RunConfig) -> int:
    """Execute a program eagerly or lazily and report its time and output."""
    program = load_program(cfg.program_path)
    universe = infer_universe(program, {}, cfg.array_bound)
    state = initial_state(universe, cfg.assignments)
    trace = build_trace(program, state, cfg.fuel, halt=cfg.eager)

    if cfg.eager:
        report = eager_report(trace, cfg.fuel)
        needed = report.needed_events
    else:
        report, closure = lazy_report(trace, cfg.window)
        needed = closure.events

    if cfg.trace_csv:
        from .export import export_trace_csv
        path = export_trace_csv(trace, cfg.trace_csv, needed)
        print(f"Trace written to {path}", file=sys.stderr)
    if cfg.plot:
        from .visualization import plot_demand_trace
        path = plot_demand_trace(trace, needed, cfg.plot)
        if path:
            print(f"Plot written to {path}", file=sys.stderr)

    lines = [
        f"mode: {report.mode}",
        f"time: {report.time_text}",
        f"printed: {' '.join(str(v) for v in report.printed) or '(nothing)'}",
    ]
    if report.stability is not None:
        lines.append(f"stability: {report.stability}")
        lines.append(f"needed events: {len(report.needed_events)} of {len(trace.events)}")
    if report.offending is not None:
        lines.append(f"rewritten near the fuel limit: {report.offending}")
    _emit(report.to_dict(), "\n".join(lines), cfg)

    if report.fuel_exceeded is not None:
        return config.EXIT_FUEL_EXCEEDED
    if report.stability == UNSTABLE:
        return config.EXIT_UNSTABLE
    return config.EXIT_OK


def cmd_annotate(cfg: RunConfig) -> int:
    """Print the annotated predicate of each statement and of the whole program."""
    program = load_program(cfg.program_path)
    specs = load_specs(cfg.spec_path)
    universe = infer_universe(program, specs, cfg.array_bound)
    annotation = annotate(program, specs, universe, lazy=not cfg.eager)
    statements = annotate_statements(program, specs, universe, lazy=not cfg.eager)

    data = {
        "mode": "eager" if cfg.eager else "lazy",
        "statements": [
            {"statement": format_stmt(stmt), "predicate": render(pred)}
            for stmt, pred in statements
        ],
        "program": render(annotation.pred),
        "obligations": [
            {"label": ob.label, "lhs": render(ob.lhs), "rhs": render(ob.rhs),
             "origin": ob.origin.to_dict() if ob.origin else None}
            for ob in annotation.obligations
        ],
    }
    blocks = []
    for stmt, pred in statements:
        blocks.append(f"-- {format_stmt(stmt)}\n{render_block(pred)}")
    blocks.append(f"== program\n{render_block(annotation.pred)}")
    for ob in annotation.obligations:
        blocks.append(f"== obligation {ob.label}\n{render_block(ob.lhs)}\n<=\n{render_block(ob.rhs)}")
    _emit(data, "\n\n".join(blocks), cfg)
    return config.EXIT_OK


def cmd_check(cfg: RunConfig) -> int:
    """Check every loop obligation plus the user claims; exit 4 if any fails."""
    program = load_program(cfg.program_path)
    specs = load_specs(cfg.spec_path)
    claims = [parse_predicate(text) for text in cfg.claims]
    universe = infer_universe(program, specs, cfg.array_bound)
    annotation = annotate(program, specs, universe, lazy=not cfg.eager)
    domain = Domain(array_bound=cfg.array_bound)
    reports = check_obligations(annotation, claims, domain, cfg.check_mode, cfg.samples, cfg.seed)

    lines = []
    for report in reports:
        lines.append(f"{report.claim}: {report.verdict}"
                     f" ({report.bindings_checked} checked, {report.skipped} skipped)")
        if report.counterexample is not None:
            lines.append("  counterexample: " + json.dumps(report.counterexample.to_dict()))
    if not reports:
        lines.append("nothing to check")
    _emit({"reports": [r.to_dict() for r in reports]}, "\n".join(lines), cfg)

    if all(report.holds for report in reports):
        return config.EXIT_OK
    return config.EXIT_REFINEMENT_FAILED


def predicate_time(pred: Pred, universe: Universe, state: State, domain: Domain) -> Tuple[Frame, object]:
    """Solve the equations of pred from state at time 0 with no final value needed."""
    frame = Frame.empty(universe, domain)
    frame.pre.update(state.items())
    frame.pre[TIME] = ZERO
    frame.post_need.update({loc: False for loc in universe.locations()})
    solve(pred, frame)
    return frame, frame.post.get(TIME)


def cmd_crosscheck(cfg: RunConfig) -> int:
    """Compare lazy execution time with the time the annotated predicate determines."""
    program = load_program(cfg.program_path)
    specs = load_specs(cfg.spec_path)
    universe = infer_universe(program, specs, cfg.array_bound)
    state = initial_state(universe, cfg.assignments)
    trace = build_trace(program, state, cfg.fuel)
    report, _ = lazy_report(trace, cfg.window)
    if report.stability == UNSTABLE:
        print(f"Error: lazy execution is unstable ({report.offending} is rewritten near the fuel limit)",
              file=sys.stderr)
        return config.EXIT_UNSTABLE

    domain = Domain(array_bound=cfg.array_bound)
    annotation = annotate(program, specs, universe)
    frame, solved = predicate_time(annotation.pred, universe, state, domain)
    agree = solved is not None and solved == report.time

    binding_holds = None
    if is_loop_free(program):
        try:
            binding = Binding(
                state,
                State(trace.final_state.scalars, trace.final_state.arrays, report.time),
                NeedState.from_locations(
                    universe, [loc for loc in universe.locations() if frame.pre_need.get(loc, False)]
                ),
                NeedState.constant(universe, False),
            )
            binding_holds = eval_pred(annotation.pred, binding, domain)
        except LazyTimeError as error:
            logger.warning("binding check skipped: %s", error)
        agree = agree and binding_holds is not False

    from .export import crosscheck_to_dict
    data = crosscheck_to_dict(report.time, solved, agree, binding_holds)
    lines = [
        f"lazy time: {report.time}",
        f"predicate time: {'undetermined' if solved is None else solved}",
        f"result: {'agree' if agree else 'disagree'}",
    ]
    if binding_holds is not None:
        lines.append(f"annotation holds on the run: {binding_holds}")
    _emit(data, "\n".join(lines), cfg)
    return config.EXIT_OK if agree else config.EXIT_DISAGREE


COMMANDS = {
    "run": cmd_run,
    "annotate": cmd_annotate,
    "check": cmd_check,
    "crosscheck": cmd_crosscheck,
}


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("program", type=str, help="Path to the program file (.imp).")
    parser.add_argument("--specs", type=str, default=None,
                        help="Path to a file of loop specifications (.spec).")
    parser.add_argument("--array-bound", type=int, default=config.DEFAULT_ARRAY_BOUND,
                        help=f"Modeled prefix length of every array (default: {config.DEFAULT_ARRAY_BOUND}).")
    parser.add_argument("--json", action="store_true", help="Print machine-readable JSON.")
    parser.add_argument("-o", "--output", type=str, default=None,
                        help="Also write the report to a JSON file.")


def _add_fuel(parser: argparse.ArgumentParser):
    parser.add_argument("--fuel", type=int, default=None,
                        help=f"Events allowed per loop, or per run with --eager (default: ${config.FUEL_ENV_VAR} "
                             f"or {config.DEFAULT_FUEL}).")
    parser.add_argument("--set", dest="assignments", action="append", default=[],
                        metavar="NAME=VALUE",
                        help="Initial value of a scalar or array cell, e.g. --set x=3 --set a(0)=1.")
    parser.add_argument("--window", type=float, default=config.DEFAULT_STABILITY_WINDOW,
                        help="Fraction of a cut loop inspected for rewrites of demanded values "
                             f"(default: {config.DEFAULT_STABILITY_WINDOW}).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lazytime",
        description="Eager and lazy execution time of imperative programs, "
                    "with time and need annotations checked by refinement.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    lazytime run --lazy samples/factorial3.imp
    lazytime run --eager samples/factorial3.imp --fuel 100
    lazytime annotate samples/intro.imp
    lazytime check samples/factorial3.imp --specs samples/loop.spec --claim "t' = t + 9"
    lazytime crosscheck samples/factorial3.imp --specs samples/loop.spec

Exit codes:
    0  success
    1  parse, annotation or runtime error
    2  unstable lazy result, or crosscheck disagreement
    3  eager execution ran out of fuel
    4  a refinement obligation failed
        """
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log debug messages.")
    parser.add_argument("--version", action="version", version=f"lazytime v{__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Execute a program and report its time.")
    _add_common(run)
    _add_fuel(run)
    mode = run.add_mutually_exclusive_group()
    mode.add_argument("--eager", action="store_true", help="Count every assignment and print.")
    mode.add_argument("--lazy", action="store_true", help="Count only needed events (default).")
    run.add_argument("--trace-csv", type=str, default=None, help="Write the demand trace to a CSV file.")
    run.add_argument("--plot", type=str, default=None, help="Save a PNG plot of the demand trace.")

    annotate_cmd = sub.add_parser("annotate", help="Print time and need annotations.")
    _add_common(annotate_cmd)
    annotate_cmd.add_argument("--eager", action="store_true", help="Annotate without need variables.")

    check = sub.add_parser("check", help="Check loop obligations and claims by refinement.")
    _add_common(check)
    check.add_argument("--eager", action="store_true", help="Use the eager annotation.")
    check.add_argument("--claim", dest="claims", action="append", default=[],
                       help="Specification the whole program must refine, e.g. \"t' = t + 9\".")
    check.add_argument("--mode", choices=MODES, default=AUTO,
                       help="Exhaustive, sampled, or exhaustive when small enough (default).")
    check.add_argument("--samples", type=int, default=config.DEFAULT_SAMPLES,
                       help=f"Bindings drawn in sampled mode (default: {config.DEFAULT_SAMPLES}).")
    check.add_argument("--seed", type=int, default=config.DEFAULT_SEED,
                       help=f"Sampler seed (default: {config.DEFAULT_SEED}).")

    crosscheck = sub.add_parser("crosscheck", help="Compare lazy execution with the annotation.")
    _add_common(crosscheck)
    _add_fuel(crosscheck)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        program_path=args.program,
        spec_path=args.specs,
        array_bound=args.array_bound,
        fuel=resolve_fuel(getattr(args, "fuel", None)),
        eager=getattr(args, "eager", False),
        seed=getattr(args, "seed", config.DEFAULT_SEED),
        samples=getattr(args, "samples", config.DEFAULT_SAMPLES),
        check_mode=getattr(args, "mode", AUTO),
        output_format="json" if args.json else "text",
        claims=getattr(args, "claims", []),
        assignments=getattr(args, "assignments", []),
        window=getattr(args, "window", config.DEFAULT_STABILITY_WINDOW),
        trace_csv=getattr(args, "trace_csv", None),
        plot=getattr(args, "plot", None),
        output=args.output,
    )


def main(argv: Optional[List[str]] = None):
    """Main entry point."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = config_from_args(args)
        if cfg.array_bound < 1:
            raise ValueError(f"array bound must be at least 1, got {cfg.array_bound}")
        status = COMMANDS[args.command](cfg)
    except (LazyTimeError, OSError, ValueError) as error:
        print(f"Error: {error}", file=sys.stderr)
        sys.exit(config.EXIT_ERROR)
    sys.exit(status)


if __name__ == "__main__":
    main()
