"""
Tests for the command-line interface.
"""

import json
import os
import subprocess
import sys

import pytest

from conftest import sample
from lazytime import config
from lazytime.astcore import Loc, Universe
from lazytime.errors import UniverseMismatch
from lazytime.main import build_parser, initial_state, main, parse_assignment, resolve_fuel

FACTORIAL = str(sample("factorial3.imp"))
INTRO = str(sample("intro.imp"))
CONDITIONAL = str(sample("conditional.imp"))
LOOP_SPEC = str(sample("loop.spec"))


def run_cli(capsys, *argv):
    with pytest.raises(SystemExit) as info:
        main(list(argv))
    out, err = capsys.readouterr()
    return info.value.code, out, err


@pytest.fixture
def counter_program(tmp_path):
    path = tmp_path / "counter.imp"
    path.write_text("x := 0;\nwhile true spec loop do x := x + 1 od;\nprint x;\nstop\n")
    return str(path)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def test_run_lazy_factorial(capsys):
    code, out, _ = run_cli(capsys, "run", "--lazy", FACTORIAL)
    assert code == config.EXIT_OK
    assert "time: 9" in out
    assert "printed: 6" in out
    assert "stability: fuel-stable" in out


def test_run_eager_factorial_runs_out_of_fuel(capsys):
    code, out, _ = run_cli(capsys, "run", "--eager", FACTORIAL, "--fuel", "100")
    assert code == config.EXIT_FUEL_EXCEEDED
    assert "time: fuel exceeded (100)" in out
    assert "printed: (nothing)" in out


def test_run_json(capsys):
    code, out, _ = run_cli(capsys, "run", INTRO, "--json")
    assert code == config.EXIT_OK
    data = json.loads(out)
    assert data["mode"] == "lazy"
    assert data["time"] == {"fin": 2}
    assert data["printed"] == [3]
    assert data["stability"] == "exact"


def test_run_with_initial_values(capsys):
    code, out, _ = run_cli(capsys, "run", CONDITIONAL, "--set", "x=1", "--set", "y=7", "--json")
    assert code == config.EXIT_OK
    data = json.loads(out)
    assert data["printed"] == [7]
    assert data["time"] == {"fin": 1}


def test_run_unstable(capsys, counter_program):
    code, out, err = run_cli(capsys, "run", counter_program, "--fuel", "40")
    assert code == config.EXIT_UNSTABLE
    assert "stability: unstable" in out


def test_fuel_from_environment(capsys, monkeypatch):
    monkeypatch.setenv(config.FUEL_ENV_VAR, "60")
    code, out, _ = run_cli(capsys, "run", "--eager", FACTORIAL)
    assert code == config.EXIT_FUEL_EXCEEDED
    assert "fuel exceeded (60)" in out


def test_bad_fuel_environment(capsys, monkeypatch):
    monkeypatch.setenv(config.FUEL_ENV_VAR, "lots")
    code, _, err = run_cli(capsys, "run", INTRO)
    assert code == config.EXIT_ERROR
    assert err.startswith("Error:")


def test_unknown_variable_in_set(capsys):
    code, _, err = run_cli(capsys, "run", INTRO, "--set", "q=1")
    assert code == config.EXIT_ERROR
    assert "Error:" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run_cli(capsys, "run", str(tmp_path / "absent.imp"))
    assert code == config.EXIT_ERROR
    assert "File not found" in err


def test_parse_error_exit_code(capsys, tmp_path):
    path = tmp_path / "broken.imp"
    path.write_text("x := ; stop")
    code, _, err = run_cli(capsys, "run", str(path))
    assert code == config.EXIT_ERROR
    assert "line 1" in err


def test_eager_and_lazy_are_exclusive():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--eager", "--lazy", INTRO])


# ---------------------------------------------------------------------------
# annotate
# ---------------------------------------------------------------------------

def test_annotate_text(capsys):
    code, out, _ = run_cli(capsys, "annotate", INTRO)
    assert code == config.EXIT_OK
    assert "-- x := 2" in out
    assert "== program" in out
    assert "need" in out


def test_annotate_json_with_loop(capsys):
    code, out, _ = run_cli(capsys, "annotate", FACTORIAL, "--specs", LOOP_SPEC, "--json")
    assert code == config.EXIT_OK
    data = json.loads(out)
    assert data["mode"] == "lazy"
    assert len(data["statements"]) == 5
    assert [ob["label"] for ob in data["obligations"]] == ["loop <= body; loop"]


def test_annotate_eager_has_no_needs(capsys):
    code, out, _ = run_cli(capsys, "annotate", INTRO, "--eager", "--json")
    data = json.loads(out)
    assert "need" not in data["program"]


def test_annotate_without_spec_fails(capsys):
    code, _, err = run_cli(capsys, "annotate", FACTORIAL)
    assert code == config.EXIT_ERROR
    assert "loop" in err


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def test_check_claim_holds(capsys):
    code, out, _ = run_cli(capsys, "check", FACTORIAL, "--specs", LOOP_SPEC,
                           "--claim", "t' = t + 9", "--samples", "200", "--array-bound", "6")
    assert code == config.EXIT_OK
    assert "t' = t + 9 <= program: holds(sampled" in out


def test_check_wrong_claim_fails(capsys):
    code, out, _ = run_cli(capsys, "check", FACTORIAL, "--specs", LOOP_SPEC,
                           "--claim", "t' = t + 8", "--samples", "200", "--array-bound", "6",
                           "--json")
    assert code == config.EXIT_REFINEMENT_FAILED
    reports = json.loads(out)["reports"]
    assert reports[-1]["verdict"] == "fails"
    assert reports[-1]["counterexample"] is not None


def test_check_eager_specification(capsys):
    code, out, _ = run_cli(capsys, "check", FACTORIAL, "--eager",
                           "--specs", str(sample("eager_loop.spec")),
                           "--claim", "t' = t + inf", "--samples", "200", "--array-bound", "6")
    assert code == config.EXIT_OK


def test_check_loop_free_program_without_claims(capsys):
    code, out, _ = run_cli(capsys, "check", INTRO)
    assert code == config.EXIT_OK
    assert "nothing to check" in out


# ---------------------------------------------------------------------------
# crosscheck
# ---------------------------------------------------------------------------

def test_crosscheck_factorial(capsys):
    code, out, _ = run_cli(capsys, "crosscheck", FACTORIAL, "--specs", LOOP_SPEC, "--fuel", "200")
    assert code == config.EXIT_OK
    assert "lazy time: 9" in out
    assert "predicate time: 9" in out
    assert "result: agree" in out


def test_crosscheck_loop_free_json(capsys):
    code, out, _ = run_cli(capsys, "crosscheck", INTRO, "--json")
    assert code == config.EXIT_OK
    data = json.loads(out)
    assert data == {"lazyTime": "2", "predicateTime": "2", "agree": True, "bindingHolds": True}


def test_crosscheck_unstable(capsys, counter_program):
    code, _, err = run_cli(capsys, "crosscheck", counter_program, "--fuel", "40")
    assert code == config.EXIT_UNSTABLE
    assert "unstable" in err


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def test_parse_assignment():
    assert parse_assignment("x=3") == (Loc("x"), 3)
    assert parse_assignment(" fac(2) = -1 ") == (Loc("fac", 2), -1)
    with pytest.raises(ValueError):
        parse_assignment("x == 3")


def test_initial_state_checks_prefix():
    universe = Universe(frozenset({"i"}), frozenset({"fac"}), 4)
    state = initial_state(universe, ["fac(1)=5", "i=2"])
    assert state.arrays["fac"] == (0, 5, 0, 0)
    assert state.scalars["i"] == 2
    with pytest.raises(UniverseMismatch):
        initial_state(universe, ["fac(4)=1"])


def test_resolve_fuel(monkeypatch):
    monkeypatch.delenv(config.FUEL_ENV_VAR, raising=False)
    assert resolve_fuel(None) == config.DEFAULT_FUEL
    assert resolve_fuel(12) == 12
    with pytest.raises(ValueError):
        resolve_fuel(0)


def test_cli_import_leaves_plotting_and_tables_unloaded():
    env = dict(os.environ, PYTHONPATH=os.pathsep.join(sys.path))
    code = ("import sys, lazytime.main; "
            "print(sorted(m for m in ('pandas', 'matplotlib', 'lazytime.export') if m in sys.modules))")
    result = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env,
                            check=True)
    assert result.stdout.strip() == "[]"
