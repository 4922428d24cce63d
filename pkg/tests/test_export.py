"""
Tests for JSON/CSV export and trace plots.
"""

import json

import pytest

from conftest import sample
from lazytime import config
from lazytime.astcore import State, universe_of
from lazytime.execution import DemandTrace, build_trace, lazy_report
from lazytime.export import (
    TRACE_COLUMNS, crosscheck_to_dict, export_trace_csv, load_trace_csv, trace_to_frame, write_json,
)
from lazytime.main import main
from lazytime.visualization import plot_demand_trace


@pytest.fixture
def intro_trace(intro):
    return build_trace(intro, State.zeros(universe_of(intro, 2)))


@pytest.fixture
def factorial_trace(factorial3):
    return build_trace(factorial3, State.zeros(universe_of(factorial3, 4)), fuel=50)


def test_trace_frame_columns(intro_trace):
    frame = trace_to_frame(intro_trace, [1, 2])
    assert list(frame.columns) == TRACE_COLUMNS
    assert list(frame["kind"]) == ["assign", "assign", "print"]
    assert list(frame["target"]) == ["x", "y", "print"]
    assert list(frame["needed"]) == [False, True, True]
    assert frame.loc[2, "data_deps"] == "1"
    assert not frame["in_cut_loop"].any()


def test_cut_loop_events_are_marked(factorial_trace):
    frame = trace_to_frame(factorial_trace)
    assert frame.loc[0, "in_cut_loop"] == False  # noqa: E712
    assert frame.loc[10, "in_cut_loop"] == True  # noqa: E712
    assert frame.iloc[-1]["kind"] == "print"


def test_trace_csv_keeps_large_values(factorial_trace, tmp_path):
    report, closure = lazy_report(factorial_trace)
    path = export_trace_csv(factorial_trace, tmp_path / "trace.csv", closure.events)
    loaded = load_trace_csv(path)
    assert len(loaded) == len(factorial_trace.events)
    assert list(loaded.columns) == TRACE_COLUMNS
    last_write = factorial_trace.events[-2]
    assert loaded.loc[last_write.id, "value"] == str(last_write.value)
    assert loaded["needed"].sum() == len(report.needed_events)
    assert loaded.loc[0, "data_deps"] == ""


def test_write_json_adds_metadata(tmp_path):
    data = crosscheck_to_dict(9, None, False)
    path = write_json(data, tmp_path / "report.json")
    payload = json.loads(open(path).read())
    assert "exported" in payload["metadata"]
    assert payload["report"] == {"lazyTime": "9", "predicateTime": None, "agree": False,
                                 "bindingHolds": None}


def test_plot_demand_trace(factorial_trace, tmp_path):
    _, closure = lazy_report(factorial_trace)
    path = plot_demand_trace(factorial_trace, closure.events, tmp_path / "trace.png")
    assert path is not None
    assert (tmp_path / "trace.png").stat().st_size > 0


def test_plot_empty_trace(tmp_path):
    assert plot_demand_trace(DemandTrace(), [], tmp_path / "empty.png") is None
    assert not (tmp_path / "empty.png").exists()


def test_cli_writes_trace_plot_and_report(capsys, tmp_path):
    csv_path = tmp_path / "trace.csv"
    png_path = tmp_path / "trace.png"
    json_path = tmp_path / "run.json"
    with pytest.raises(SystemExit) as info:
        main(["run", str(sample("factorial3.imp")), "--fuel", "60",
              "--trace-csv", str(csv_path), "--plot", str(png_path), "-o", str(json_path)])
    assert info.value.code == config.EXIT_OK
    err = capsys.readouterr().err
    assert "Trace written to" in err
    assert "Plot written to" in err
    assert load_trace_csv(csv_path)["needed"].sum() == 9
    assert png_path.exists()
    report = json.loads(json_path.read_text())["report"]
    assert report["printed"] == [6]
