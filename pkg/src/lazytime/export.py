"""
Export module for saving reports and traces to JSON and CSV.
"""

import json
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional, Union

import pandas as pd

from .execution import DemandTrace

TRACE_COLUMNS = [
    "id", "kind", "target", "value", "needed",
    "data_deps", "control_deps", "in_cut_loop",
]


def crosscheck_to_dict(lazy_time, predicate_time, agree: bool,
                       binding_checked: Optional[bool] = None) -> dict:
    """
    Agreement between lazy execution and the annotated predicate's timing.

    Args:
        lazy_time: ExtNat from run_lazy
        predicate_time: ExtNat solved from the timing equations, or None if undetermined
        agree: Whether both engines report the same time
        binding_checked: For loop-free programs, whether the annotation holds at the
            binding derived from the demand closure

    Returns:
        Dictionary ready for JSON serialization
    """
    return {
        "lazyTime": str(lazy_time),
        "predicateTime": None if predicate_time is None else str(predicate_time),
        "agree": agree,
        "bindingHolds": binding_checked,
    }


def write_json(data: Union[dict, list], path: str) -> str:
    """
    Write a report (or list of reports) to a JSON file.

    Args:
        data: Serializable report data.
        path: Output file path.

    Returns:
        Path to the created file.
    """
    path = Path(path)
    payload = {
        "metadata": {"exported": datetime.now().isoformat()},
        "report": data,
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
    return str(path)


def trace_to_frame(trace: DemandTrace, needed: Iterable[int] = ()) -> pd.DataFrame:
    """
    One row per trace event.

    Args:
        trace: Demand trace from build_trace
        needed: Event ids in the demand closure

    Returns:
        DataFrame with TRACE_COLUMNS
    """
    needed = set(needed)
    cut = set()
    for start, end in trace.segments:
        cut.update(range(start, end))
    rows = [
        {
            "id": event.id,
            "kind": event.kind,
            "target": str(event.target),
            "value": event.value,
            "needed": event.id in needed,
            "data_deps": " ".join(str(i) for i in sorted(event.data_deps)),
            "control_deps": " ".join(str(i) for i in sorted(event.control_deps)),
            "in_cut_loop": event.id in cut,
        }
        for event in trace.events
    ]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def export_trace_csv(trace: DemandTrace, path: str, needed: Iterable[int] = ()) -> str:
    """
    Export a demand trace to a CSV file.

    Returns:
        Path to the created file.
    """
    path = Path(path)
    frame = trace_to_frame(trace, needed)
    # Values may be very large integers (factorials); keep them exact as text
    frame["value"] = frame["value"].astype(str)
    frame.to_csv(path, index=False)
    return str(path)


def load_trace_csv(path: str) -> pd.DataFrame:
    """Read a CSV written by export_trace_csv."""
    frame = pd.read_csv(path, dtype={"value": str, "data_deps": str, "control_deps": str},
                        keep_default_na=False)
    return frame
