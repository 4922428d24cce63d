"""
Visualization module for demand traces.
"""

from pathlib import Path
from typing import Dict, Iterable, List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .config import FRONTIER_COLOR, NEEDED_EVENT_COLOR, POINT_MARKER_SIZE, SKIPPED_EVENT_COLOR  # noqa: E402
from .execution import DemandTrace  # noqa: E402


def plot_demand_trace(trace: DemandTrace, needed: Iterable[int], output_path: str) -> Optional[str]:
    """
    Plot every event of a trace, one row per scalar or array.

    Events in the demand closure are drawn in NEEDED_EVENT_COLOR, the others
    in SKIPPED_EVENT_COLOR; a vertical line marks where a loop ran out of fuel.

    Args:
        trace: Demand trace from build_trace
        needed: Event ids counted by lazy execution
        output_path: Path of the PNG file to write

    Returns:
        Path to created image file, or None if the trace has no events
    """
    if not trace.events:
        return None

    needed = set(needed)
    rows = _row_labels(trace)
    fig, ax = plt.subplots(figsize=(12, max(3, 0.4 * len(rows) + 1.5)))

    ids = np.array([event.id for event in trace.events])
    ys = np.array([rows[_row(event.target)] for event in trace.events])
    mask = np.array([event.id in needed for event in trace.events])

    ax.scatter(ids[~mask], ys[~mask], c=SKIPPED_EVENT_COLOR, s=POINT_MARKER_SIZE ** 2,
               marker='o', zorder=3, label='Skipped')
    ax.scatter(ids[mask], ys[mask], c=NEEDED_EVENT_COLOR, s=POINT_MARKER_SIZE ** 2,
               marker='o', edgecolors='black', linewidths=0.5, zorder=4,
               label=f'Needed ({int(mask.sum())})')

    for start, end in trace.segments:
        ax.axvline(end - 0.5, color=FRONTIER_COLOR, linestyle='--', linewidth=1.5)
    if trace.segments:
        ax.plot([], [], color=FRONTIER_COLOR, linestyle='--', label='Fuel limit')

    ax.set_yticks(list(rows.values()))
    ax.set_yticklabels(list(rows.keys()))
    ax.set_xlabel('Event', fontsize=12)
    ax.set_ylabel('Location', fontsize=12)
    ax.set_title(f'Demand trace ({len(trace.events)} events, {len(needed)} needed)',
                 fontsize=14, fontweight='bold')
    ax.grid(True, alpha=0.3, linestyle='--')
    ax.legend(loc='upper right', fontsize=10)

    plt.tight_layout()
    output_path = Path(output_path)
    plt.savefig(output_path, dpi=150, bbox_inches='tight')
    plt.close(fig)

    return str(output_path)


def _row(loc) -> str:
    return loc.name if loc.index is None else f"{loc.name}(*)"


def _row_labels(trace: DemandTrace) -> Dict[str, int]:
    """Row for each written variable, in order of first write; prints go last."""
    order: List[str] = []
    for event in trace.events:
        label = _row(event.target)
        if event.kind == "assign" and label not in order:
            order.append(label)
    if trace.print_events:
        order.append(_row(trace.print_events[0].target))
    return {label: row for row, label in enumerate(order)}
