"""Plan reports: the tab-separated state table and diagnostic figures.

Figures are rendered with the Agg backend at fixed dpi and metadata so that
identical inputs produce byte-identical PNG files; the report path must not
break the pipeline's run-twice reproducibility.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .compositor import CoarseVideo
from .script import MotionScript, resolve_timeline
from .trajectory import FrameStateTable

_PNG_METADATA = {"Software": "motionscaffold"}


def write_state_table(table: FrameStateTable, path) -> None:
    """Dump frame, entity_id, x, y, s, r, alpha rows; floats keep full precision."""
    lines = ["frame\tentity_id\tx\ty\ts\tr\talpha"]
    for frame, entity_id, state in table.rows():
        lines.append(
            f"{frame}\t{entity_id}\t{state.x!r}\t{state.y!r}\t{state.s!r}"
            f"\t{state.r!r}\t{state.alpha!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def plot_trajectories(script: MotionScript, table: FrameStateTable, path) -> None:
    """Planned (x, y) path per entity with milestone markers, screen-oriented."""
    milestone_frames = resolve_timeline(script)
    fig, ax = plt.subplots(figsize=(6.0, 6.0), dpi=100)
    for k, entity_id in enumerate(table.entity_ids):
        xs = [row[k].x for row in table.states]
        ys = [row[k].y for row in table.states]
        (line,) = ax.plot(xs, ys, linewidth=1.5, label=entity_id)
        ax.plot(
            [xs[f] for f in milestone_frames],
            [ys[f] for f in milestone_frames],
            linestyle="none", marker="o", markersize=6, color=line.get_color(),
        )
    ax.set_xlim(-0.05, 1.05)
    ax.set_ylim(1.05, -0.05)  # y grows downward on screen
    ax.set_xlabel("x (normalized)")
    ax.set_ylabel("y (normalized)")
    ax.set_title(f"planned trajectories ({table.total_frames} frames)")
    if table.entity_ids:
        ax.legend(loc="upper right")
    ax.grid(True, alpha=0.3)
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)


def plot_occupancy_coverage(video: CoarseVideo, path) -> None:
    """Fraction of pixels covered by the occupancy map, per frame."""
    coverage = [float(occ.data.mean()) for occ in video.occupancy]
    fig, ax = plt.subplots(figsize=(6.0, 3.0), dpi=100)
    ax.plot(range(len(coverage)), coverage, marker=".", linewidth=1.0)
    ax.set_xlabel("frame")
    ax.set_ylabel("occupancy fraction")
    ax.set_ylim(bottom=0.0)
    ax.set_title("entity coverage per frame")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)
