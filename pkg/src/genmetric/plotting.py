"""Line-chart emission for monitoring output.

Charts render through matplotlib to self-contained SVG files; a CSV twin with
the exact series values is written next to each figure so the plotted data
stays machine-readable.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import IoError, ValidationError
from .report import format_float


def emit_plot(
    series,
    path,
    title: str = "",
    xlabel: str = "epoch",
    ylabel: str = "value",
) -> Path:
    """Write an SVG line chart of (x, y) points plus a CSV twin.

    Returns the CSV twin path. The SVG uses a fixed hash salt so repeated
    renders of the same data produce stable element ids.
    """
    points = [(float(x), float(y)) for x, y in series]
    if not points:
        raise ValidationError("plot needs at least one point")
    path = Path(path)

    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    with plt.rc_context({"svg.hashsalt": "genmetric"}):
        fig, ax = plt.subplots(figsize=(6.0, 3.7))
        ax.plot(xs, ys, marker="o", markersize=4, linewidth=1.2, color="#2060a0")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.spines["right"].set_visible(False)
        ax.spines["top"].set_visible(False)
        fig.tight_layout()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc
        finally:
            plt.close(fig)

    csv_path = path.with_suffix(".csv")
    lines = [f"{xlabel},{ylabel}"]
    lines += [f"{format_float(x)},{format_float(y)}" for x, y in points]
    try:
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {csv_path}: {exc}") from exc
    return csv_path
