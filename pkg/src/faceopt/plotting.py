"""Figure rendering for reports; always paired with a CSV of the plotted data."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 150,
}

GOLDEN = 0.618


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no timestamp metadata, so re-rendering the same data gives the same bytes
    fig.savefig(path, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def incumbent_figure(traces: Mapping[str, Sequence[tuple[int, float]]], path: Path,
                     observed: Mapping[str, Sequence[tuple[int, float]]] | None = None,
                     ylabel: str = "target emotion score", width: float = 5.0) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, width * GOLDEN))
        for label, trace in traces.items():
            xs, ys = zip(*trace) if trace else ((), ())
            ax.step(xs, ys, where="post", label=f"{label} best so far")
        for label, pts in (observed or {}).items():
            if pts:
                xs, ys = zip(*pts)
                ax.scatter(xs, ys, s=6, alpha=0.5, label=f"{label} per round")
        ax.set_xlabel("round")
        ax.set_ylabel(ylabel)
        ax.set_ylim(0, 1.02)
        ax.legend(loc="lower right", frameon=False)
        return _save(fig, path)


def correlation_figure(panels: Mapping[str, tuple[Sequence[float], Sequence[float], tuple[float, float] | None]],
                       path: Path, width: float = 7.0) -> Path:
    """One scatter panel per emotion with its regression line when available."""
    n = max(len(panels), 1)
    cols = min(n, 4)
    rows = (n + cols - 1) // cols
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(rows, cols, figsize=(width, width / cols * rows), squeeze=False)
        for ax, (label, (x, y, line)) in zip(axes.flat, panels.items()):
            ax.scatter(x, y, s=10)
            if line is not None and len(x):
                lo, hi = min(x), max(x)
                ax.plot([lo, hi], [line[0] * lo + line[1], line[0] * hi + line[1]], lw=1)
            ax.set_title(label)
            ax.set_xlabel("machine")
            ax.set_ylabel("human")
        for ax in list(axes.flat)[len(panels):]:
            ax.set_visible(False)
        fig.tight_layout()
        return _save(fig, path)
