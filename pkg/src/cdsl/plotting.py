"""SVG charts for run reports.

Output bytes are deterministic: the SVG id salt is fixed, the date metadata
is dropped and text is kept as text rather than glyph paths.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "svg.hashsalt": "cdsl",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
ACTUAL_COLOR = "#1f77b4"
PREDICTED_COLOR = "#ff7f0e"


def _save(fig, path) -> None:
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)


def emit_bar_chart(pairs: Sequence[tuple[str, float, float]], path,
                   title: str = "Actual and predicted medals") -> None:
    """Grouped bars of actual (left) and predicted (right) values per label."""
    for label, actual, predicted in pairs:
        if actual < 0 or predicted < 0:
            raise ValueError(f"negative value for {label!r}")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(pairs) + 2), 3.2))
        xs = list(range(len(pairs)))
        width = 0.38
        ax.bar([x - width / 2 for x in xs], [p[1] for p in pairs], width,
               color=ACTUAL_COLOR, label="actual")
        ax.bar([x + width / 2 for x in xs], [p[2] for p in pairs], width,
               color=PREDICTED_COLOR, label="predicted")
        ax.set_xticks(xs)
        ax.set_xticklabels([p[0] for p in pairs], rotation=45, ha="right")
        ax.set_ylabel("medals")
        ax.set_title(title)
        if pairs:
            ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def emit_ranking_chart(values: Sequence[tuple[str, float]], path,
                       title: str = "Average team sentiment score") -> None:
    """Horizontal bars, first entry on top."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 0.35 * len(values) + 1.2))
        labels = [v[0] for v in values][::-1]
        ax.barh(range(len(values)), [v[1] for v in values][::-1], color=ACTUAL_COLOR)
        ax.set_yticks(range(len(values)))
        ax.set_yticklabels(labels)
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def emit_heat_strip(values: Mapping[str, float], path,
                    title: str = "Mean sentiment by country") -> None:
    """One-row heat map of per-country means on a diverging scale."""
    names = list(values)
    data = [[values[n] for n in names]]
    bound = max((abs(v) for v in data[0]), default=1.0) or 1.0
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.55 * len(names) + 1.5), 1.9))
        if names:
            im = ax.imshow(data, cmap="RdYlGn", vmin=-bound, vmax=bound, aspect="auto")
            ax.set_xticks(range(len(names)))
            ax.set_xticklabels(names, rotation=45, ha="right")
            fig.colorbar(im, ax=ax, fraction=0.05)
        ax.set_yticks([])
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)
