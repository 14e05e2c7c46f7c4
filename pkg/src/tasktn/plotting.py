"""Matplotlib figures for contraction reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["plot_peak_memory", "plot_flop"]

_STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.2),
}


def _grouped_bars(ax, groups, series, values, colors):
    width = 0.8 / max(len(series), 1)
    for j, s in enumerate(series):
        xs = [i + (j - (len(series) - 1) / 2) * width for i in range(len(groups))]
        ys = [values.get((g, s), 0) for g in groups]
        bars = ax.bar(xs, ys, width, label=s, color=colors[j % len(colors)])
        for b, y in zip(bars, ys):
            if y:
                ax.annotate(f"{y:.3g}", (b.get_x() + b.get_width() / 2, y), ha="center", va="bottom", fontsize=7)
    ax.set_xticks(range(len(groups)))
    ax.set_xticklabels(groups)


def plot_peak_memory(rows: Sequence[dict], path) -> Path:
    """Peak live memory per configuration, with and without deletion."""
    groups = list(dict.fromkeys(r["config"] for r in rows))
    values = {(r["config"], "with deletion" if r["deletion"] else "no deletion"): r["peak_bytes"] / 1e6 for r in rows}
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        _grouped_bars(ax, groups, ["no deletion", "with deletion"], values, ["#c44e52", "#dd8452"])
        ax.set_ylabel("peak memory (MB)")
        ax.legend(frameon=False)
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path, dpi=150)
        plt.close(fig)
    return path


def plot_flop(rows: Sequence[dict], path) -> Path:
    """Executed matmul FLOP per configuration."""
    seen = {}
    for r in rows:
        seen.setdefault(r["config"], r["flop"])
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        _grouped_bars(ax, list(seen), ["flop"], {(k, "flop"): v for k, v in seen.items()}, ["#4c72b0"])
        ax.set_ylabel("executed FLOP")
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path, dpi=150)
        plt.close(fig)
    return path
