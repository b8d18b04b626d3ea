"""Figures for CLI reports, rendered off-screen to files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.5),
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    # keep output byte-stable across runs
    "svg.hashsalt": "hyperreg",
    "svg.fonttype": "none",
}


def _save(fig, directory, name: str) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.svg"
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    return path


def slack_histogram(values: Sequence[float], directory, name: str = "slack",
                    title: str = "error function values") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.hist(list(values) or [0.0], bins=20, color="0.35")
        ax.set_xlabel("slack per total color")
        ax.set_ylabel("count")
        ax.set_title(title)
        return _save(fig, directory, name)


def density_bars(labels: Sequence[str], values: Sequence[float], directory,
                 name: str = "densities") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.25 * len(values)), 3.5))
        ax.bar(range(len(values)), values, color="0.35")
        ax.set_xticks(range(len(values)))
        ax.set_xticklabels(labels, rotation=90, fontsize=6)
        ax.set_ylim(0, 1)
        ax.set_ylabel("relative density")
        return _save(fig, directory, name)


def margin_plot(lhs: Sequence[float], rhs: Sequence[float], directory,
                name: str = "margins") -> Path:
    """Each checked inequality as a point (rhs, lhs); valid points sit on or
    below the diagonal."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.scatter(rhs, lhs, s=8, color="0.2")
        top = max([1e-12, *lhs, *rhs])
        ax.plot([0, top], [0, top], lw=0.8, color="0.6")
        ax.set_xlabel("right-hand side")
        ax.set_ylabel("left-hand side")
        return _save(fig, directory, name)


def point_set(points: Sequence[Sequence[int]], highlight: Sequence[Sequence[int]], directory,
              name: str = "configuration") -> Path:
    """Scatter of a 1- or 2-dimensional set with a found configuration marked;
    higher dimensions use the first two coordinates."""
    def xy(p):
        return (p[0], 0) if len(p) == 1 else (p[0], p[1])

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if points:
            xs, ys = zip(*map(xy, points))
            ax.scatter(xs, ys, s=6, color="0.7", label="set")
        if highlight:
            xs, ys = zip(*map(xy, highlight))
            ax.scatter(xs, ys, s=30, color="C3", label="found")
        ax.legend(frameon=False)
        return _save(fig, directory, name)


def schedule_bits(labels: Sequence[str], bits: Sequence[float], directory,
                  name: str = "schedule") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(range(len(bits)), bits, marker="o", color="0.2")
        ax.set_xticks(range(len(bits)))
        ax.set_xticklabels(labels, rotation=60, fontsize=6)
        ax.set_ylabel("bit length")
        return _save(fig, directory, name)
