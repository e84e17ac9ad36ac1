"""Render ranking and benchmark reports as figures next to the delimited output."""

from __future__ import annotations

from typing import Sequence

from .model import RelevanceScore


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def ranking_figure(
    ranked: Sequence[tuple[int, RelevanceScore]],
    path,
    title: str = "Author ranking",
    top: int = 20,
) -> None:
    """Bar chart of the top-ranked authors, written to `path`.

    Mirrors the report tables: rows come in rank order and only the first
    `top` survive, so huge author lists stay readable.
    """
    plt = _pyplot()
    rows = list(ranked[:top])
    labels = [s.label or str(s.subject_id) for _, s in rows]
    values = [s.score for _, s in rows]
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(rows) + 2), 4.5))
    ax.bar(range(len(rows)), values, color="#33658a")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("score")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def bench_figure(rows: Sequence[tuple[str, float]], path, title: str, unit: str = "s") -> None:
    """Horizontal bar chart of labelled timings or factors."""
    plt = _pyplot()
    labels = [name for name, _ in rows]
    values = [value for _, value in rows]
    fig, ax = plt.subplots(figsize=(7, max(2.5, 0.45 * len(rows) + 1.5)))
    ax.barh(range(len(rows)), values, color="#86bbd8")
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels(labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel(unit)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
