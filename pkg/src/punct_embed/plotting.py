"""Figures for similarity reports, rendered headless to PNG files."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

# no timestamps or version strings, so reruns are byte-identical
PNG_METADATA = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def plot_similarity_histogram(report, path, title: str | None = None) -> Path:
    counts, edges = report.histogram()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge", color="#3F51B5", edgecolor="white", linewidth=0.5)
    ax.set_xlim(-1, 1)
    ax.set_xlabel("cosine similarity (with vs without punctuation)")
    ax.set_ylabel("samples")
    ax.set_title(title or f"{report.variant}: mean {report.mean:.3f}, min {report.min:.3f}", fontsize=10)
    fig.tight_layout()
    return _save(fig, path)


def plot_case_study(rows, path) -> Path:
    """Grouped bars, one group per pair and one bar per variant."""
    variants = list(rows[0].similarity) if rows else []
    x = np.arange(len(rows))
    width = 0.8 / max(1, len(variants))
    fig, ax = plt.subplots(figsize=(max(5, 0.45 * len(rows) + 1.5), 3.2))
    for i, v in enumerate(variants):
        ax.bar(x + (i - (len(variants) - 1) / 2) * width, [r.similarity[v] for r in rows], width, label=v)
    ax.set_xticks(x)
    ax.set_xticklabels([r.id for r in rows], rotation=60, fontsize=7)
    ax.set_ylim(min(0.0, *(s for r in rows for s in r.similarity.values())) if rows else 0, 1.05)
    ax.set_ylabel("cosine similarity")
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    return _save(fig, path)
