"""Figures written next to the delimited comparison output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from reviewrag.bench import LOWER_IS_BETTER, STRATEGY_LABELS, ComparisonTable  # noqa: E402


def plot_comparison(table: ComparisonTable, path) -> Path:
    """Grouped bars, one panel per metric, one group per task, one bar per strategy."""
    path = Path(path)
    metrics = list(dict.fromkeys(r.metric for r in table.rows))
    fig, axes = plt.subplots(1, len(metrics), figsize=(4.2 * len(metrics), 3.6), squeeze=False)
    width = 0.8 / max(len(table.strategies), 1)
    for ax, metric in zip(axes[0], metrics):
        rows = [r for r in table.rows if r.metric == metric]
        x = np.arange(len(rows))
        for i, s in enumerate(table.strategies):
            vals = [np.nan if r.values.get(s) is None else r.values[s] for r in rows]
            ax.bar(x + (i - (len(table.strategies) - 1) / 2) * width, vals, width,
                   label=STRATEGY_LABELS.get(s, s))
        ax.set_xticks(x)
        ax.set_xticklabels([f"Task {r.task_id}" for r in rows])
        ax.set_title(metric + (" (lower is better)" if metric in LOWER_IS_BETTER else ""))
        ax.grid(axis="y", alpha=0.3)
    axes[0][0].legend(fontsize="small", frameon=False)
    fig.suptitle(f"{table.model} / {table.split}")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(results, metric: str, path) -> Path:
    """Metric against k, one line per ranker."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    by_ranker: dict = {}
    for cfg, report in results:
        by_ranker.setdefault(cfg.ranker, []).append((cfg.k, report.metrics.get(metric)))
    for ranker, pts in by_ranker.items():
        pts.sort()
        ax.plot([k for k, _ in pts], [np.nan if v is None else v for _, v in pts], marker="o", label=ranker)
    ax.set_xlabel("k")
    ax.set_ylabel(metric)
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
