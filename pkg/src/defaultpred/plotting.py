"""Report figures rendered to PNG files with the Agg backend."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .metrics import CSV_COLUMNS

# no Software/date chunks, so reruns are byte-identical
_PNG_METADATA = {"Software": None}
_LABELS = {"pr": "Pr", "re": "Re", "f1": "F1", "type1": "Type-I", "type2": "Type-II", "bacc": "BACC"}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    FigureCanvasAgg(fig)
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_METADATA)
    return path


def metrics_figure(table: dict[str, dict[str, float]], title: str, path, columns=("pr", "re", "f1", "bacc")) -> Path:
    """Grouped bars, one group per method, for a ``{method: {metric: value}}`` table."""
    methods = list(table)
    columns = [c for c in columns if c in CSV_COLUMNS]
    fig = Figure(figsize=(max(6.0, 0.8 * len(methods) + 2), 3.6))
    ax = fig.add_subplot()
    width = 0.8 / max(len(columns), 1)
    x = np.arange(len(methods))
    for k, col in enumerate(columns):
        vals = [table[m].get(col, np.nan) for m in methods]
        ax.bar(x + (k - (len(columns) - 1) / 2) * width, vals, width, label=_LABELS[col])
    ax.set_xticks(x)
    ax.set_xticklabels(methods)
    ax.set_ylim(0, 1)
    ax.set_ylabel("score")
    ax.set_title(title)
    ax.legend(ncol=len(columns), fontsize=8, loc="upper right")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def pd_figure(report, path) -> Path:
    """Estimated vs realized segment PD for both estimators."""
    real = np.array([r.realized_pd for r in report.rows])
    base = np.array([r.baseline_pd for r in report.rows])
    model = np.array([r.model_pd for r in report.rows])
    fig = Figure(figsize=(4.8, 4.4))
    ax = fig.add_subplot()
    hi = max(float(np.max(np.concatenate([real, base, model]))), 1e-3) * 1.05
    ax.plot([0, hi], [0, hi], color="0.6", lw=1)
    me = report.mean_error
    ax.scatter(real, base, s=12, alpha=0.7, label=f"baseline (mean error {me['baseline']:.4f})")
    ax.scatter(real, model, s=12, alpha=0.7, marker="^", label=f"model (mean error {me['model']:.4f})")
    ax.set_xlim(0, hi)
    ax.set_ylim(0, hi)
    ax.set_xlabel("realized PD")
    ax.set_ylabel("estimated PD")
    ax.set_title(f"{report.granularity} segmentation, {report.n_segments} segments")
    ax.legend(fontsize=8, loc="upper left")
    fig.tight_layout()
    return _save(fig, path)
