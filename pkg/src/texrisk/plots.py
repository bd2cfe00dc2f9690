"""Report figures: convergence traces, ROC curves, and OR-matrix heatmaps.

Rendered with matplotlib (Agg) to SVG files alongside the delimited report
output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation.convergence import ConvergenceReport
from .evaluation.metrics import LabeledScores, Positivity
from .evaluation.ormatrix import OrMatrix
from .evaluation.report import EvaluationReport


def plot_convergence(report: ConvergenceReport, path: str | Path,
                     title: str = "Validation AUC per fold") -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, trace in enumerate(report.per_fold_traces):
        epochs = [e for e, _ in trace]
        aucs = [a for _, a in trace]
        ax.plot(epochs, aucs, label=f"fold {i + 1}", linewidth=1.2)
    ax.axvline(report.cp_epoch, color="black", linestyle="--", linewidth=1,
               label=f"CP = {report.cp_epoch}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("validation AUC")
    ax.set_title(f"{title} (spread at CP: {report.spread_at_cp:.3f})")
    ax.legend(loc="lower right", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def roc_points(scores: np.ndarray, labels: np.ndarray
               ) -> tuple[np.ndarray, np.ndarray]:
    """FPR/TPR pairs over all score thresholds, descending."""
    order = np.argsort(-scores, kind="mergesort")
    labels = labels[order].astype(float)
    tps = np.concatenate([[0.0], np.cumsum(labels)])
    fps = np.concatenate([[0.0], np.cumsum(1.0 - labels)])
    return fps / max(fps[-1], 1.0), tps / max(tps[-1], 1.0)


def plot_roc(labeled: LabeledScores, path: str | Path,
             positivities: tuple[Positivity, ...] = (Positivity.IC,
                                                     Positivity.LTC,
                                                     Positivity.IC_OR_LTC),
             title: str = "ROC") -> Path:
    fig, ax = plt.subplots(figsize=(5, 5))
    for positivity in positivities:
        scores, labels = labeled.arrays(positivity)
        if labels.sum() == 0 or labels.all():
            continue
        fpr, tpr = roc_points(scores, labels)
        auc = float(np.trapezoid(tpr, fpr))
        ax.plot(fpr, tpr, label=f"{positivity.value} (AUC {auc:.3f})",
                linewidth=1.2)
    ax.plot([0, 1], [0, 1], color="grey", linestyle=":", linewidth=0.8)
    ax.set_xlabel("1 - specificity")
    ax.set_ylabel("sensitivity")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_or_matrix(matrix: OrMatrix, path: str | Path) -> Path:
    q = matrix.q
    percent = np.zeros((q, q))
    annot = np.empty((q, q), dtype=object)
    for cell in matrix.cells:
        row = q - cell.texture_quantile  # texture grows upward
        col = cell.pmd_quantile - 1
        percent[row, col] = cell.percent
        if matrix.event_type == "all":
            annot[row, col] = f"{cell.percent:.1f}%"
        elif cell.undefined:
            annot[row, col] = f"{cell.percent:.1f}%\nOR n/a"
        else:
            annot[row, col] = (f"{cell.percent:.1f}%\nOR {cell.odds_ratio:.2f}"
                               f"\n(p={cell.fisher_p:.3g})")
    fig, ax = plt.subplots(figsize=(6, 5.5))
    im = ax.imshow(percent, cmap="viridis")
    for row in range(q):
        for col in range(q):
            ax.text(col, row, annot[row, col], ha="center", va="center",
                    fontsize=7, color="white")
    ax.set_xticks(range(q), [f"D{i + 1}" for i in range(q)])
    ax.set_yticks(range(q), [f"T{q - i}" for i in range(q)])
    ax.set_xlabel("PMD quantile")
    ax.set_ylabel("texture quantile")
    ax.set_title(f"Distribution: {matrix.event_type}")
    fig.colorbar(im, ax=ax, label="% of group")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def render_report_figures(report: EvaluationReport, out_dir: str | Path
                          ) -> list[Path]:
    """Emit every figure the report supports; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if report.convergence is not None:
        written.append(plot_convergence(report.convergence,
                                        out_dir / "convergence.svg"))
    for name, matrix in report.or_matrices.items():
        written.append(plot_or_matrix(matrix, out_dir / f"or_matrix_{name}.svg"))
    return written
