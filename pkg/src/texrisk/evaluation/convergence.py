"""Convergence-point analysis of per-fold validation AUC traces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyTraceError


@dataclass
class ConvergenceReport:
    per_fold_traces: list[list[tuple[int, float]]]
    cp_epoch: int
    spread_at_cp: float
    fold_argmax_epochs: list[int]

    def to_json_dict(self) -> dict:
        return {
            "cp_epoch": self.cp_epoch,
            "spread_at_cp": self.spread_at_cp,
            "fold_argmax_epochs": self.fold_argmax_epochs,
            "per_fold_traces": [[[e, a] for e, a in t] for t in self.per_fold_traces],
        }


def convergence_report(traces: list[list[tuple[int, float]]]) -> ConvergenceReport:
    """Mean convergence point and the fold-AUC spread there.

    Shorter traces are padded with their last value onto the common epoch
    grid.  The convergence point is the mean of per-fold argmax epochs (first
    maximum), rounded to the nearest grid epoch; the spread is max-min of the
    fold AUCs at that epoch.
    """
    if not traces or any(len(t) == 0 for t in traces):
        raise EmptyTraceError("every fold needs a non-empty AUC trace")
    epochs = sorted({e for trace in traces for e, _ in trace})
    grid = []
    for trace in traces:
        lookup = dict(trace)
        padded, last = [], None
        for epoch in epochs:
            last = lookup.get(epoch, last if last is not None else trace[0][1])
            padded.append(last)
        grid.append(padded)
    grid = np.asarray(grid, dtype=float)

    argmax_epochs = [epochs[int(np.argmax(row))] for row in grid]
    mean_epoch = float(np.mean(argmax_epochs))
    cp_epoch = int(epochs[int(np.argmin(np.abs(np.asarray(epochs) - mean_epoch)))])
    at_cp = grid[:, epochs.index(cp_epoch)]
    return ConvergenceReport(
        per_fold_traces=[list(t) for t in traces],
        cp_epoch=cp_epoch,
        spread_at_cp=float(at_cp.max() - at_cp.min()),
        fold_argmax_epochs=argmax_epochs,
    )
