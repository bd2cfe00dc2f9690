"""Texture-by-density quantile matrices with odds ratios and Fisher p-values."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..cohort import CancerGroup
from ..errors import EmptyReferenceCellError
from .fisher import fisher_exact_two_sided, odds_ratio


@dataclass
class OrMatrixCell:
    texture_quantile: int  # 1-based
    pmd_quantile: int
    n_women: int
    n_events: int
    percent: float
    odds_ratio: float
    fisher_p: float
    undefined: bool = False


@dataclass
class OrMatrix:
    """Per-event-type quantile grid; reference cell is (T1, D1)."""

    event_type: str
    q: int
    cells: list[OrMatrixCell]
    texture_edges: list[float]
    pmd_edges: list[float]
    reference_cell: tuple[int, int] = (1, 1)

    def cell(self, texture_quantile: int, pmd_quantile: int) -> OrMatrixCell:
        return next(c for c in self.cells
                    if (c.texture_quantile, c.pmd_quantile)
                    == (texture_quantile, pmd_quantile))


def quantile_edges(values: np.ndarray, q: int) -> np.ndarray:
    """Inner quantile edges (q-1 of them) of a sample."""
    return np.quantile(np.asarray(values, dtype=float),
                       np.linspace(0, 1, q + 1)[1:-1])


def assign_quantile(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """1-based bins with half-open intervals [edge_i, edge_{i+1}), last closed."""
    return np.searchsorted(edges, np.asarray(values, dtype=float),
                           side="right") + 1


def quantile_or_matrix(texture: np.ndarray, pmd: np.ndarray,
                       groups: list[CancerGroup], q: int = 4,
                       event_types: tuple[CancerGroup, ...] = (CancerGroup.IC,
                                                               CancerGroup.LTC),
                       ) -> dict[str, OrMatrix]:
    """Bin women by healthy-only texture/PMD quantiles and tabulate event odds.

    Returns one matrix per requested event type plus an ``all`` matrix holding
    the population distribution (counts and percentages only).  Odds ratios
    compare each cell against the lowest-texture/lowest-PMD reference cell;
    cells where the ratio is undefined are flagged.
    """
    if q < 2:
        raise ValueError("q must be >= 2")
    texture = np.asarray(texture, dtype=float)
    pmd = np.asarray(pmd, dtype=float)
    groups = list(groups)
    if not (len(texture) == len(pmd) == len(groups)):
        raise ValueError("texture, pmd, and groups must be aligned")
    healthy = np.array([g is CancerGroup.HEALTHY for g in groups])
    if not healthy.any():
        raise EmptyReferenceCellError("no healthy women to define quantiles")

    t_edges = quantile_edges(texture[healthy], q)
    d_edges = quantile_edges(pmd[healthy], q)
    t_bin = assign_quantile(texture, t_edges)
    d_bin = assign_quantile(pmd, d_edges)

    matrices: dict[str, OrMatrix] = {}
    for event_type in (None, *event_types):
        name = "all" if event_type is None else event_type.value
        cells = []
        if event_type is None:
            is_event = np.ones(len(groups), dtype=bool)
        else:
            is_event = np.array([g is event_type for g in groups])
        total_events = int(is_event.sum())

        ref_mask = (t_bin == 1) & (d_bin == 1)
        ref_events = int((ref_mask & is_event).sum())
        ref_non = int(ref_mask.sum()) - ref_events
        if event_type is not None and ref_mask.sum() == 0:
            raise EmptyReferenceCellError("reference cell (T1, D1) holds no women")

        for tq in range(1, q + 1):
            for dq in range(1, q + 1):
                cell_mask = (t_bin == tq) & (d_bin == dq)
                n_women = int(cell_mask.sum())
                n_events = int((cell_mask & is_event).sum())
                percent = 100.0 * n_events / total_events if total_events else 0.0
                if event_type is None:
                    ratio, p, undefined = 1.0, 1.0, False
                elif (tq, dq) == (1, 1):
                    ratio, p, undefined = 1.0, 1.0, False
                else:
                    non_events = n_women - n_events
                    ratio = odds_ratio(n_events, non_events, ref_events, ref_non)
                    undefined = not math.isfinite(ratio)
                    p = fisher_exact_two_sided(n_events, non_events,
                                               ref_events, ref_non)
                cells.append(OrMatrixCell(
                    texture_quantile=tq, pmd_quantile=dq, n_women=n_women,
                    n_events=n_events, percent=percent, odds_ratio=ratio,
                    fisher_p=p, undefined=undefined))
        matrices[name] = OrMatrix(event_type=name, q=q, cells=cells,
                                  texture_edges=t_edges.tolist(),
                                  pmd_edges=d_edges.tolist())
    return matrices
