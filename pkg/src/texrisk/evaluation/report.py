"""Evaluation report assembly and serialization (JSON + CSV flattening)."""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .convergence import ConvergenceReport
from .flagging import FlaggingResult
from .metrics import AucResult
from .ormatrix import OrMatrix

SCHEMA_VERSION = "1"


@dataclass
class EvaluationReport:
    """Everything one experiment run reports: AUCs, tests, flagging, matrices."""

    label: str  # R_{train-format -> test-format}^{train -> test}
    aucs: dict[str, AucResult] = field(default_factory=dict)
    delong_tests: list[dict] = field(default_factory=list)
    sensitivity_at_90_specificity: dict[str, float] = field(default_factory=dict)
    flagging: FlaggingResult | None = None
    or_matrices: dict[str, OrMatrix] = field(default_factory=dict)
    convergence: ConvergenceReport | None = None
    extra: dict = field(default_factory=dict)
    created_at: str = field(
        default_factory=lambda: dt.datetime.now(dt.timezone.utc).isoformat())

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "label": self.label,
            "created_at": self.created_at,
            "aucs": {
                key: {
                    "auc": r.auc, "ci_low": r.ci_low, "ci_high": r.ci_high,
                    "positivity": r.positivity.value,
                    "n_positive": r.n_positive, "n_negative": r.n_negative,
                }
                for key, r in self.aucs.items()
            },
            "delong_tests": self.delong_tests,
            "sensitivity_at_90_specificity": self.sensitivity_at_90_specificity,
            "flagging": (None if self.flagging is None else {
                "fraction": self.flagging.fraction,
                "n_flagged": len(self.flagging.flagged_ids),
                "capture_rates": self.flagging.capture_rates,
                "group_totals": self.flagging.group_totals,
            }),
            "or_matrices": {
                name: {
                    "event_type": m.event_type,
                    "q": m.q,
                    "reference_cell": list(m.reference_cell),
                    "texture_edges": m.texture_edges,
                    "pmd_edges": m.pmd_edges,
                    "cells": [asdict(c) for c in m.cells],
                }
                for name, m in self.or_matrices.items()
            },
            "convergence": (None if self.convergence is None
                            else self.convergence.to_json_dict()),
            "extra": self.extra,
        }

    def save_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")
        return path

    def save_auc_csv(self, path: str | Path) -> Path:
        """Table-1-style grid: one row per positivity rule."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label", "positivity", "auc", "ci_low", "ci_high",
                             "n_positive", "n_negative"])
            for key, r in self.aucs.items():
                writer.writerow([self.label, key, f"{r.auc:.6f}",
                                 f"{r.ci_low:.6f}", f"{r.ci_high:.6f}",
                                 r.n_positive, r.n_negative])
        return path

    def save_or_matrix_csv(self, path: str | Path) -> Path:
        """Flattened matrices: one row per (event type, cell)."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["event_type", "texture_quantile", "pmd_quantile",
                             "n_women", "n_events", "percent", "odds_ratio",
                             "fisher_p", "undefined"])
            for matrix in self.or_matrices.values():
                for c in matrix.cells:
                    writer.writerow([matrix.event_type, c.texture_quantile,
                                     c.pmd_quantile, c.n_women, c.n_events,
                                     f"{c.percent:.4f}", f"{c.odds_ratio:.6g}",
                                     f"{c.fisher_p:.6g}", c.undefined])
        return path
