"""Evaluation battery: AUC/DeLong statistics, flagging, OR matrices, convergence."""

from .convergence import ConvergenceReport, convergence_report
from .fisher import fisher_exact_two_sided, odds_ratio
from .flagging import FlaggingResult, flag_top_fraction
from .metrics import (
    AucResult,
    LabeledScores,
    Positivity,
    compute_auc,
    delong_components,
    delong_test,
    sensitivity_at_specificity,
)
from .ormatrix import OrMatrix, OrMatrixCell, quantile_or_matrix
from .report import EvaluationReport

__all__ = [
    "AucResult", "ConvergenceReport", "EvaluationReport", "FlaggingResult",
    "LabeledScores", "OrMatrix", "OrMatrixCell", "Positivity",
    "compute_auc", "convergence_report", "delong_components", "delong_test",
    "fisher_exact_two_sided", "flag_top_fraction", "odds_ratio",
    "quantile_or_matrix", "sensitivity_at_specificity",
]
