"""AUC with DeLong variance, paired/unpaired DeLong tests, and sensitivity at
fixed specificity."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import norm

from ..cohort import CancerGroup
from ..errors import DegenerateClassesError, PairingMismatchError


class Positivity(str, Enum):
    IC = "IC"
    LTC = "LTC"
    IC_OR_LTC = "IC_or_LTC"
    ALL_CANCERS = "AllCancers"

    def is_positive(self, group: CancerGroup) -> bool:
        if self is Positivity.IC:
            return group is CancerGroup.IC
        if self is Positivity.LTC:
            return group is CancerGroup.LTC
        if self is Positivity.IC_OR_LTC:
            return group in (CancerGroup.IC, CancerGroup.LTC)
        return group is not CancerGroup.HEALTHY


@dataclass
class LabeledScores:
    """Per-woman scores with outcome groups; the unit of every evaluation op."""

    entries: list[tuple[str, float, CancerGroup]]

    def __post_init__(self):
        for _, score, _ in self.entries:
            if not np.isfinite(score):
                raise ValueError("scores must be finite")

    def arrays(self, positivity: Positivity) -> tuple[np.ndarray, np.ndarray]:
        scores = np.array([s for _, s, _ in self.entries], dtype=float)
        labels = np.array([positivity.is_positive(g) for _, _, g in self.entries])
        return scores, labels

    def woman_ids(self) -> list[str]:
        return [w for w, _, _ in self.entries]


@dataclass
class AucResult:
    auc: float
    ci_low: float
    ci_high: float
    positivity: Positivity
    n_positive: int
    n_negative: int
    variance: float


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.size, dtype=float)
    xs = x[order]
    i = 0
    while i < x.size:
        j = i
        while j < x.size and xs[j] == xs[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j + 1)
        i = j
    return ranks


def delong_components(scores: np.ndarray, labels: np.ndarray
                      ) -> tuple[float, np.ndarray, np.ndarray]:
    """AUC plus the DeLong structural components V10 (per positive) and V01."""
    pos = scores[labels]
    neg = scores[~labels]
    m, n = pos.size, neg.size
    if m == 0 or n == 0:
        raise DegenerateClassesError("need at least one positive and one negative")
    r_all = _midranks(np.concatenate([pos, neg]))
    r_pos = _midranks(pos)
    r_neg = _midranks(neg)
    auc = (r_all[:m].sum() - m * (m + 1) / 2.0) / (m * n)
    v10 = (r_all[:m] - r_pos) / n
    v01 = 1.0 - (r_all[m:] - r_neg) / m
    return float(auc), v10, v01


def delong_variance(v10: np.ndarray, v01: np.ndarray) -> float:
    var10 = v10.var(ddof=1) / v10.size if v10.size > 1 else 0.0
    var01 = v01.var(ddof=1) / v01.size if v01.size > 1 else 0.0
    return float(var10 + var01)


def compute_auc(scores: LabeledScores, positivity: Positivity,
                confidence: float = 0.95) -> AucResult:
    """AUC (normalized Mann-Whitney, ties counted 1/2) with a DeLong-variance CI."""
    values, labels = scores.arrays(positivity)
    auc, v10, v01 = delong_components(values, labels)
    variance = delong_variance(v10, v01)
    z = norm.ppf(0.5 + confidence / 2.0)
    half = z * np.sqrt(variance)
    return AucResult(
        auc=auc,
        ci_low=float(max(0.0, auc - half)),
        ci_high=float(min(1.0, auc + half)),
        positivity=positivity,
        n_positive=int(labels.sum()),
        n_negative=int((~labels).sum()),
        variance=variance,
    )


def delong_test(a: LabeledScores, b: LabeledScores, positivity: Positivity,
                paired: bool = True) -> tuple[float, float, float]:
    """Two-sided DeLong test of AUC(a) vs AUC(b); returns (p, auc_a, auc_b).

    Paired requires both score sets to cover the identical women; entries are
    aligned by woman_id.  Unpaired treats the cohorts as independent.
    """
    if paired:
        ids_a = a.woman_ids()
        ids_b = b.woman_ids()
        if sorted(ids_a) != sorted(ids_b):
            raise PairingMismatchError("paired test requires identical woman sets")
        order_a = np.argsort(np.asarray(ids_a))
        order_b = np.argsort(np.asarray(ids_b))
        scores_a, labels_a = a.arrays(positivity)
        scores_b, labels_b = b.arrays(positivity)
        scores_a, labels_a = scores_a[order_a], labels_a[order_a]
        scores_b, labels_b = scores_b[order_b], labels_b[order_b]
        if not np.array_equal(labels_a, labels_b):
            raise PairingMismatchError("paired test requires identical labels")
        auc_a, v10_a, v01_a = delong_components(scores_a, labels_a)
        auc_b, v10_b, v01_b = delong_components(scores_b, labels_b)
        var_a = delong_variance(v10_a, v01_a)
        var_b = delong_variance(v10_b, v01_b)
        m, n = v10_a.size, v01_a.size
        cov = 0.0
        if m > 1:
            cov += np.cov(v10_a, v10_b, ddof=1)[0, 1] / m
        if n > 1:
            cov += np.cov(v01_a, v01_b, ddof=1)[0, 1] / n
        var_diff = var_a + var_b - 2.0 * cov
    else:
        scores_a, labels_a = a.arrays(positivity)
        scores_b, labels_b = b.arrays(positivity)
        auc_a, v10_a, v01_a = delong_components(scores_a, labels_a)
        auc_b, v10_b, v01_b = delong_components(scores_b, labels_b)
        var_diff = delong_variance(v10_a, v01_a) + delong_variance(v10_b, v01_b)

    diff = auc_a - auc_b
    if var_diff <= 0:
        p = 1.0 if diff == 0 else 0.0
    else:
        z = diff / np.sqrt(var_diff)
        p = float(2.0 * norm.sf(abs(z)))
    return p, float(auc_a), float(auc_b)


def sensitivity_at_specificity(scores: LabeledScores, positivity: Positivity,
                               specificity: float) -> float:
    """Sensitivity at the smallest observed threshold achieving the target specificity.

    The threshold is the smallest negative score below which at least
    ``specificity`` of negatives fall; positives scoring at or above it count
    as detected.  If no negative score achieves the target, the threshold sits
    just above the maximum negative score.
    """
    if not 0.0 < specificity < 1.0:
        raise ValueError("specificity must lie in (0, 1)")
    values, labels = scores.arrays(positivity)
    pos = values[labels]
    neg = values[~labels]
    if pos.size == 0 or neg.size == 0:
        raise DegenerateClassesError("need both classes for sensitivity")
    for threshold in np.unique(neg):
        if (neg < threshold).sum() / neg.size >= specificity:
            return float((pos >= threshold).mean())
    return float((pos > neg.max()).mean())
