"""AUC, DeLong, and sensitivity tests against independent oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from texrisk.cohort import CancerGroup
from texrisk.errors import DegenerateClassesError, PairingMismatchError
from texrisk.evaluation.metrics import (
    LabeledScores,
    Positivity,
    compute_auc,
    delong_components,
    delong_test,
    sensitivity_at_specificity,
)

H = CancerGroup.HEALTHY
IC = CancerGroup.IC
LTC = CancerGroup.LTC
SDC = CancerGroup.SDC


def labeled(scores, labels, group=IC):
    return LabeledScores([
        (f"w{i:04d}", float(s), group if y else H)
        for i, (s, y) in enumerate(zip(scores, labels))
    ])


def brute_force_auc(scores, labels):
    """Pair counting: wins + half ties over all positive-negative pairs."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestAuc:
    def test_spec_example(self):
        scores, labels = [0.1, 0.35, 0.4, 0.8], [0, 1, 0, 1]
        assert brute_force_auc(scores, labels) == 0.75
        result = compute_auc(labeled(scores, labels), Positivity.IC)
        assert result.auc == pytest.approx(0.75)

    def test_perfect_separation(self):
        result = compute_auc(labeled([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]),
                             Positivity.IC)
        assert result.auc == 1.0

    def test_all_ties(self):
        result = compute_auc(labeled([0.5] * 6, [0, 1, 0, 1, 0, 1]),
                             Positivity.IC)
        assert result.auc == pytest.approx(0.5)

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_brute_force_on_random_instances(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 200))
        # quantized scores force ties
        scores = np.round(rng.random(n), 2)
        labels = rng.integers(0, 2, n)
        if labels.sum() in (0, n):
            labels[0], labels[-1] = 0, 1
        result = compute_auc(labeled(scores, labels), Positivity.IC)
        assert result.auc == pytest.approx(brute_force_auc(scores, labels))

    @given(st.lists(st.floats(min_value=-100, max_value=100,
                              allow_nan=False), min_size=4, max_size=60),
           st.floats(min_value=0.1, max_value=5.0))
    @settings(max_examples=60, deadline=None)
    def test_invariant_under_monotone_transform(self, raw_scores, scale):
        # quantize so the affine shift cannot merge distinct values in float
        raw_scores = [round(s, 4) for s in raw_scores]
        labels = [i % 2 for i in range(len(raw_scores))]
        base = compute_auc(labeled(raw_scores, labels), Positivity.IC).auc
        transformed = [scale * s + 3.0 for s in raw_scores]  # strictly monotone
        after = compute_auc(labeled(transformed, labels), Positivity.IC).auc
        assert base == pytest.approx(after)
        curved = list(np.tanh(np.asarray(raw_scores) / 200.0))  # also monotone
        assert compute_auc(labeled(curved, labels),
                           Positivity.IC).auc == pytest.approx(base)

    def test_ci_ordering_and_clamping(self):
        result = compute_auc(labeled([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]),
                             Positivity.IC)
        assert 0.0 <= result.ci_low <= result.auc <= result.ci_high <= 1.0

    def test_degenerate_classes_raise(self):
        with pytest.raises(DegenerateClassesError):
            compute_auc(labeled([0.5, 0.6], [1, 1]), Positivity.IC)

    def test_positivity_rules(self):
        entries = [("a", 0.9, IC), ("b", 0.8, LTC), ("c", 0.2, H),
                   ("d", 0.3, H), ("e", 0.7, SDC)]
        scores = LabeledScores(entries)
        ic = compute_auc(scores, Positivity.IC)
        assert (ic.n_positive, ic.n_negative) == (1, 4)
        both = compute_auc(scores, Positivity.IC_OR_LTC)
        assert (both.n_positive, both.n_negative) == (2, 3)
        all_c = compute_auc(scores, Positivity.ALL_CANCERS)
        assert (all_c.n_positive, all_c.n_negative) == (3, 2)


def bootstrap_delong_oracle(scores_a, scores_b, labels, n_resamples=10000,
                            seed=0):
    """Stratified bootstrap of the paired AUC difference; normal-theory p.

    Resamples positives and negatives with replacement (keeping the pairing
    of the two scorers), estimates the SE of the AUC difference, and converts
    the observed difference to a two-sided p.  Independent of the DeLong
    structural-component machinery.
    """
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels, dtype=bool)
    pos_idx = np.flatnonzero(labels)
    neg_idx = np.flatnonzero(~labels)
    diffs = np.empty(n_resamples)
    for i in range(n_resamples):
        p = rng.choice(pos_idx, size=pos_idx.size, replace=True)
        n = rng.choice(neg_idx, size=neg_idx.size, replace=True)
        idx = np.concatenate([p, n])
        y = np.concatenate([np.ones(p.size, bool), np.zeros(n.size, bool)])
        diffs[i] = (fast_auc(scores_a[idx], y) - fast_auc(scores_b[idx], y))
    observed = fast_auc(scores_a, labels) - fast_auc(scores_b, labels)
    se = diffs.std(ddof=1)
    if se == 0:
        return 1.0 if observed == 0 else 0.0
    return float(2.0 * norm.sf(abs(observed / se)))


def fast_auc(scores, labels):
    from scipy.stats import rankdata

    ranks = rankdata(scores, method="average")
    m = labels.sum()
    n = len(scores) - m
    return (ranks[labels].sum() - m * (m + 1) / 2) / (m * n)


class TestDelong:
    def test_identical_scores_give_p_one(self):
        scores = labeled([0.2, 0.9, 0.4, 0.7, 0.1], [0, 1, 0, 1, 0])
        p, auc_a, auc_b = delong_test(scores, scores, Positivity.IC, paired=True)
        assert p == 1.0
        assert auc_a == auc_b

    def test_paired_requires_same_women(self):
        a = labeled([0.2, 0.9], [0, 1])
        b = LabeledScores([("x1", 0.3, H), ("x2", 0.8, IC)])
        with pytest.raises(PairingMismatchError):
            delong_test(a, b, Positivity.IC, paired=True)

    def test_paired_alignment_by_woman_id(self):
        a = LabeledScores([("w1", 0.2, H), ("w2", 0.9, IC), ("w3", 0.4, H)])
        b = LabeledScores([("w3", 0.4, H), ("w1", 0.2, H), ("w2", 0.9, IC)])
        p, auc_a, auc_b = delong_test(a, b, Positivity.IC, paired=True)
        assert p == 1.0 and auc_a == auc_b

    def test_unpaired_disjoint_cohorts(self):
        rng = np.random.default_rng(0)
        a = labeled(rng.random(40), rng.integers(0, 2, 40))
        b = labeled(rng.random(25), rng.integers(0, 2, 25))
        p, _, _ = delong_test(a, b, Positivity.IC, paired=False)
        assert 0.0 <= p <= 1.0

    def test_variance_non_negative(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(10, 60))
            scores = rng.random(n)
            labels = rng.integers(0, 2, n)
            if labels.sum() in (0, n):
                continue
            result = compute_auc(labeled(scores, labels), Positivity.IC)
            assert result.variance >= 0.0

    @pytest.mark.slow
    @pytest.mark.parametrize("comparison_seed", range(20))
    def test_paired_p_close_to_bootstrap_oracle(self, comparison_seed):
        # 200-woman synthetic cohort; two scorers of different signal strength
        rng = np.random.default_rng(comparison_seed)
        n = 200
        labels = np.zeros(n, dtype=bool)
        labels[:60] = True
        latent = rng.normal(size=n) + 1.1 * labels
        strength_b = 0.25 + 0.5 * rng.random()
        scores_a = latent + rng.normal(0, 0.8, n)
        scores_b = strength_b * latent + rng.normal(0, 1.1, n)
        a = LabeledScores([(f"w{i}", float(s), IC if y else H)
                           for i, (s, y) in enumerate(zip(scores_a, labels))])
        b = LabeledScores([(f"w{i}", float(s), IC if y else H)
                           for i, (s, y) in enumerate(zip(scores_b, labels))])
        p, _, _ = delong_test(a, b, Positivity.IC, paired=True)
        p_oracle = bootstrap_delong_oracle(scores_a, scores_b, labels,
                                           seed=comparison_seed)
        assert abs(p - p_oracle) <= 0.02


class TestSensitivityAtSpecificity:
    def test_perfect_separation_is_one(self):
        scores = labeled([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
        for spec in (0.5, 0.9, 0.99):
            assert sensitivity_at_specificity(scores, Positivity.IC, spec) == 1.0

    def test_anti_separation_is_zero(self):
        scores = labeled([0.8, 0.9, 0.1, 0.2], [0, 0, 1, 1])
        assert sensitivity_at_specificity(scores, Positivity.IC, 0.9) == 0.0

    def test_hand_enumerated_example(self):
        # negatives at 0.0..0.9 in steps of 0.1; positives 0.85 and 0.95
        negatives = [round(0.1 * i, 1) for i in range(10)]
        scores = labeled(negatives + [0.85, 0.95], [0] * 10 + [1, 1])
        # oracle by hand: candidate thresholds are the negative scores;
        # 0.9 is the smallest with >= 90% of negatives strictly below;
        # positives at/above 0.9: only 0.95 -> sensitivity 1/2
        assert sensitivity_at_specificity(scores, Positivity.IC,
                                          0.90) == pytest.approx(0.5)

    def test_invalid_specificity_rejected(self):
        scores = labeled([0.1, 0.9], [0, 1])
        with pytest.raises(ValueError):
            sensitivity_at_specificity(scores, Positivity.IC, 1.0)

    def test_achieved_specificity_at_threshold(self):
        rng = np.random.default_rng(5)
        scores_arr = rng.random(300)
        labels = rng.integers(0, 2, 300)
        scores = labeled(scores_arr, labels)
        sens = sensitivity_at_specificity(scores, Positivity.IC, 0.90)
        assert 0.0 <= sens <= 1.0
