"""Risk-scorer training honoring the ensemble contract: BCE batches of 10,
Adam updates, flavor-randomized sampling, and early stopping on validation AUC
with all cancer groups treated as positive."""

from __future__ import annotations

import json
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..errors import NoValidationPositivesError, NoViewsError
from ..imaging.geometry import flip_horizontal
from ..imaging.mask import compute_breast_mask
from ..imaging.standardize import standardize
from ..imaging.types import (
    BreastMask,
    GeometricAugmentation,
    Laterality,
    StandardizationStats,
    ViewImage,
)
from .features import FEATURE_LENGTH, extract_features
from .mlp import MLP

RAW_VARIANT = "raw"

# feature_fn(view_id, variant, augmentation or None) -> feature vector
FeatureFn = Callable[[str, str, GeometricAugmentation | None], np.ndarray]


@dataclass
class ScorerConfig:
    """Hyperparameters of the native scorer and its training loop."""

    batch_size: int = 10
    learning_rate: float = 1e-5
    max_epochs: int = 40
    epoch_fraction: Fraction | None = None  # default: 1/n_flavors, else 1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    dropout_rates: tuple[float, float] = (0.5, 0.25)
    hidden_width: int = 512
    augment_geometric: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def layer_sizes(self, n_features: int = FEATURE_LENGTH) -> list[int]:
        return [n_features, self.hidden_width, max(2, self.hidden_width // 2), 1]

    def to_json_dict(self) -> dict:
        d = self.__dict__.copy()
        d["epoch_fraction"] = (str(self.epoch_fraction)
                               if self.epoch_fraction is not None else None)
        d["dropout_rates"] = list(self.dropout_rates)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "ScorerConfig":
        d = dict(d)
        if d.get("epoch_fraction"):
            d["epoch_fraction"] = Fraction(d["epoch_fraction"])
        if "dropout_rates" in d:
            d["dropout_rates"] = tuple(d["dropout_rates"])
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class TrainingExample:
    """One training view with its label and the flavors it may be drawn in."""

    view_ref: str
    label: int
    woman_id: str
    flavor_pool: tuple[str, ...] = ()

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class ValidationStudy:
    """A validation woman: all her views, scored study-level during training."""

    woman_id: str
    view_refs: tuple[str, ...]
    label: int
    variant: str = RAW_VARIANT


class FlavorBatchSampler:
    """Yields batches of (example index, variant) pairs.

    With a flavor pool, the (example, flavor) product is shuffled into a cycle
    and each epoch consumes ``epoch_fraction`` of it, so with a pool of six and
    the default fraction of 1/6 every flavor-augmented sample is visited
    exactly once per six epochs.
    """

    def __init__(self, n_examples: int, flavor_pools: Sequence[tuple[str, ...]],
                 batch_size: int, rng: np.random.Generator,
                 epoch_fraction: Fraction | None = None):
        if n_examples == 0:
            raise ValueError("no training examples")
        self._rng = rng
        self.batch_size = batch_size
        entries = []
        for i in range(n_examples):
            pool = flavor_pools[i] or (RAW_VARIANT,)
            entries.extend((i, variant) for variant in pool)
        self._entries = entries
        pool_sizes = {len(p) for p in flavor_pools if p}
        default = Fraction(1, max(pool_sizes)) if pool_sizes else Fraction(1)
        fraction = epoch_fraction if epoch_fraction is not None else default
        self.entries_per_epoch = max(1, round(len(entries) * float(fraction)))
        self._cursor = 0
        self._order = np.arange(len(entries))
        self._reshuffle()

    def _reshuffle(self):
        self._rng.shuffle(self._order)
        self._cursor = 0

    def epoch_batches(self):
        taken = 0
        while taken < self.entries_per_epoch:
            if self._cursor >= len(self._order):
                self._reshuffle()
            step = min(self.batch_size,
                       self.entries_per_epoch - taken,
                       len(self._order) - self._cursor)
            chunk = self._order[self._cursor:self._cursor + step]
            self._cursor += step
            taken += step
            yield [self._entries[j] for j in chunk]


def rank_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUC with the 1/2-tie convention via midranks."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=float)
    sorted_scores = scores[order]
    # midranks over tie runs
    i = 0
    while i < scores.size:
        j = i
        while j < scores.size and sorted_scores[j] == sorted_scores[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j + 1)
        i = j
    rank_sum = ranks[labels].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class FoldScorerResult:
    model: MLP
    auc_trace: list[tuple[int, float]]
    best_epoch: int
    config: ScorerConfig
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "model": self.model.to_json_dict(),
            "auc_trace": [[e, a] for e, a in self.auc_trace],
            "best_epoch": self.best_epoch,
            "config": self.config.to_json_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FoldScorerResult":
        return cls(
            model=MLP.from_json_dict(d["model"]),
            auc_trace=[(int(e), float(a)) for e, a in d["auc_trace"]],
            best_epoch=int(d["best_epoch"]),
            config=ScorerConfig.from_json_dict(d["config"]),
            seed=int(d["seed"]),
        )


def _validation_features(studies: Sequence[ValidationStudy],
                         feature_fn: FeatureFn) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack validation view features with per-study segment ids."""
    rows, owners, labels = [], [], []
    for s_idx, study in enumerate(studies):
        labels.append(study.label)
        for ref in study.view_refs:
            rows.append(feature_fn(ref, study.variant, None))
            owners.append(s_idx)
    return np.vstack(rows), np.asarray(owners), np.asarray(labels, dtype=int)


def study_scores_from_view_scores(view_scores: np.ndarray, owners: np.ndarray,
                                  n_studies: int) -> np.ndarray:
    sums = np.bincount(owners, weights=view_scores, minlength=n_studies)
    counts = np.bincount(owners, minlength=n_studies)
    return sums / np.maximum(counts, 1)


def train_fold_scorer(examples: Sequence[TrainingExample],
                      validation: Sequence[ValidationStudy],
                      config: ScorerConfig,
                      feature_fn: FeatureFn,
                      return_best: bool = True) -> FoldScorerResult:
    """Train one ensemble instance on a fold.

    Returns the parameter snapshot at the epoch of maximum validation AUC
    (first maximum) together with the full per-epoch AUC trace.  With
    ``return_best=False`` (reference-model mode) the final-epoch parameters
    are kept instead; the trace is still recorded.
    """
    if not examples:
        raise ValueError("fold has no training examples")
    val_x, owners, val_labels = _validation_features(validation, feature_fn)
    if val_labels.sum() == 0:
        raise NoValidationPositivesError("validation set has no positive women")
    if val_labels.sum() == val_labels.size:
        raise NoValidationPositivesError("validation set has no negative women")

    rng = np.random.default_rng(config.seed)
    model = MLP(config.layer_sizes(val_x.shape[1]), seed=config.seed,
                dropout_rates=config.dropout_rates)
    labels = np.asarray([e.label for e in examples], dtype=np.float64)
    sampler = FlavorBatchSampler(
        len(examples), [e.flavor_pool for e in examples],
        batch_size=config.batch_size, rng=rng,
        epoch_fraction=config.epoch_fraction)

    # Fast path: with no per-sample warping, features per (example, variant)
    # are immutable and can be resolved once.
    feature_cache: dict[tuple[int, str], np.ndarray] = {}

    def entry_features(entry: tuple[int, str]) -> np.ndarray:
        idx, variant = entry
        if config.augment_geometric:
            aug = GeometricAugmentation.sample(rng)
            return feature_fn(examples[idx].view_ref, variant, aug)
        cached = feature_cache.get(entry)
        if cached is None:
            cached = feature_cache[entry] = feature_fn(
                examples[idx].view_ref, variant, None)
        return cached

    trace: list[tuple[int, float]] = []
    best_auc, best_epoch, best_params = -np.inf, 0, model.snapshot()
    for epoch in range(1, config.max_epochs + 1):
        for batch in sampler.epoch_batches():
            x = np.vstack([entry_features(entry) for entry in batch])
            y = labels[[i for i, _ in batch]]
            _, grads = model.loss_and_gradients(x, y, rng=rng)
            model.adam_step(grads, config.learning_rate,
                            config.adam_beta1, config.adam_beta2, config.adam_eps)
        view_scores = model.forward(val_x)
        study_scores = study_scores_from_view_scores(view_scores, owners,
                                                     len(validation))
        auc = rank_auc(study_scores, val_labels == 1)
        trace.append((epoch, auc))
        if auc > best_auc:
            best_auc, best_epoch, best_params = auc, epoch, model.snapshot()

    if return_best:
        model.restore(best_params)
    else:
        best_epoch = config.max_epochs
    return FoldScorerResult(model=model, auc_trace=trace, best_epoch=best_epoch,
                            config=config, seed=config.seed)


@dataclass
class EnsembleScorer:
    """Five trained fold instances plus the training-set standardization."""

    instances: list
    standardization: StandardizationStats
    config: ScorerConfig = field(default_factory=ScorerConfig)

    @classmethod
    def from_fold_results(cls, results: Sequence[FoldScorerResult],
                          standardization: StandardizationStats,
                          config: ScorerConfig) -> "EnsembleScorer":
        if len(results) != 5:
            raise ValueError(f"ensemble requires exactly 5 instances, got {len(results)}")
        return cls(instances=[r.model for r in results],
                   standardization=standardization, config=config)

    def score_features(self, features: np.ndarray) -> np.ndarray:
        """Mean sigmoid output of all instances for a (n, n_features) batch."""
        features = np.atleast_2d(features)
        scores = np.stack([inst.forward(features) for inst in self.instances])
        return scores.mean(axis=0)

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        meta = {
            "n_instances": len(self.instances),
            "standardization": {
                "mean": self.standardization.mean,
                "std": self.standardization.std,
                "sample_size": self.standardization.sample_size,
            },
            "config": self.config.to_json_dict(),
        }
        (directory / "ensemble.json").write_text(json.dumps(meta, indent=2) + "\n")
        for i, inst in enumerate(self.instances):
            inst.save(directory / f"instance_{i}.json")

    @classmethod
    def load(cls, directory: str | Path) -> "EnsembleScorer":
        directory = Path(directory)
        meta = json.loads((directory / "ensemble.json").read_text())
        instances = [MLP.load(directory / f"instance_{i}.json")
                     for i in range(meta["n_instances"])]
        stats = StandardizationStats(**meta["standardization"])
        return cls(instances=instances, standardization=stats,
                   config=ScorerConfig.from_json_dict(meta["config"]))


@dataclass
class RiskScore:
    view_scores: dict[str, float]
    study_score: float


def mask_for_view(view: ViewImage) -> BreastMask:
    """Breast mask for feature extraction.

    Raw views are segmented; flavor/processed views rely on the pipeline
    invariant that background is exactly 0.
    """
    if view.fmt.kind == "raw":
        return compute_breast_mask(view)
    return BreastMask(view.pixels > 0)


def view_features(view: ViewImage, stats: StandardizationStats) -> np.ndarray:
    """Flip right views, standardize, and extract scorer features."""
    if view.laterality is Laterality.RIGHT:
        view = flip_horizontal(view)
    mask = mask_for_view(view)
    return extract_features(standardize(view, stats), mask)


def score_study(ensemble: EnsembleScorer, study_views: dict[str, ViewImage],
                stats: StandardizationStats | None = None) -> RiskScore:
    """Score one woman's study: per-view ensemble means, averaged over views.

    ``stats`` defaults to the ensemble's training standardization; pass the
    testing dataset's own sampled statistics when scoring a new domain.
    """
    if not study_views:
        raise NoViewsError("a study needs at least one view")
    stats = stats or ensemble.standardization
    features = np.vstack([view_features(v, stats) for v in study_views.values()])
    per_view = ensemble.score_features(features)
    view_scores = {vid: float(s) for vid, s in zip(study_views, per_view)}
    return RiskScore(view_scores=view_scores,
                     study_score=float(np.mean(list(view_scores.values()))))
