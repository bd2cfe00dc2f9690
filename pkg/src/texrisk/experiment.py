"""End-to-end experiment orchestration: curate -> train ensemble -> score -> evaluate.

Mirrors the four experiment series: raw baselines, flavor-augmented training
tested on a held-out flavor, cross-format transfer, and risk-factor fusion.
"""

from __future__ import annotations

import hashlib
import json
from collections import OrderedDict
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cohort import (
    CancerGroup,
    CurationStage,
    FilterReport,
    FoldPlan,
    MatchResult,
    ReferenceRiskTable,
    WomanRecord,
    apply_exclusions,
    assign_ensemble_folds,
    classify_outcome,
    exclude_cancer_side_views,
    filter_noisy_samples,
    match_case_controls,
    read_manifest,
)
from .errors import InvalidConfigError
from .evaluation import (
    EvaluationReport,
    LabeledScores,
    Positivity,
    compute_auc,
    convergence_report,
    delong_test,
    flag_top_fraction,
    quantile_or_matrix,
    sensitivity_at_specificity,
)
from .imaging.flavor import TRAINING_PROFILE_IDS, default_profiles, flavorize
from .imaging.geometry import flip_horizontal, geometric_augment
from .imaging.mask import compute_breast_mask, compute_distance_map
from .imaging.standardize import compute_standardization, standardize
from .imaging.types import (
    BreastMask,
    DistanceMap,
    FlavorProfile,
    GeometricAugmentation,
    Laterality,
    StandardizationStats,
    ViewImage,
)
from .scoring.features import extract_features
from .scoring.mlp import MLP
from .scoring.plugin import ExternalScorer
from .scoring.training import (
    RAW_VARIANT,
    EnsembleScorer,
    FoldScorerResult,
    ScorerConfig,
    TrainingExample,
    ValidationStudy,
    train_fold_scorer,
)
from .viewstore import ViewStore

PROCESSED_VARIANT = "processed"
REFERENCE_EPOCHS = 40


class StoreViewSource(Mapping):
    """Dict-like access to a ViewStore with a small decoded-view LRU."""

    def __init__(self, store: ViewStore, cache_size: int = 64):
        self._store = store
        self._ids = store.list_ids()
        self._cache: OrderedDict[str, ViewImage] = OrderedDict()
        self._cache_size = cache_size

    def __getitem__(self, view_id: str) -> ViewImage:
        if view_id in self._cache:
            self._cache.move_to_end(view_id)
            return self._cache[view_id]
        view = self._store.load(view_id)
        self._cache[view_id] = view
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return view

    def __iter__(self):
        return iter(self._ids)

    def __len__(self):
        return len(self._ids)


class FeatureService:
    """Per-dataset feature provider: flavorizes, standardizes, extracts, caches.

    Right-laterality views are flipped before any processing, matching the
    training contract.  Segmentation of the raw view is shared across all
    variants of that view through a small LRU, so warming the cache view-major
    keeps EDT/Otsu work to once per view.

    Besides the pixel standardization, feature vectors are z-scored against
    per-variant statistics sampled from the dataset (``fit_feature_stats``),
    so scorers see each variant's features on a common scale -- the same
    per-dataset normalization idea the pixel standardization applies, lifted
    to the feature level.
    """

    def __init__(self, views: Mapping[str, ViewImage],
                 profiles: dict[str, FlavorProfile],
                 stats: StandardizationStats | None = None):
        self.views = views
        self.profiles = profiles
        self.stats = stats
        self.feature_stats: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self._features: dict[tuple[str, str], np.ndarray] = {}
        self._geometry: OrderedDict[str, tuple[ViewImage, BreastMask, np.ndarray]] = (
            OrderedDict())

    def _oriented(self, view_id: str) -> tuple[ViewImage, BreastMask, np.ndarray]:
        cached = self._geometry.get(view_id)
        if cached is not None:
            self._geometry.move_to_end(view_id)
            return cached
        view = self.views[view_id]
        if view.laterality is Laterality.RIGHT:
            view = flip_horizontal(view)
        if view.fmt.kind == "raw":
            mask = compute_breast_mask(view)
        else:
            mask = BreastMask(view.pixels > 0)
        dist = compute_distance_map(mask).dist
        entry = (view, mask, dist)
        self._geometry[view_id] = entry
        if len(self._geometry) > 8:
            self._geometry.popitem(last=False)
        return entry

    def _variant_view(self, view_id: str, variant: str
                      ) -> tuple[ViewImage, BreastMask, np.ndarray]:
        view, mask, dist = self._oriented(view_id)
        if variant == RAW_VARIANT or variant == PROCESSED_VARIANT:
            return view, mask, dist
        profile = self.profiles[variant]
        flavored = flavorize(view, profile, mask=mask, dmap=DistanceMap(dist))
        return flavored, mask, dist

    def _raw_features(self, view_id: str, variant: str,
                      aug: GeometricAugmentation | None) -> np.ndarray:
        if self.stats is None:
            raise InvalidConfigError("standardization stats not set on FeatureService")
        key = (view_id, variant)
        if aug is None:
            cached = self._features.get(key)
            if cached is not None:
                return cached
        view, mask, dist = self._variant_view(view_id, variant)
        if aug is not None:
            # flip already applied; warp image and re-derive the mask from the
            # warped support (phantom/flavor background is exactly 0)
            warped = geometric_augment(view.with_pixels(view.pixels), replace(
                aug, flip_right_views=False))
            mask = BreastMask(warped.pixels > 0)
            dist = compute_distance_map(mask).dist
            return extract_features(standardize(warped, self.stats), mask, dist)
        result = extract_features(standardize(view, self.stats), mask, dist)
        self._features[key] = result
        return result

    def features(self, view_id: str, variant: str,
                 aug: GeometricAugmentation | None = None) -> np.ndarray:
        raw = self._raw_features(view_id, variant, aug)
        fitted = self.feature_stats.get(variant)
        if fitted is None:
            return raw
        mean, std = fitted
        return (raw - mean) / std

    def fit_feature_stats(self, view_ids: list[str], variants: list[str],
                          sample_size: int = 300, seed: int = 0) -> None:
        """Fit per-variant feature mean/std from a random view sample."""
        rng = np.random.default_rng(seed)
        n = min(sample_size, len(view_ids))
        chosen = [view_ids[int(i)] for i in
                  rng.choice(len(view_ids), size=n, replace=False)]
        for variant in variants:
            rows = np.vstack([self._raw_features(v, variant, None)
                              for v in chosen])
            mean = rows.mean(axis=0)
            std = np.maximum(rows.std(axis=0), 1e-9)
            self.feature_stats[variant] = (mean, std)

    def warm(self, view_ids: list[str], variants: list[str]) -> None:
        """Precompute features view-major so segmentation is shared."""
        for view_id in view_ids:
            for variant in variants:
                self._raw_features(view_id, variant, None)

    def sample_stats(self, view_ids: list[str], variants: list[str],
                     sample_size: int = 1000, seed: int = 0) -> StandardizationStats:
        """Standardization stats over a random (view, variant) sample."""
        pool = [(v, f) for v in view_ids for f in variants]
        rng = np.random.default_rng(seed)
        n = min(sample_size, len(pool))
        chosen = rng.choice(len(pool), size=n, replace=False)
        sampled = []
        for idx in chosen:
            view_id, variant = pool[int(idx)]
            sampled.append(self._variant_view(view_id, variant)[0])
        return compute_standardization(sampled, sample_size=n, seed=seed)

    def prepare(self, view_ids: list[str], variants: list[str],
                sample_size: int = 1000, seed: int = 0) -> None:
        """Fit pixel standardization plus per-variant feature statistics."""
        self.stats = self.sample_stats(view_ids, variants, sample_size, seed)
        self.fit_feature_stats(view_ids, variants,
                               min(300, sample_size), seed)


@dataclass
class ExperimentSpec:
    """Declarative description of one experiment run."""

    name: str
    train_manifest: str = ""
    train_views: str = ""
    test_manifest: str = ""
    test_views: str = ""
    train_format: str = "raw"            # "raw" | "flavor"
    test_format: str = "raw"             # "raw" | "flavor:<id>" | "processed"
    use_flavor_augmentation: bool = True
    use_risk_factors: bool = False
    scorer: str = "baseline"             # "baseline" | "plugin:<path>"
    profiles_dir: str = ""               # empty -> shipped defaults
    training_profile_ids: tuple[str, ...] = TRAINING_PROFILE_IDS
    seed: int = 0
    scorer_config: ScorerConfig = field(default_factory=ScorerConfig)
    reference_epochs: int = REFERENCE_EPOCHS
    standardization_sample: int = 1000
    flag_fraction: float = 0.10

    def to_json_dict(self) -> dict:
        d = self.__dict__.copy()
        d["scorer_config"] = self.scorer_config.to_json_dict()
        d["training_profile_ids"] = list(self.training_profile_ids)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        if "scorer_config" in d:
            d["scorer_config"] = ScorerConfig.from_json_dict(d["scorer_config"])
        if "training_profile_ids" in d:
            d["training_profile_ids"] = tuple(d["training_profile_ids"])
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})

    def result_label(self, train_name: str = "", test_name: str = "") -> str:
        test_fmt = self.test_format.split(":")[0]
        train_fmt = "flav" if self.train_format == "flavor" else self.train_format
        test_fmt = {"flavor": "flav", "processed": "proc"}.get(test_fmt, test_fmt)
        suffix = "+RF" if self.use_risk_factors else ""
        return (f"R_{{{train_fmt}->{test_fmt}}}^"
                f"{{{train_name or 'train'}{suffix}->{test_name or 'test'}}}")


@dataclass
class CurationResult:
    noise_plan: FoldPlan
    filtered_plan: FoldPlan
    reference: ReferenceRiskTable
    reference_results: list[FoldScorerResult]
    noise_match: MatchResult
    filtered_match: MatchResult
    filter_report: FilterReport
    excluded: list


def _partition_by_outcome(records: list[WomanRecord]):
    cases = [r for r in records if classify_outcome(r) is not CancerGroup.HEALTHY]
    healthy = [r for r in records if classify_outcome(r) is CancerGroup.HEALTHY]
    return cases, healthy


def _fold_training_examples(plan_fold, records: dict[str, WomanRecord],
                            flavor_pool: tuple[str, ...]) -> list[TrainingExample]:
    examples = []
    for woman_id, view_id in plan_fold.training_views:
        label = 0 if classify_outcome(records[woman_id]) is CancerGroup.HEALTHY else 1
        examples.append(TrainingExample(view_ref=view_id, label=label,
                                        woman_id=woman_id, flavor_pool=flavor_pool))
    return examples


def _fold_validation_studies(plan_fold, records: dict[str, WomanRecord],
                             variant: str) -> list[ValidationStudy]:
    studies = []
    for woman_id in plan_fold.validation_women:
        record = records[woman_id]
        label = 0 if classify_outcome(record) is CancerGroup.HEALTHY else 1
        studies.append(ValidationStudy(woman_id=woman_id,
                                       view_refs=record.view_ids,
                                       label=label, variant=variant))
    return studies


def train_plan(plan: FoldPlan, records: dict[str, WomanRecord],
               service: FeatureService, config: ScorerConfig,
               flavor_pool: tuple[str, ...] = (),
               validation_variant: str = RAW_VARIANT,
               return_best: bool = True) -> list[FoldScorerResult]:
    """Train the five fold instances of a plan sequentially with per-fold seeds."""
    results = []
    for k, fold in enumerate(plan.folds):
        fold_config = replace(config, seed=config.seed * 5 + k)
        examples = _fold_training_examples(fold, records, flavor_pool)
        validation = _fold_validation_studies(fold, records, validation_variant)
        results.append(train_fold_scorer(examples, validation, fold_config,
                                         service.features, return_best=return_best))
    return results


def out_of_fold_scores(plan: FoldPlan, results: list[FoldScorerResult],
                       records: dict[str, WomanRecord], service: FeatureService,
                       variant: str = RAW_VARIANT) -> dict[str, float]:
    """Study score per woman from the instance whose validation set holds her."""
    scores: dict[str, float] = {}
    for fold, result in zip(plan.folds, results):
        for woman_id in fold.validation_women:
            features = np.vstack([service.features(v, variant)
                                  for v in records[woman_id].view_ids])
            scores[woman_id] = float(result.model.forward(features).mean())
    return scores


def ensemble_study_scores(instances: list[MLP], records: list[WomanRecord],
                          service: FeatureService, variant: str
                          ) -> dict[str, float]:
    scores = {}
    for record in records:
        features = np.vstack([service.features(v, variant)
                              for v in record.view_ids])
        per_instance = np.stack([inst.forward(features) for inst in instances])
        scores[record.woman_id] = float(per_instance.mean(axis=0).mean())
    return scores


def curate(records: list[WomanRecord], service: FeatureService,
           config: ScorerConfig, seed: int,
           reference_epochs: int = REFERENCE_EPOCHS) -> CurationResult:
    """Run both curation stages and train the reference model between them.

    The reference model trains on raw views for a fixed epoch count; reference
    risks are out-of-fold study scores (every kept woman sits in exactly one
    validation set).  Match-dropped cases fall back to the full-ensemble mean
    so the risk table covers the whole cohort.
    """
    kept, excluded = apply_exclusions(records)
    records_map = {r.woman_id: r for r in kept}
    cases, healthy = _partition_by_outcome(kept)

    noise_match = match_case_controls(cases, healthy, seed=seed)
    matched_ids = {ms.case_id for ms in noise_match.matchsets}
    matched_ids |= {c for ms in noise_match.matchsets for c in ms.control_ids}
    unmatched = [h.woman_id for h in healthy if h.woman_id not in matched_ids]
    noise_plan = assign_ensemble_folds(noise_match.matchsets, unmatched,
                                       records_map, CurationStage.NOISE_ID,
                                       seed=seed)
    noise_plan = exclude_cancer_side_views(noise_plan, records_map)

    reference_config = replace(config, max_epochs=reference_epochs, seed=seed)
    reference_results = train_plan(noise_plan, records_map, service,
                                   reference_config, return_best=False)

    risks = out_of_fold_scores(noise_plan, reference_results, records_map, service)
    uncovered = [r for r in kept if r.woman_id not in risks]
    if uncovered:
        instances = [res.model for res in reference_results]
        risks.update(ensemble_study_scores(instances, uncovered, service,
                                           RAW_VARIANT))
    reference = ReferenceRiskTable(
        entries=risks,
        source=f"reference ensemble, {reference_epochs} epochs, raw views")

    filter_report = filter_noisy_samples(kept, reference)
    kept2 = filter_report.kept
    cases2, healthy2 = _partition_by_outcome(kept2)
    filtered_match = match_case_controls(cases2, healthy2, seed=seed + 1)
    matched2 = {ms.case_id for ms in filtered_match.matchsets}
    matched2 |= {c for ms in filtered_match.matchsets for c in ms.control_ids}
    # Unmatched kept women plus filtered-out women all land in validation,
    # stratified on cancer group and reference risk.
    validation_pool = [r.woman_id for r in kept2
                       if r.woman_id not in matched2
                       and classify_outcome(r) is CancerGroup.HEALTHY]
    validation_pool += [r.woman_id for r, _ in filter_report.removed]
    filtered_plan = assign_ensemble_folds(filtered_match.matchsets,
                                          validation_pool, records_map,
                                          CurationStage.FILTERED,
                                          reference=reference, seed=seed + 1)
    filtered_plan = exclude_cancer_side_views(filtered_plan, records_map)

    return CurationResult(
        noise_plan=noise_plan, filtered_plan=filtered_plan,
        reference=reference, reference_results=reference_results,
        noise_match=noise_match, filtered_match=filtered_match,
        filter_report=filter_report, excluded=excluded)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    report: EvaluationReport
    curation: CurationResult | None
    fold_results: list[FoldScorerResult]
    texture_scores: dict[str, float]
    fused_scores: dict[str, float] | None
    train_stats: StandardizationStats | None
    test_stats: StandardizationStats


def _test_variant(spec: ExperimentSpec) -> str:
    if spec.test_format.startswith("flavor:"):
        return spec.test_format.split(":", 1)[1]
    if spec.test_format in (RAW_VARIANT, PROCESSED_VARIANT):
        return spec.test_format
    raise InvalidConfigError(f"unknown test_format {spec.test_format!r}")


def load_experiment_profiles(spec: ExperimentSpec) -> dict[str, FlavorProfile]:
    if spec.profiles_dir:
        from .imaging.types import load_profiles

        return load_profiles(spec.profiles_dir)
    return default_profiles()


def run_experiment(spec: ExperimentSpec,
                   train_records: list[WomanRecord] | None = None,
                   train_views: Mapping[str, ViewImage] | None = None,
                   test_records: list[WomanRecord] | None = None,
                   test_views: Mapping[str, ViewImage] | None = None,
                   out_dir: str | Path | None = None,
                   train_name: str = "", test_name: str = "",
                   curation: CurationResult | None = None,
                   ) -> ExperimentResult:
    """Execute one experiment series end to end.

    Data defaults to the manifests/stores named in the spec; in-memory
    records/views can be injected instead (tests, shared cohorts).  A
    pre-computed ``curation`` result may be re-used across specs that share
    the training cohort.
    """
    profiles = load_experiment_profiles(spec)
    if train_records is None and spec.scorer == "baseline":
        train_records = read_manifest(spec.train_manifest)
        train_views = StoreViewSource(ViewStore(spec.train_views))
    if test_records is None:
        test_records = read_manifest(spec.test_manifest)
        test_views = StoreViewSource(ViewStore(spec.test_views))

    test_kept, _ = apply_exclusions(test_records)
    test_variant = _test_variant(spec)
    test_service = FeatureService(test_views, profiles)
    test_view_ids = [v for r in test_kept for v in r.view_ids]
    test_service.prepare(test_view_ids, [test_variant],
                         spec.standardization_sample, seed=spec.seed)
    test_stats = test_service.stats

    fold_results: list[FoldScorerResult] = []
    train_stats = None
    fused_scores = None

    if spec.scorer.startswith("plugin:"):
        scorer = ExternalScorer(spec.scorer.split(":", 1)[1])
        texture_scores = _plugin_scores(scorer, test_kept, test_service,
                                        test_variant)
    else:
        train_service = FeatureService(train_views, profiles)
        train_kept, _ = apply_exclusions(train_records)
        train_view_ids = [v for r in train_kept for v in r.view_ids]
        if spec.train_format == "flavor":
            pool = (tuple(spec.training_profile_ids)
                    if spec.use_flavor_augmentation
                    else (spec.training_profile_ids[0],))
            stats_variants = list(pool)
            validation_variant = pool[0]
        else:
            pool = ()
            stats_variants = [RAW_VARIANT]
            validation_variant = RAW_VARIANT

        # Curation always runs on raw views; standardize them with raw stats
        # first, then re-sample stats for the training format.
        train_service.prepare(train_view_ids, [RAW_VARIANT],
                              spec.standardization_sample, seed=spec.seed)
        if curation is None:
            curation = curate(train_records, train_service, spec.scorer_config,
                              seed=spec.seed, reference_epochs=spec.reference_epochs)

        if spec.train_format == "flavor":
            train_service = FeatureService(train_views, profiles)
            train_service.prepare(train_view_ids, stats_variants,
                                  spec.standardization_sample,
                                  seed=spec.seed + 1)
        train_stats = train_service.stats
        records_map = {r.woman_id: r for r in train_kept}
        fold_results = train_plan(curation.filtered_plan, records_map,
                                  train_service, spec.scorer_config,
                                  flavor_pool=pool,
                                  validation_variant=validation_variant)
        ensemble = EnsembleScorer.from_fold_results(fold_results, train_stats,
                                                    spec.scorer_config)
        texture_scores = ensemble_study_scores(
            [r.model for r in fold_results], test_kept, test_service, test_variant)

        if spec.use_risk_factors:
            fused_scores = _fusion_path(spec, curation.filtered_plan,
                                        fold_results, records_map,
                                        train_service, validation_variant,
                                        test_kept, texture_scores)

    report = _evaluate(spec, test_kept, texture_scores, fused_scores,
                       fold_results, train_name, test_name)
    result = ExperimentResult(
        spec=spec, report=report, curation=curation, fold_results=fold_results,
        texture_scores=texture_scores, fused_scores=fused_scores,
        train_stats=train_stats, test_stats=test_stats)
    if out_dir is not None:
        persist_experiment(result, Path(out_dir))
    return result


def _plugin_scores(scorer: ExternalScorer, records: list[WomanRecord],
                   service: FeatureService, variant: str) -> dict[str, float]:
    scores = {}
    for record in records:
        std_views = []
        for view_id in record.view_ids:
            view, _, _ = service._variant_view(view_id, variant)
            std_views.append(standardize(view, service.stats))
        scores[record.woman_id] = float(scorer.score_views(std_views).mean())
    return scores


def _fusion_path(spec: ExperimentSpec, filtered_plan: FoldPlan,
                 fold_results: list[FoldScorerResult],
                 records_map: dict[str, WomanRecord],
                 train_service: FeatureService, variant: str,
                 test_kept: list[WomanRecord],
                 texture_scores: dict[str, float]) -> dict[str, float]:
    """Train the risk-factor fusion net on out-of-fold training scores and
    apply it to the test cohort's texture scores."""
    from .scoring.fusion import train_fusion

    oof = out_of_fold_scores(filtered_plan, fold_results, records_map,
                             train_service, variant)
    train_ids = sorted(oof)
    train_records = [records_map[w] for w in train_ids]
    fusion = train_fusion(
        texture_scores=[oof[w] for w in train_ids],
        ages=[r.age_years for r in train_records],
        clips=[1.0 if r.has_clips else 0.0 for r in train_records],
        pmds=[r.pmd for r in train_records],
        labels=[0 if classify_outcome(r) is CancerGroup.HEALTHY else 1
                for r in train_records],
        config=ScorerConfig(learning_rate=0.01, max_epochs=150,
                            dropout_rates=(0.0, 0.0), seed=spec.seed),
    )
    test_ids = sorted(texture_scores)
    by_id = {r.woman_id: r for r in test_kept}
    fused = fusion.predict(
        [texture_scores[w] for w in test_ids],
        [by_id[w].age_years for w in test_ids],
        [1.0 if by_id[w].has_clips else 0.0 for w in test_ids],
        [by_id[w].pmd for w in test_ids])
    return {w: float(s) for w, s in zip(test_ids, fused)}


def _evaluate(spec: ExperimentSpec, test_records: list[WomanRecord],
              texture_scores: dict[str, float],
              fused_scores: dict[str, float] | None,
              fold_results: list[FoldScorerResult],
              train_name: str, test_name: str) -> EvaluationReport:
    groups = {r.woman_id: classify_outcome(r) for r in test_records}
    primary = fused_scores if fused_scores is not None else texture_scores
    labeled_texture = LabeledScores(
        [(w, texture_scores[w], groups[w]) for w in sorted(texture_scores)])
    labeled_primary = LabeledScores(
        [(w, primary[w], groups[w]) for w in sorted(primary)])

    report = EvaluationReport(label=spec.result_label(train_name, test_name))
    for positivity in Positivity:
        try:
            report.aucs[positivity.value] = compute_auc(labeled_primary, positivity)
        except Exception as exc:  # degenerate class mixes are reported, not fatal
            report.extra.setdefault("auc_errors", {})[positivity.value] = str(exc)
    if fused_scores is not None:
        for positivity in (Positivity.LTC, Positivity.IC, Positivity.ALL_CANCERS):
            try:
                p, auc_fused, auc_texture = delong_test(
                    labeled_primary, labeled_texture, positivity, paired=True)
                report.delong_tests.append({
                    "comparison": "fused_vs_texture",
                    "positivity": positivity.value,
                    "p_value": p, "auc_a": auc_fused, "auc_b": auc_texture,
                    "paired": True,
                })
            except Exception as exc:
                report.extra.setdefault("delong_errors", {})[positivity.value] = str(exc)

    for positivity in (Positivity.IC, Positivity.LTC):
        try:
            report.sensitivity_at_90_specificity[positivity.value] = (
                sensitivity_at_specificity(labeled_primary, positivity, 0.90))
        except Exception as exc:
            report.extra.setdefault("sensitivity_errors", {})[positivity.value] = str(exc)

    report.flagging = flag_top_fraction(labeled_primary, spec.flag_fraction)

    texture = np.array([texture_scores[w] for w in sorted(texture_scores)])
    pmd = np.array([next(r.pmd for r in test_records if r.woman_id == w)
                    for w in sorted(texture_scores)])
    group_list = [groups[w] for w in sorted(texture_scores)]
    try:
        report.or_matrices = quantile_or_matrix(texture, pmd, group_list)
    except Exception as exc:
        report.extra["or_matrix_error"] = str(exc)

    if fold_results:
        report.convergence = convergence_report(
            [r.auc_trace for r in fold_results])
        report.extra["best_epochs"] = [r.best_epoch for r in fold_results]
    return report


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def persist_experiment(result: ExperimentResult, out_dir: Path) -> None:
    """Write all run artifacts plus a manifest of inputs, seeds, and hashes."""
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: list[Path] = []

    spec_path = out_dir / "experiment.json"
    spec_path.write_text(json.dumps(result.spec.to_json_dict(), indent=2) + "\n")
    artifacts.append(spec_path)

    if result.curation is not None:
        for name, plan in (("folds_noise_id.json", result.curation.noise_plan),
                           ("folds_filtered.json", result.curation.filtered_plan)):
            path = out_dir / name
            plan.save(path)
            artifacts.append(path)
        ref_path = out_dir / "reference_risk.json"
        ref_path.write_text(json.dumps(
            result.curation.reference.to_json_dict(), indent=2) + "\n")
        artifacts.append(ref_path)

    models_dir = out_dir / "models"
    models_dir.mkdir(exist_ok=True)
    for i, fold_result in enumerate(result.fold_results):
        path = models_dir / f"fold_{i}.json"
        path.write_text(json.dumps(fold_result.to_json_dict()) + "\n")
        artifacts.append(path)

    scores_path = out_dir / "scores.csv"
    with scores_path.open("w") as fh:
        fh.write("woman_id,texture_score,fused_score\n")
        for woman_id in sorted(result.texture_scores):
            fused = ("" if result.fused_scores is None
                     else f"{result.fused_scores[woman_id]:.8f}")
            fh.write(f"{woman_id},{result.texture_scores[woman_id]:.8f},{fused}\n")
    artifacts.append(scores_path)

    artifacts.append(result.report.save_json(out_dir / "report.json"))
    artifacts.append(result.report.save_auc_csv(out_dir / "report_aucs.csv"))
    artifacts.append(result.report.save_or_matrix_csv(out_dir / "report_or_matrix.csv"))

    from . import plots

    artifacts.extend(plots.render_report_figures(result.report, out_dir))

    manifest = {
        "spec": result.spec.to_json_dict(),
        "seed": result.spec.seed,
        "inputs": {
            "train_manifest": result.spec.train_manifest,
            "train_views": result.spec.train_views,
            "test_manifest": result.spec.test_manifest,
            "test_views": result.spec.test_views,
        },
        "artifacts": {str(p.relative_to(out_dir)): file_sha256(p)
                      for p in artifacts},
    }
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
