"""Phantom-cohort generator: determinism, invariants, signal coupling."""

import numpy as np
import pytest

from texrisk.cohort import VIEW_ORDER, classify_outcome, read_manifest
from texrisk.errors import InvalidConfigError
from texrisk.imaging.mask import compute_breast_mask, compute_distance_map
from texrisk.imaging.standardize import compute_standardization, standardize
from texrisk.scoring.features import FEATURE_NAMES, extract_features
from texrisk.synthdata import CohortData, PhantomConfig, generate_cohort
from texrisk.viewstore import ViewStore

RATES = {"SDC": 0.013, "IC": 0.016, "LTC": 0.016}


def small_config(**kw):
    defaults = dict(n_women=50, seed=7, event_rates=dict(RATES))
    defaults.update(kw)
    return PhantomConfig(**defaults)


class TestGeneration:
    def test_four_views_per_woman(self):
        cohort = generate_cohort(small_config())
        assert len(cohort.records) == 50
        assert len(cohort.views) == 200
        for record in cohort.records:
            assert len(record.view_ids) == 4
            suffixes = [v.split("_")[-1] for v in record.view_ids]
            assert tuple(suffixes) == VIEW_ORDER

    def test_bit_identical_given_seed(self):
        a = generate_cohort(small_config())
        b = generate_cohort(small_config())
        assert a.records == b.records
        for view_id in a.views:
            assert (a.views[view_id].pixels == b.views[view_id].pixels).all()

    def test_different_seed_differs(self):
        a = generate_cohort(small_config())
        b = generate_cohort(small_config(seed=8))
        assert any((a.views[v].pixels != b.views[v].pixels).any()
                   for v in a.views)

    def test_views_satisfy_raw_invariants(self):
        cohort = generate_cohort(small_config(n_women=12))
        for view in cohort.views.values():
            assert view.fmt.kind == "raw"
            assert view.pixels.dtype == np.uint16
            assert view.pixels.max() <= view.i_max
            mask = compute_breast_mask(view)
            assert mask.breast_area_px > 0.05 * view.pixels.size
            dmap = compute_distance_map(mask)
            assert np.isfinite(dmap.dist).all()

    def test_sdc_lesion_only_on_cancer_side(self):
        config = small_config(n_women=150, seed=3,
                              event_rates={"SDC": 0.5},
                              lesion_contrast=2.0)
        cohort = generate_cohort(config)
        sdc = [r for r in cohort.records
               if r.diagnosis_date and classify_outcome(r).value == "SDC"]
        assert sdc
        # the lesion is an attenuating mass: a deep dark dip in the raw view
        def darkest_tissue(view_id):
            view = cohort.views[view_id]
            inside = view.pixels[view.pixels > 0]
            return float(np.percentile(inside, 0.5))

        for record in sdc[:5]:
            cancer_views = record.views_of_side(record.cancer_laterality)
            other = [v for v in record.view_ids if v not in cancer_views]
            assert max(darkest_tissue(v) for v in cancer_views) < min(
                darkest_tissue(v) for v in other)

    def test_pmd_matches_dense_fraction_range(self):
        config = small_config(density_level_range=(0.2, 0.3))
        cohort = generate_cohort(config)
        for record in cohort.records:
            assert 0.1 <= record.pmd <= 0.4

    def test_exclusion_injection(self):
        config = small_config(n_women=200, exclusion_rate=0.2, seed=5)
        cohort = generate_cohort(config)
        flagged = [r for r in cohort.records if r.exclusion_flags]
        assert 15 <= len(flagged) <= 70

    def test_invalid_config_rejected(self):
        with pytest.raises(InvalidConfigError):
            PhantomConfig(n_women=0)
        with pytest.raises(InvalidConfigError):
            PhantomConfig(event_rates={"IC": 0.7, "LTC": 0.6})
        with pytest.raises(InvalidConfigError):
            PhantomConfig(texture_signal_amplitude=-1.0)

    def test_store_roundtrip(self, tmp_path):
        from texrisk.synthdata import generate_cohort_to_store

        config = small_config(n_women=6)
        records = generate_cohort_to_store(config, tmp_path / "views",
                                           tmp_path / "manifest.jsonl")
        loaded = read_manifest(tmp_path / "manifest.jsonl")
        assert loaded == records
        store = ViewStore(tmp_path / "views")
        assert len(store.list_ids()) == 24
        in_memory = generate_cohort(config)
        for view_id in store.list_ids():
            assert (store.load(view_id).pixels
                    == in_memory.views[view_id].pixels).all()


def study_feature(cohort: CohortData, record, name, stats):
    idx = FEATURE_NAMES.index(name)
    values = []
    for view_id in record.view_ids:
        view = cohort.views[view_id]
        mask = compute_breast_mask(view)
        dist = compute_distance_map(mask).dist
        values.append(extract_features(standardize(view, stats), mask,
                                       dist)[idx])
    return float(np.mean(values))


@pytest.mark.slow
class TestSignalCoupling:
    def test_texture_correlation_increases_with_amplitude(self):
        correlations = []
        for amplitude in (0.25, 0.5, 1.0):
            config = PhantomConfig(n_women=250, seed=21,
                                   event_rates=dict(RATES),
                                   texture_signal_amplitude=amplitude)
            cohort = generate_cohort(config)
            sample = [cohort.views[r.view_ids[0]] for r in cohort.records]
            stats = compute_standardization(sample, 250, seed=0)
            labels, feats = [], []
            for record in cohort.records:
                labels.append(0 if record.diagnosis_date is None else 1)
                feats.append(study_feature(cohort, record, "blob_mid", stats))
            correlations.append(np.corrcoef(feats, labels)[0, 1])
        assert correlations[0] > 0
        assert correlations[0] < correlations[1] < correlations[2]

    def test_contralateral_texture_correlation(self):
        config = PhantomConfig(n_women=200, seed=22, event_rates=dict(RATES),
                               texture_signal_amplitude=1.0)
        cohort = generate_cohort(config)
        sample = [cohort.views[r.view_ids[0]] for r in cohort.records]
        stats = compute_standardization(sample, 200, seed=0)
        left, right = [], []
        for record in cohort.records:
            left_views = record.views_of_side("L")
            right_views = record.views_of_side("R")
            idx = FEATURE_NAMES.index("blob_mid")

            def side_feature(view_ids):
                values = []
                for view_id in view_ids:
                    view = cohort.views[view_id]
                    mask = compute_breast_mask(view)
                    dist = compute_distance_map(mask).dist
                    values.append(extract_features(
                        standardize(view, stats), mask, dist)[idx])
                return float(np.mean(values))

            left.append(side_feature(left_views))
            right.append(side_feature(right_views))
        assert np.corrcoef(left, right)[0, 1] > 0.5
