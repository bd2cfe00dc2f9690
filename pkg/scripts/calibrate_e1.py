"""Dev calibration for the cross-flavor acceptance experiments.

Sweeps texture amplitude and training hyperparameters to land raw->raw
AUC(all-cancer) near 0.75 and verify the flavor-transfer behaviours.
Not part of the shipped package or test suite.
"""

import sys
import time

import numpy as np

from texrisk.cohort import CancerGroup, classify_outcome
from texrisk.evaluation import LabeledScores, Positivity, compute_auc
from texrisk.experiment import (
    ExperimentSpec,
    FeatureService,
    curate,
    ensemble_study_scores,
    train_plan,
)
from texrisk.imaging.flavor import (
    HELD_OUT_PROFILE_ID,
    TRAINING_PROFILE_IDS,
    default_profiles,
)
from texrisk.scoring.training import RAW_VARIANT, ScorerConfig
from texrisk.synthdata import PhantomConfig, generate_cohort

RATES = {"SDC": 0.012, "IC": 0.014, "LTC": 0.014}


def auc_of(scores, records, positivity=Positivity.ALL_CANCERS):
    groups = {r.woman_id: classify_outcome(r) for r in records}
    labeled = LabeledScores([(w, s, groups[w]) for w, s in scores.items()])
    return compute_auc(labeled, positivity).auc


def main(amplitude, n_train=2000, n_test=2000, lr=1e-3, epochs=30,
         hidden=64, dropout=(0.3, 0.15), seed=5):
    t0 = time.time()
    profiles = default_profiles()
    train = generate_cohort(PhantomConfig(
        n_women=n_train, seed=101, event_rates=RATES,
        texture_signal_amplitude=amplitude))
    test = generate_cohort(PhantomConfig(
        n_women=n_test, seed=202, event_rates=RATES,
        texture_signal_amplitude=amplitude))
    n_cases = sum(1 for r in train.records if r.diagnosis_date)
    print(f"[{time.time()-t0:6.1f}s] generated; train cases={n_cases}")

    config = ScorerConfig(learning_rate=lr, max_epochs=epochs,
                          hidden_width=hidden, dropout_rates=dropout,
                          seed=seed)
    train_service = FeatureService(train.views, profiles)
    train_ids = [v for r in train.records for v in r.view_ids]
    train_service.prepare(train_ids, [RAW_VARIANT], 1000, seed=seed)
    curation = curate(train.records, train_service, config, seed=seed,
                      reference_epochs=min(40, epochs + 10))
    print(f"[{time.time()-t0:6.1f}s] curated; "
          f"removed={len(curation.filter_report.removed)} "
          f"dropped={len(curation.noise_match.dropped_case_ids)}")

    records_map = {r.woman_id: r for r in train.records}
    raw_results = train_plan(curation.filtered_plan, records_map,
                             train_service, config)
    print(f"[{time.time()-t0:6.1f}s] raw ensemble trained; "
          f"best epochs={[r.best_epoch for r in raw_results]}")

    flavor_service = FeatureService(train.views, profiles)
    flavor_service.prepare(train_ids, list(TRAINING_PROFILE_IDS), 1000,
                           seed=seed + 1)
    flavor_results = train_plan(curation.filtered_plan, records_map,
                                flavor_service, config,
                                flavor_pool=TRAINING_PROFILE_IDS,
                                validation_variant=TRAINING_PROFILE_IDS[0])
    print(f"[{time.time()-t0:6.1f}s] flavor ensemble trained; "
          f"best epochs={[r.best_epoch for r in flavor_results]}")

    # test services: raw standardization and flavor-7 standardization
    test_raw = FeatureService(test.views, profiles)
    test_ids = [v for r in test.records for v in r.view_ids]
    test_raw.prepare(test_ids, [RAW_VARIANT], 1000, 1)
    test_f7 = FeatureService(test.views, profiles)
    test_f7.prepare(test_ids, [HELD_OUT_PROFILE_ID], 1000, 1)

    raw_models = [r.model for r in raw_results]
    flavor_models = [r.model for r in flavor_results]
    s_raw_raw = ensemble_study_scores(raw_models, test.records, test_raw,
                                      RAW_VARIANT)
    s_raw_f7 = ensemble_study_scores(raw_models, test.records, test_f7,
                                     HELD_OUT_PROFILE_ID)
    s_flav_f7 = ensemble_study_scores(flavor_models, test.records, test_f7,
                                      HELD_OUT_PROFILE_ID)
    print(f"[{time.time()-t0:6.1f}s] scored")

    for positivity in (Positivity.ALL_CANCERS, Positivity.IC, Positivity.LTC):
        a = auc_of(s_raw_raw, test.records, positivity)
        b = auc_of(s_raw_f7, test.records, positivity)
        c = auc_of(s_flav_f7, test.records, positivity)
        print(f"{positivity.value:>12}: raw->raw={a:.3f}  raw->f7={b:.3f}  "
              f"flav->f7={c:.3f}")
    print(f"total {time.time()-t0:.1f}s")


if __name__ == "__main__":
    amplitude = float(sys.argv[1]) if len(sys.argv) > 1 else 0.7
    kw = {}
    if len(sys.argv) > 2:
        kw["n_train"] = int(sys.argv[2])
        kw["n_test"] = int(sys.argv[3])
    main(amplitude, **kw)
