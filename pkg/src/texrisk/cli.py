"""Command-line interface: synth, flavorize, curate, train, score, evaluate,
run, and tune.

Exit codes: 0 success, 1 validation error, 2 runtime failure.  The
``TEXRISK_DATA_ROOT`` environment variable provides the default parent for
relative data paths.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .cohort import FoldPlan, read_manifest
from .errors import TexriskError
from .experiment import (
    ExperimentSpec,
    FeatureService,
    StoreViewSource,
    curate,
    ensemble_study_scores,
    file_sha256,
    run_experiment,
)
from .imaging.flavor import default_profiles, flavorize
from .imaging.types import load_profiles, save_profile
from .scoring.training import RAW_VARIANT, EnsembleScorer, ScorerConfig
from .synthdata import PhantomConfig, generate_cohort_to_store
from .viewstore import ViewStore

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _data_root() -> Path:
    return Path(os.environ.get("TEXRISK_DATA_ROOT", "."))


def _resolve(path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else _data_root() / p


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        _fail(f"config file {path} not found", EXIT_VALIDATION)
    except json.JSONDecodeError as exc:
        _fail(f"invalid JSON in {path}: {exc}", EXIT_VALIDATION)


def _write_run_manifest(out_dir: Path, command: str, params: dict,
                        artifacts: list[Path]) -> None:
    manifest = {
        "command": command,
        "params": params,
        "artifacts": {str(p.relative_to(out_dir)): file_sha256(p)
                      for p in artifacts if p.is_file()},
    }
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


@click.group()
@click.version_option(__version__)
def main():
    """Cross-vendor texture-risk pipeline toolkit."""


@main.command()
@click.option("--config", "config_path", type=str, default=None,
              help="PhantomConfig JSON file.")
@click.option("--n-women", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", required=True, type=str)
def synth(config_path, n_women, seed, out_dir):
    """Generate a deterministic phantom cohort (views + manifest)."""
    doc = _load_json(_resolve(config_path)) if config_path else {}
    if n_women is not None:
        doc["n_women"] = n_women
    if seed is not None:
        doc["seed"] = seed
    try:
        config = PhantomConfig.from_json_dict(doc)
    except (TexriskError, TypeError, ValueError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    out = _resolve(out_dir)
    try:
        records = generate_cohort_to_store(config, out / "views",
                                           out / "manifest.jsonl")
    except TexriskError as exc:
        _fail(str(exc), EXIT_RUNTIME)
    artifacts = [out / "manifest.jsonl", *sorted((out / "views").glob("*"))]
    _write_run_manifest(out, "synth", config.to_json_dict(), artifacts)
    click.echo(f"wrote {len(records)} women ({4 * len(records)} views) to {out}")


@main.command(name="flavorize")
@click.option("--views", "views_dir", required=True, type=str)
@click.option("--profiles", "profiles_dir", type=str, default=None,
              help="Profile directory; omit for the shipped default set.")
@click.option("--profile-id", "profile_ids", multiple=True,
              help="Subset of profiles to apply (default: all).")
@click.option("--out", "out_dir", required=True, type=str)
def flavorize_cmd(views_dir, profiles_dir, profile_ids, out_dir):
    """Flavorize every raw view in a store under the selected profiles."""
    try:
        profiles = (load_profiles(_resolve(profiles_dir)) if profiles_dir
                    else default_profiles())
        if profile_ids:
            missing = set(profile_ids) - set(profiles)
            if missing:
                _fail(f"unknown profile ids {sorted(missing)}", EXIT_VALIDATION)
            profiles = {pid: profiles[pid] for pid in profile_ids}
        src = ViewStore(_resolve(views_dir))
    except (TexriskError, FileNotFoundError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    dst = ViewStore(_resolve(out_dir), create=True)
    count = 0
    try:
        for view_id in src.list_ids():
            view = src.load(view_id)
            if view.fmt.kind != "raw":
                continue
            for pid, profile in profiles.items():
                dst.save(f"{view_id}__{pid}", flavorize(view, profile))
                count += 1
    except TexriskError as exc:
        _fail(str(exc), EXIT_RUNTIME)
    click.echo(f"wrote {count} flavored views to {dst.root}")


@main.command(name="curate")
@click.option("--manifest", required=True, type=str)
@click.option("--views", "views_dir", required=True, type=str)
@click.option("--out-dir", required=True, type=str)
@click.option("--seed", type=int, default=0)
@click.option("--scorer-config", "scorer_config_path", type=str, default=None)
@click.option("--reference-epochs", type=int, default=40)
def curate_cmd(manifest, views_dir, out_dir, seed, scorer_config_path,
               reference_epochs):
    """Run both curation stages; writes fold plans and the reference risks."""
    try:
        records = read_manifest(_resolve(manifest))
        views = StoreViewSource(ViewStore(_resolve(views_dir)))
        config = (ScorerConfig.from_json_dict(_load_json(_resolve(scorer_config_path)))
                  if scorer_config_path else ScorerConfig())
    except (TexriskError, FileNotFoundError, ValueError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    out = _resolve(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        service = FeatureService(views, default_profiles())
        view_ids = [v for r in records if not r.exclusion_flags for v in r.view_ids]
        service.prepare(view_ids, [RAW_VARIANT], seed=seed)
        result = curate(records, service, config, seed=seed,
                        reference_epochs=reference_epochs)
    except TexriskError as exc:
        _fail(str(exc), EXIT_RUNTIME)
    result.noise_plan.save(out / "folds_noise_id.json")
    result.filtered_plan.save(out / "folds_filtered.json")
    (out / "reference_risk.json").write_text(
        json.dumps(result.reference.to_json_dict(), indent=2) + "\n")
    removed = [{"woman_id": r.woman_id, "reason": reason}
               for r, reason in result.filter_report.removed]
    (out / "filter_removed.json").write_text(json.dumps(removed, indent=2) + "\n")
    artifacts = [out / "folds_noise_id.json", out / "folds_filtered.json",
                 out / "reference_risk.json", out / "filter_removed.json"]
    _write_run_manifest(out, "curate", {"seed": seed,
                                        "reference_epochs": reference_epochs},
                        artifacts)
    click.echo(f"curation complete: {len(result.filter_report.removed)} women "
               f"filtered, plans in {out}")


@main.command(name="train")
@click.option("--folds", "folds_path", required=True, type=str)
@click.option("--manifest", required=True, type=str)
@click.option("--views", "views_dir", required=True, type=str)
@click.option("--out-dir", required=True, type=str)
@click.option("--train-format", type=click.Choice(["raw", "flavor"]), default="raw")
@click.option("--no-flavor-augmentation", is_flag=True, default=False)
@click.option("--scorer-config", "scorer_config_path", type=str, default=None)
@click.option("--seed", type=int, default=0)
def train_cmd(folds_path, manifest, views_dir, out_dir, train_format,
              no_flavor_augmentation, scorer_config_path, seed):
    """Train the five-fold ensemble on an existing fold plan."""
    from .experiment import train_plan
    from .imaging.flavor import TRAINING_PROFILE_IDS

    try:
        plan = FoldPlan.load(_resolve(folds_path))
        records = {r.woman_id: r for r in read_manifest(_resolve(manifest))}
        views = StoreViewSource(ViewStore(_resolve(views_dir)))
        config = (ScorerConfig.from_json_dict(_load_json(_resolve(scorer_config_path)))
                  if scorer_config_path else ScorerConfig())
        config.seed = seed
    except (TexriskError, FileNotFoundError, ValueError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    out = _resolve(out_dir)
    try:
        profiles = default_profiles()
        service = FeatureService(views, profiles)
        view_ids = sorted({v for f in plan.folds for _, v in f.training_views})
        if train_format == "flavor":
            pool = (TRAINING_PROFILE_IDS if not no_flavor_augmentation
                    else TRAINING_PROFILE_IDS[:1])
            service.prepare(view_ids, list(pool), seed=seed)
            validation_variant = pool[0]
        else:
            pool = ()
            service.prepare(view_ids, [RAW_VARIANT], seed=seed)
            validation_variant = RAW_VARIANT
        results = train_plan(plan, records, service, config, flavor_pool=pool,
                             validation_variant=validation_variant)
        ensemble = EnsembleScorer.from_fold_results(results, service.stats, config)
    except TexriskError as exc:
        _fail(str(exc), EXIT_RUNTIME)
    out.mkdir(parents=True, exist_ok=True)
    ensemble.save(out)
    for i, result in enumerate(results):
        (out / f"fold_{i}_trace.json").write_text(
            json.dumps(result.to_json_dict()) + "\n")
    artifacts = sorted(p for p in out.glob("*.json"))
    _write_run_manifest(out, "train", {"seed": seed, "format": train_format},
                        artifacts)
    click.echo(f"trained ensemble saved to {out}")


@main.command(name="score")
@click.option("--model", "model_dir", required=True, type=str)
@click.option("--manifest", required=True, type=str)
@click.option("--views", "views_dir", required=True, type=str)
@click.option("--test-format", default="raw",
              help='"raw", "processed", or "flavor:<profile_id>".')
@click.option("--out", "out_path", required=True, type=str)
@click.option("--seed", type=int, default=0)
def score_cmd(model_dir, manifest, views_dir, test_format, out_path, seed):
    """Score every woman in a manifest with a trained ensemble."""
    try:
        ensemble = EnsembleScorer.load(_resolve(model_dir))
        records = [r for r in read_manifest(_resolve(manifest))
                   if not r.exclusion_flags]
        views = StoreViewSource(ViewStore(_resolve(views_dir)))
    except (TexriskError, FileNotFoundError, ValueError, KeyError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    try:
        variant = (test_format.split(":", 1)[1] if test_format.startswith("flavor:")
                   else test_format)
        service = FeatureService(views, default_profiles())
        view_ids = [v for r in records for v in r.view_ids]
        service.prepare(view_ids, [variant], seed=seed)
        scores = ensemble_study_scores(ensemble.instances, records, service, variant)
    except TexriskError as exc:
        _fail(str(exc), EXIT_RUNTIME)
    out = _resolve(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as fh:
        fh.write("woman_id,score\n")
        for woman_id in sorted(scores):
            fh.write(f"{woman_id},{scores[woman_id]:.8f}\n")
    click.echo(f"wrote {len(scores)} study scores to {out}")


@main.command(name="evaluate")
@click.option("--scores", "scores_path", required=True, type=str,
              help="CSV with woman_id,score columns.")
@click.option("--manifest", required=True, type=str)
@click.option("--out-dir", required=True, type=str)
@click.option("--label", default="R")
@click.option("--flag-fraction", type=float, default=0.10)
def evaluate_cmd(scores_path, manifest, out_dir, label, flag_fraction):
    """Evaluate study scores: AUCs, flagging, OR matrices, figures."""
    from .cohort import classify_outcome
    from .evaluation import (
        EvaluationReport,
        LabeledScores,
        Positivity,
        compute_auc,
        flag_top_fraction,
        quantile_or_matrix,
        sensitivity_at_specificity,
    )
    from .plots import plot_roc, render_report_figures

    try:
        lines = _resolve(scores_path).read_text().strip().splitlines()
        scores = {}
        for line in lines[1:]:
            woman_id, value = line.split(",")[:2]
            scores[woman_id] = float(value)
        records = {r.woman_id: r for r in read_manifest(_resolve(manifest))}
        missing = set(scores) - set(records)
        if missing:
            _fail(f"{len(missing)} scored women missing from manifest",
                  EXIT_VALIDATION)
    except (FileNotFoundError, ValueError) as exc:
        _fail(str(exc), EXIT_VALIDATION)

    out = _resolve(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        groups = {w: classify_outcome(records[w]) for w in scores}
        labeled = LabeledScores([(w, scores[w], groups[w]) for w in sorted(scores)])
        report = EvaluationReport(label=label)
        for positivity in Positivity:
            try:
                report.aucs[positivity.value] = compute_auc(labeled, positivity)
            except TexriskError as exc:
                report.extra.setdefault("auc_errors", {})[positivity.value] = str(exc)
        for positivity in (Positivity.IC, Positivity.LTC):
            try:
                report.sensitivity_at_90_specificity[positivity.value] = (
                    sensitivity_at_specificity(labeled, positivity, 0.90))
            except TexriskError:
                pass
        report.flagging = flag_top_fraction(labeled, flag_fraction)
        texture = np.array([scores[w] for w in sorted(scores)])
        pmd = np.array([records[w].pmd for w in sorted(scores)])
        group_list = [groups[w] for w in sorted(scores)]
        try:
            report.or_matrices = quantile_or_matrix(texture, pmd, group_list)
        except TexriskError as exc:
            report.extra["or_matrix_error"] = str(exc)
        artifacts = [report.save_json(out / "report.json"),
                     report.save_auc_csv(out / "report_aucs.csv"),
                     report.save_or_matrix_csv(out / "report_or_matrix.csv"),
                     plot_roc(labeled, out / "roc.svg", title=label)]
        artifacts += render_report_figures(report, out)
    except TexriskError as exc:
        _fail(str(exc), EXIT_RUNTIME)
    _write_run_manifest(out, "evaluate", {"label": label,
                                          "flag_fraction": flag_fraction},
                        artifacts)
    click.echo(f"report written to {out}")


@main.command(name="run")
@click.option("--spec", "spec_path", required=True, type=str,
              help="ExperimentSpec JSON document.")
@click.option("--out-dir", required=True, type=str)
def run_cmd(spec_path, out_dir):
    """Run a full experiment: curate, train, score, evaluate."""
    try:
        spec = ExperimentSpec.from_json_dict(_load_json(_resolve(spec_path)))
        for path in (spec.train_manifest, spec.test_manifest):
            if path and not _resolve(path).exists():
                _fail(f"manifest {path} does not exist", EXIT_VALIDATION)
    except (TypeError, ValueError, TexriskError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    try:
        spec.train_manifest = str(_resolve(spec.train_manifest))
        spec.train_views = str(_resolve(spec.train_views))
        spec.test_manifest = str(_resolve(spec.test_manifest))
        spec.test_views = str(_resolve(spec.test_views))
        result = run_experiment(spec, out_dir=_resolve(out_dir))
    except TexriskError as exc:
        _fail(str(exc), EXIT_RUNTIME)
    aucs = {k: round(v.auc, 4) for k, v in result.report.aucs.items()}
    click.echo(f"{result.report.label}: {aucs}")
    click.echo(f"artifacts in {_resolve(out_dir)}")


@main.command(name="tune")
@click.option("--views", "views_dir", required=True, type=str)
@click.option("--profiles", "profiles_dir", required=True, type=str)
@click.option("--port", type=int, default=8300)
@click.option("--host", default="127.0.0.1",
              help="Loopback by default; the tuner serves one local operator.")
def tune_cmd(views_dir, profiles_dir, port, host):
    """Serve the interactive flavor-profile tuner."""
    import uvicorn

    from .server import create_app

    try:
        app = create_app(_resolve(views_dir), _resolve(profiles_dir))
    except (TexriskError, FileNotFoundError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
