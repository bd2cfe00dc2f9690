"""Woman-level cohort modeling: outcomes, exclusions, case-control matching,
ensemble fold assignment, and the noise-filtering stage of curation."""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    InvalidDatesError,
    MissingLateralityError,
    MissingReferenceRiskError,
)
from .imaging.types import Laterality

DAYS_PER_MONTH = 30.44
SDC_WINDOW_MONTHS = 6
IC_WINDOW_MONTHS = 24

VIEW_ORDER = ("LCC", "LMLO", "RCC", "RMLO")
LEFT_VIEW_SLOTS = (0, 1)
RIGHT_VIEW_SLOTS = (2, 3)

EXCLUSION_FLAGS = (
    "VisibleArtifact",
    "CorruptedView",
    "PriorCancer",
    "ContralateralClips",
    "BilateralClips",
    "BilateralCancer",
)

N_FOLDS = 5
CONTROLS_PER_CASE = 20
AGE_TOLERANCE_YEARS = 1
HEALTHY_EXCLUSION_FRACTION = 0.10
CASE_EXCLUSION_FRACTION = 0.04


class CancerGroup(str, Enum):
    SDC = "SDC"
    IC = "IC"
    LTC = "LTC"
    HEALTHY = "Healthy"


EVENT_GROUPS = (CancerGroup.SDC, CancerGroup.IC, CancerGroup.LTC)


class CurationStage(str, Enum):
    NOISE_ID = "NoiseId"
    FILTERED = "Filtered"


@dataclass
class WomanRecord:
    """Per-woman screening outcome, risk factors, views, and exclusion flags."""

    woman_id: str
    age_years: int
    screen_date: dt.date
    recalled: bool
    diagnosis_date: dt.date | None
    cancer_laterality: Laterality | None
    has_clips: bool
    pmd: float
    exclusion_flags: frozenset[str]
    view_ids: tuple[str, str, str, str]  # LCC, LMLO, RCC, RMLO

    def __post_init__(self):
        if self.diagnosis_date is not None and self.diagnosis_date < self.screen_date:
            raise InvalidDatesError(
                f"{self.woman_id}: diagnosis {self.diagnosis_date} precedes "
                f"screen {self.screen_date}")
        if not 0.0 <= self.pmd <= 1.0:
            raise ValueError(f"{self.woman_id}: pmd {self.pmd} outside [0, 1]")
        self.exclusion_flags = frozenset(self.exclusion_flags)
        unknown = set(self.exclusion_flags) - set(EXCLUSION_FLAGS)
        if unknown:
            raise ValueError(f"{self.woman_id}: unknown exclusion flags {unknown}")
        if len(self.view_ids) != 4:
            raise ValueError(f"{self.woman_id}: expected 4 view ids")
        self.view_ids = tuple(self.view_ids)
        if self.cancer_laterality is not None:
            self.cancer_laterality = Laterality(self.cancer_laterality)

    def views_of_side(self, side: Laterality) -> tuple[str, str]:
        slots = LEFT_VIEW_SLOTS if side is Laterality.LEFT else RIGHT_VIEW_SLOTS
        return tuple(self.view_ids[i] for i in slots)

    def to_json_dict(self) -> dict:
        return {
            "woman_id": self.woman_id,
            "age_years": self.age_years,
            "screen_date": self.screen_date.isoformat(),
            "recalled": self.recalled,
            "diagnosis_date": (self.diagnosis_date.isoformat()
                               if self.diagnosis_date else None),
            "cancer_laterality": (self.cancer_laterality.value
                                  if self.cancer_laterality else None),
            "has_clips": self.has_clips,
            "pmd": self.pmd,
            "exclusion_flags": sorted(self.exclusion_flags),
            "view_ids": list(self.view_ids),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "WomanRecord":
        return cls(
            woman_id=d["woman_id"],
            age_years=int(d["age_years"]),
            screen_date=dt.date.fromisoformat(d["screen_date"]),
            recalled=bool(d["recalled"]),
            diagnosis_date=(dt.date.fromisoformat(d["diagnosis_date"])
                            if d.get("diagnosis_date") else None),
            cancer_laterality=(Laterality(d["cancer_laterality"])
                               if d.get("cancer_laterality") else None),
            has_clips=bool(d["has_clips"]),
            pmd=float(d["pmd"]),
            exclusion_flags=frozenset(d.get("exclusion_flags", ())),
            view_ids=tuple(d["view_ids"]),
        )


def write_manifest(records: list[WomanRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json_dict()) + "\n")


def read_manifest(path: str | Path) -> list[WomanRecord]:
    records = []
    seen = set()
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        record = WomanRecord.from_json_dict(json.loads(line))
        if record.woman_id in seen:
            raise ValueError(f"duplicate woman_id {record.woman_id!r} in manifest")
        seen.add(record.woman_id)
        records.append(record)
    return records


def classify_outcome(record: WomanRecord) -> CancerGroup:
    """Outcome group from recall status and time from screening to diagnosis.

    SDC: recalled with diagnosis within 6 months.  IC: otherwise diagnosed
    within 24 months.  LTC: diagnosed at least 24 months out.  Months are
    30.44-day intervals.
    """
    if record.diagnosis_date is None:
        return CancerGroup.HEALTHY
    days = (record.diagnosis_date - record.screen_date).days
    if days < 0:
        raise InvalidDatesError(f"{record.woman_id}: negative follow-up")
    if record.recalled and days <= SDC_WINDOW_MONTHS * DAYS_PER_MONTH:
        return CancerGroup.SDC
    if days < IC_WINDOW_MONTHS * DAYS_PER_MONTH:
        return CancerGroup.IC
    return CancerGroup.LTC


def apply_exclusions(records: list[WomanRecord]
                     ) -> tuple[list[WomanRecord], list[tuple[WomanRecord, list[str]]]]:
    """Partition records into (kept, excluded-with-reasons) on exclusion flags."""
    kept, excluded = [], []
    for record in records:
        if record.exclusion_flags:
            excluded.append((record, sorted(record.exclusion_flags)))
        else:
            kept.append(record)
    return kept, excluded


@dataclass(frozen=True)
class MatchSet:
    """One case and its age-matched healthy controls."""

    case_id: str
    control_ids: tuple[str, ...]
    age_tolerance_years: int = AGE_TOLERANCE_YEARS


@dataclass
class MatchResult:
    matchsets: list[MatchSet]
    dropped_case_ids: list[str]


def match_case_controls(cases: list[WomanRecord], healthy_pool: list[WomanRecord],
                        seed: int, n_controls: int = CONTROLS_PER_CASE,
                        age_tolerance: int = AGE_TOLERANCE_YEARS) -> MatchResult:
    """Match each case with ``n_controls`` healthy women within +-1 year of age.

    Controls are drawn uniformly at random without replacement across all
    match sets.  Cases with fewer than ``n_controls`` eligible controls left
    are dropped and reported rather than matched loosely.
    """
    case_ids = {c.woman_id for c in cases}
    if case_ids & {h.woman_id for h in healthy_pool}:
        raise ValueError("healthy pool overlaps the case list")
    rng = np.random.default_rng(seed)
    by_age: dict[int, list[str]] = {}
    age_of = {}
    for woman in sorted(healthy_pool, key=lambda r: r.woman_id):
        by_age.setdefault(woman.age_years, []).append(woman.woman_id)
        age_of[woman.woman_id] = woman.age_years
    taken: set[str] = set()

    matchsets, dropped = [], []
    for case in sorted(cases, key=lambda r: r.woman_id):
        eligible = [
            wid
            for age in range(case.age_years - age_tolerance,
                             case.age_years + age_tolerance + 1)
            for wid in by_age.get(age, ())
            if wid not in taken
        ]
        if len(eligible) < n_controls:
            dropped.append(case.woman_id)
            continue
        chosen = rng.choice(len(eligible), size=n_controls, replace=False)
        controls = tuple(eligible[i] for i in sorted(chosen))
        taken.update(controls)
        matchsets.append(MatchSet(case_id=case.woman_id, control_ids=controls,
                                  age_tolerance_years=age_tolerance))
    return MatchResult(matchsets=matchsets, dropped_case_ids=dropped)


@dataclass
class ReferenceRiskTable:
    """Study-level reference risk per woman, from the noise-identification model."""

    entries: dict[str, float]
    source: str = ""

    def risk_of(self, woman_id: str) -> float:
        if woman_id not in self.entries:
            raise MissingReferenceRiskError(f"no reference risk for {woman_id!r}")
        return self.entries[woman_id]

    def to_json_dict(self) -> dict:
        return {"source": self.source, "entries": self.entries}

    @classmethod
    def from_json_dict(cls, d: dict) -> "ReferenceRiskTable":
        return cls(entries={k: float(v) for k, v in d["entries"].items()},
                   source=d.get("source", ""))


@dataclass
class FoldEntry:
    training_views: list[tuple[str, str]]  # (woman_id, view_id)
    validation_women: list[str]


@dataclass
class FoldPlan:
    """Five ensemble folds plus the matching structure used to build them."""

    folds: list[FoldEntry]
    matched: dict[str, tuple[str, ...]]  # case_id -> control ids
    stratification_keys: str
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "stratification_keys": self.stratification_keys,
            "matched": {k: list(v) for k, v in self.matched.items()},
            "folds": [
                {
                    "training_views": [list(pair) for pair in f.training_views],
                    "validation_women": f.validation_women,
                }
                for f in self.folds
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FoldPlan":
        return cls(
            folds=[
                FoldEntry(
                    training_views=[tuple(p) for p in f["training_views"]],
                    validation_women=list(f["validation_women"]),
                )
                for f in d["folds"]
            ],
            matched={k: tuple(v) for k, v in d["matched"].items()},
            stratification_keys=d["stratification_keys"],
            seed=d["seed"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "FoldPlan":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def _quantile_bin(values: np.ndarray, q: int) -> np.ndarray:
    """Assign each value to one of ``q`` quantile bins of the same sample."""
    if len(values) == 0:
        return np.zeros(0, dtype=int)
    edges = np.quantile(values, np.linspace(0, 1, q + 1)[1:-1])
    return np.searchsorted(edges, values, side="right")


class _FoldDealer:
    """Shuffles each stratum and deals it round-robin from a rotating cursor.

    Within any stratum the per-fold counts differ by at most one; carrying the
    cursor across strata keeps many single-member strata from piling onto the
    same fold.
    """

    def __init__(self, rng: np.random.Generator, n_folds: int = N_FOLDS):
        self._rng = rng
        self.n_folds = n_folds
        self._cursor = int(rng.integers(n_folds))

    def deal(self, ids: list[str]) -> list[list[str]]:
        order = list(ids)
        self._rng.shuffle(order)
        parts: list[list[str]] = [[] for _ in range(self.n_folds)]
        for i, woman_id in enumerate(order):
            parts[(self._cursor + i) % self.n_folds].append(woman_id)
        self._cursor = (self._cursor + len(order)) % self.n_folds
        return parts


def assign_ensemble_folds(matchsets: list[MatchSet],
                          unmatched_women: list[str],
                          records: dict[str, WomanRecord],
                          stage: CurationStage,
                          reference: ReferenceRiskTable | None = None,
                          seed: int = 0) -> FoldPlan:
    """Split cases into five stratified parts and build per-fold train/val sets.

    Cases are stratified by (age decile, cancer group) in the
    noise-identification stage, plus reference-risk quartile in the filtering
    stage; matched controls follow their case's part.  Fold k trains on the
    other four parts (all four views, before cancer-side exclusion) and
    validates on part k plus its share of the unmatched pool.  In the filtered
    stage that pool may also carry filtered-out women, split stratified on
    cancer group and reference risk.
    """
    if stage is CurationStage.FILTERED and reference is None:
        raise MissingReferenceRiskError("Filtered stage requires a reference risk table")

    rng = np.random.default_rng(seed)
    case_ids = sorted(ms.case_id for ms in matchsets)
    controls_of = {ms.case_id: ms.control_ids for ms in matchsets}

    ages = np.array([records[c].age_years for c in case_ids], dtype=float)
    age_bins = _quantile_bin(ages, 10)
    groups = [classify_outcome(records[c]).value for c in case_ids]
    keys = ["age_decile", "cancer_group"]
    if stage is CurationStage.FILTERED:
        risks = np.array([reference.risk_of(c) for c in case_ids])
        risk_bins = _quantile_bin(risks, 4)
        keys.append("reference_risk_quartile")
        strata_of = {
            c: (int(a), g, int(r))
            for c, a, g, r in zip(case_ids, age_bins, groups, risk_bins)
        }
    else:
        strata_of = {c: (int(a), g) for c, a, g in zip(case_ids, age_bins, groups)}

    strata: dict[tuple, list[str]] = {}
    for case_id in case_ids:
        strata.setdefault(strata_of[case_id], []).append(case_id)

    dealer = _FoldDealer(rng)
    part_cases: list[list[str]] = [[] for _ in range(N_FOLDS)]
    for key in sorted(strata, key=str):
        for k, chunk in enumerate(dealer.deal(strata[key])):
            part_cases[k].extend(chunk)

    unmatched = sorted(unmatched_women)
    if stage is CurationStage.FILTERED:
        # split stratified on (cancer group, reference-risk quartile); the
        # pool may contain filtered-out cases, not only healthy women
        risks = np.array([reference.risk_of(w) for w in unmatched])
        bins = _quantile_bin(risks, 4)
        pool_strata: dict[tuple, list[str]] = {}
        for woman_id, b in zip(unmatched, bins):
            key = (classify_outcome(records[woman_id]).value, int(b))
            pool_strata.setdefault(key, []).append(woman_id)
        part_unmatched: list[list[str]] = [[] for _ in range(N_FOLDS)]
        for key in sorted(pool_strata, key=str):
            for k, chunk in enumerate(dealer.deal(pool_strata[key])):
                part_unmatched[k].extend(chunk)
    else:
        part_unmatched = dealer.deal(unmatched)

    folds = []
    for k in range(N_FOLDS):
        training_views: list[tuple[str, str]] = []
        for j in range(N_FOLDS):
            if j == k:
                continue
            for case_id in part_cases[j]:
                for woman_id in (case_id, *controls_of[case_id]):
                    training_views.extend(
                        (woman_id, view_id) for view_id in records[woman_id].view_ids)
        validation = []
        for case_id in part_cases[k]:
            validation.append(case_id)
            validation.extend(controls_of[case_id])
        validation.extend(part_unmatched[k])
        folds.append(FoldEntry(training_views=training_views,
                               validation_women=validation))

    return FoldPlan(folds=folds,
                    matched={c: controls_of[c] for c in case_ids},
                    stratification_keys="+".join(keys),
                    seed=seed)


def exclude_cancer_side_views(plan: FoldPlan,
                              records: dict[str, WomanRecord]) -> FoldPlan:
    """Drop cancer-side training views for every case and its matched controls.

    Validation membership is untouched: validation women keep all four views.
    """
    drop_views: set[tuple[str, str]] = set()
    for case_id, control_ids in plan.matched.items():
        laterality = records[case_id].cancer_laterality
        if laterality is None:
            raise MissingLateralityError(f"case {case_id!r} has no cancer laterality")
        for woman_id in (case_id, *control_ids):
            for view_id in records[woman_id].views_of_side(laterality):
                drop_views.add((woman_id, view_id))

    folds = [
        FoldEntry(
            training_views=[p for p in f.training_views if tuple(p) not in drop_views],
            validation_women=list(f.validation_women),
        )
        for f in plan.folds
    ]
    return FoldPlan(folds=folds, matched=dict(plan.matched),
                    stratification_keys=plan.stratification_keys, seed=plan.seed)


@dataclass
class FilterReport:
    kept: list[WomanRecord]
    removed: list[tuple[WomanRecord, str]]  # (record, reason)


def filter_noisy_samples(records: list[WomanRecord],
                         reference: ReferenceRiskTable) -> FilterReport:
    """Remove likely noise-inducing samples using reference risk scores.

    Drops the floor(10%) highest-risk healthy women and, per cancer group, the
    floor(4%) lowest-risk cases.  Ties break by ascending woman_id.
    """
    for record in records:
        reference.risk_of(record.woman_id)  # raises if missing

    by_group: dict[CancerGroup, list[WomanRecord]] = {}
    for record in records:
        by_group.setdefault(classify_outcome(record), []).append(record)

    removed_ids: dict[str, str] = {}
    healthy = by_group.get(CancerGroup.HEALTHY, [])
    n_drop = int(HEALTHY_EXCLUSION_FRACTION * len(healthy))
    ranked = sorted(healthy,
                    key=lambda r: (-reference.risk_of(r.woman_id), r.woman_id))
    for record in ranked[:n_drop]:
        removed_ids[record.woman_id] = "HighRiskHealthy"

    for group in EVENT_GROUPS:
        members = by_group.get(group, [])
        n_drop = int(CASE_EXCLUSION_FRACTION * len(members))
        ranked = sorted(members,
                        key=lambda r: (reference.risk_of(r.woman_id), r.woman_id))
        for record in ranked[:n_drop]:
            removed_ids[record.woman_id] = f"LowRisk{group.value}"

    kept = [r for r in records if r.woman_id not in removed_ids]
    removed = [(r, removed_ids[r.woman_id]) for r in records
               if r.woman_id in removed_ids]
    return FilterReport(kept=kept, removed=removed)
