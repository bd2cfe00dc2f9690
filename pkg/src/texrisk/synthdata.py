"""Deterministic phantom cohorts: half-ellipse breasts with controllable
label-correlated texture, density, lesions, and risk-factor signals.

A per-woman latent risk drives both the event probability (logistic link) and
the blob-texture contrast in BOTH breasts, so contra-lateral views carry the
risk signal that the scorer is supposed to learn.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.special import ndtr

from .cohort import DAYS_PER_MONTH, VIEW_ORDER, WomanRecord, write_manifest
from .errors import InvalidConfigError
from .imaging.types import I_MAX_RAW, Laterality, ViewImage, ViewPosition
from .viewstore import ViewStore

DEFAULT_EVENT_RATES = {"SDC": 0.013, "IC": 0.013, "LTC": 0.014}
SCREEN_DATE = dt.date(2014, 6, 1)


@dataclass
class PhantomConfig:
    """Knobs of the synthetic cohort generator."""

    n_women: int = 200
    event_rates: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_EVENT_RATES))
    age_range: tuple[int, int] = (50, 70)
    breast_axes_mm: tuple[tuple[float, float], tuple[float, float]] = (
        (38.0, 50.0), (30.0, 40.0))  # (vertical semi-axis, horizontal extent)
    base_intensity: float = 600.0
    noise_std: float = 18.0
    density_level_range: tuple[float, float] = (0.12, 0.45)
    texture_signal_amplitude: float = 1.0
    lesion_contrast: float = 0.8
    pixel_spacing_mm: float = 0.7
    exposure_gain_range: tuple[float, float] = (0.8, 1.25)  # per-view AEC dose
    risk_slope: float = 1.6          # latent -> event log-odds
    clips_rate: float = 0.10
    clips_log_odds: float = 0.0      # independent risk-factor signals
    pmd_log_odds: float = 0.0
    exclusion_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_women < 1:
            raise InvalidConfigError("n_women must be >= 1")
        if sum(self.event_rates.values()) > 1.0:
            raise InvalidConfigError("event rates sum above 1")
        if any(rate < 0 for rate in self.event_rates.values()):
            raise InvalidConfigError("event rates must be non-negative")
        if self.texture_signal_amplitude < 0 or self.lesion_contrast < 0:
            raise InvalidConfigError("amplitudes must be non-negative")
        if not self.pixel_spacing_mm > 0:
            raise InvalidConfigError("pixel_spacing_mm must be positive")

    def grid_shape(self) -> tuple[int, int]:
        (_, a_hi), (_, b_hi) = self.breast_axes_mm
        height = int(np.ceil(2.0 * a_hi / self.pixel_spacing_mm)) + 6
        width = int(np.ceil(b_hi / self.pixel_spacing_mm)) + 9
        return height, width

    def to_json_dict(self) -> dict:
        d = self.__dict__.copy()
        d["age_range"] = list(self.age_range)
        d["breast_axes_mm"] = [list(self.breast_axes_mm[0]),
                               list(self.breast_axes_mm[1])]
        d["density_level_range"] = list(self.density_level_range)
        d["exposure_gain_range"] = list(self.exposure_gain_range)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "PhantomConfig":
        d = dict(d)
        for key in ("age_range", "density_level_range", "exposure_gain_range"):
            if key in d:
                d[key] = tuple(d[key])
        if "breast_axes_mm" in d:
            d["breast_axes_mm"] = tuple(tuple(x) for x in d["breast_axes_mm"])
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass
class CohortData:
    records: list[WomanRecord]
    views: dict[str, ViewImage]


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + np.exp(-x))


def _breast_geometry(config: PhantomConfig, rng: np.random.Generator
                     ) -> tuple[float, float]:
    (a_lo, a_hi), (b_lo, b_hi) = config.breast_axes_mm
    return float(rng.uniform(a_lo, a_hi)), float(rng.uniform(b_lo, b_hi))


def _render_view(config: PhantomConfig, rng: np.random.Generator,
                 axes_mm: tuple[float, float], laterality: Laterality,
                 position: ViewPosition, blob_contrast: float,
                 blob_sigma: float, density_level: float,
                 lesion: bool) -> tuple[np.ndarray, float]:
    """One raw phantom view; returns (uint16 pixels, dense-area fraction)."""
    height, width = config.grid_shape()
    spacing = config.pixel_spacing_mm
    a_mm, b_mm = axes_mm
    if position is ViewPosition.MLO:  # slightly different compression shape
        a_mm, b_mm = a_mm * 1.08, b_mm * 0.95

    rows = (np.arange(height) - height / 2.0) * spacing
    cols = np.arange(width) * spacing + spacing / 2.0
    dy = rows[:, None] / a_mm
    dx = cols[None, :] / b_mm
    r2 = dx * dx + dy * dy
    mask = r2 <= 1.0
    thickness = np.sqrt(np.clip(1.0 - r2, 0.0, None))

    # Exposure-like raw polarity (air blanked to 0): the thin periphery is
    # bright, roughly 3x the compressed-interior level, so the tone curve's
    # transition falls inside the breast the way it does on clinical raws.
    base = config.base_intensity
    image = base * (0.55 + 1.45 * (1.0 - thickness) ** 1.4)

    # Density: attenuating regions at a coarser scale than the risk texture;
    # dense areas are dim in raw and end up bright after tone inversion.
    dense_field = ndimage.gaussian_filter(rng.normal(size=(height, width)), 12.0)
    inside_vals = dense_field[mask]
    cut = np.quantile(inside_vals, 1.0 - density_level)
    dense_mask = dense_field > cut
    image -= 0.10 * base * ndimage.gaussian_filter((dense_mask & mask).astype(float), 2.0)

    # Risk-coupled texture: sparse attenuating strands (band-limited blob
    # noise, positive part), applied multiplicatively like tissue absorption.
    # Attenuation makes the structure dark in raw and bright after tone
    # inversion, so its signed statistics flip between the two domains.
    # Contrast and blob scale are fixed per woman so the pattern persists
    # across all four views.
    blobs = ndimage.gaussian_filter(rng.normal(size=(height, width)), blob_sigma)
    blobs /= max(blobs[mask].std(), 1e-9)
    strands = np.maximum(blobs - 0.6, 0.0)
    strands /= max(strands[mask].mean(), 1e-9)
    image *= 1.0 - np.minimum(blob_contrast * strands, 0.55)

    if lesion:
        cy, cx = np.nonzero(mask & (thickness > 0.35))
        pick = int(rng.integers(len(cy)))
        yy = (np.arange(height)[:, None] - cy[pick]) / (3.0 / spacing)
        xx = (np.arange(width)[None, :] - cx[pick]) / (3.0 / spacing)
        image -= config.lesion_contrast * base * np.exp(-0.5 * (yy ** 2 + xx ** 2))

    image = np.maximum(image, 0.08 * base)  # a lesion dip cannot reach zero
    sigma = config.noise_std * np.sqrt(np.clip(image, 0, None) / base + 0.1)
    image += rng.normal(size=(height, width)) * sigma
    # per-view exposure (AEC dose) factor: present in raw detector output,
    # cancelled by the tone map's interior-mean normalization
    g_lo, g_hi = config.exposure_gain_range
    image *= rng.uniform(g_lo, g_hi)
    image[~mask] = 0.0
    pixels = np.clip(np.rint(image), 0, I_MAX_RAW).astype(np.uint16)
    if laterality is Laterality.RIGHT:  # chest wall flush right
        pixels = pixels[:, ::-1].copy()
    dense_fraction = float((dense_mask & mask).sum() / mask.sum())
    return pixels, dense_fraction


def _assign_group(config: PhantomConfig, rng: np.random.Generator,
                  latent: float, has_clips: bool, density: float) -> str | None:
    rates = config.event_rates
    total_rate = sum(rates.values())
    if total_rate == 0:
        return None
    base_logit = np.log(total_rate / (1.0 - total_rate))
    d_lo, d_hi = config.density_level_range
    d_mid, d_span = (d_lo + d_hi) / 2.0, max(d_hi - d_lo, 1e-9)
    logit = (base_logit
             + config.risk_slope * latent
             + config.clips_log_odds * (1.0 if has_clips else 0.0)
             + config.pmd_log_odds * (density - d_mid) / d_span)
    if rng.random() >= _sigmoid(logit):
        return None
    groups = sorted(rates)
    weights = np.array([rates[g] for g in groups])
    return str(rng.choice(groups, p=weights / weights.sum()))


def _diagnosis_months(group: str, rng: np.random.Generator) -> float:
    if group == "SDC":
        return float(rng.uniform(0.5, 5.8))
    if group == "IC":
        return float(rng.uniform(6.5, 23.5))
    return float(rng.uniform(24.5, 60.0))


def generate_cohort(config: PhantomConfig) -> CohortData:
    """Generate the full cohort: four views per woman plus manifest records.

    Fully deterministic given ``config.seed``; each woman derives her own rng
    stream from (seed, index), so generation could shard across workers.
    """
    records: list[WomanRecord] = []
    views: dict[str, ViewImage] = {}
    for index in range(config.n_women):
        record, woman_views = generate_woman(config, index)
        records.append(record)
        views.update(woman_views)
    return CohortData(records=records, views=views)


def generate_woman(config: PhantomConfig, index: int
                   ) -> tuple[WomanRecord, dict[str, ViewImage]]:
    rng = np.random.default_rng([config.seed, index])
    woman_id = f"w{index:05d}"
    age = int(rng.integers(config.age_range[0], config.age_range[1] + 1))
    latent = float(rng.normal())
    has_clips = bool(rng.random() < config.clips_rate)
    d_lo, d_hi = config.density_level_range
    density_level = float(rng.uniform(d_lo, d_hi))
    axes = _breast_geometry(config, rng)

    group = _assign_group(config, rng, latent, has_clips, density_level)
    laterality = None
    diagnosis_date = None
    recalled = False
    if group is not None:
        laterality = Laterality.LEFT if rng.random() < 0.5 else Laterality.RIGHT
        months = _diagnosis_months(group, rng)
        diagnosis_date = SCREEN_DATE + dt.timedelta(days=round(months * DAYS_PER_MONTH))
        recalled = group == "SDC"

    # Texture contrast rises with latent risk; amplitude 0 decouples texture
    # from the label entirely.  The blob scale is drawn once per woman.
    blob_contrast = 0.10 * (1.0 + 1.5 * config.texture_signal_amplitude
                            * float(ndtr(latent)))
    blob_sigma = float(rng.uniform(4.5, 7.5))

    flags: set[str] = set()
    if config.exclusion_rate > 0 and rng.random() < config.exclusion_rate:
        flags.add(str(rng.choice(["VisibleArtifact", "CorruptedView", "PriorCancer"])))

    view_ids = []
    woman_views: dict[str, ViewImage] = {}
    dense_fractions = []
    for slot, key in enumerate(VIEW_ORDER):
        side = Laterality.LEFT if key.startswith("L") else Laterality.RIGHT
        position = ViewPosition.CC if key.endswith("CC") else ViewPosition.MLO
        view_rng = np.random.default_rng([config.seed, index, slot])
        lesion = group == "SDC" and laterality is side
        pixels, dense_fraction = _render_view(
            config, view_rng, axes, side, position, blob_contrast,
            blob_sigma, density_level, lesion)
        view_id = f"{woman_id}_{key}"
        woman_views[view_id] = ViewImage(
            pixels=pixels, pixel_spacing_mm=config.pixel_spacing_mm,
            laterality=side, view_position=position)
        view_ids.append(view_id)
        dense_fractions.append(dense_fraction)

    record = WomanRecord(
        woman_id=woman_id,
        age_years=age,
        screen_date=SCREEN_DATE,
        recalled=recalled,
        diagnosis_date=diagnosis_date,
        cancer_laterality=laterality,
        has_clips=has_clips,
        pmd=float(np.mean(dense_fractions)),
        exclusion_flags=frozenset(flags),
        view_ids=tuple(view_ids),
    )
    return record, woman_views


def generate_cohort_to_store(config: PhantomConfig, views_dir: str | Path,
                             manifest_path: str | Path) -> list[WomanRecord]:
    """Stream generation into an on-disk view store plus JSONL manifest."""
    store = ViewStore(views_dir, create=True)
    records = []
    for index in range(config.n_women):
        record, woman_views = generate_woman(config, index)
        for view_id, view in woman_views.items():
            store.save(view_id, view)
        records.append(record)
    write_manifest(records, manifest_path)
    config_path = Path(manifest_path).with_suffix(".config.json")
    config_path.write_text(json.dumps(config.to_json_dict(), indent=2) + "\n")
    return records
