"""Core image-domain types: views, masks, distance maps, flavor profiles."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from ..errors import ParameterOutOfRangeError, ZeroVarianceError

I_MAX_PROCESSED = 4095
I_MAX_RAW = 16383

VIEW_POSITIONS = ("CC", "MLO")


class Laterality(str, Enum):
    LEFT = "L"
    RIGHT = "R"


class ViewPosition(str, Enum):
    CC = "CC"
    MLO = "MLO"


@dataclass(frozen=True)
class ViewFormat:
    """Format tag of a view: raw detector output, a synthetic flavor, or vendor-processed."""

    kind: str  # "raw" | "flavor" | "processed"
    profile_id: str | None = None

    def __post_init__(self):
        if self.kind not in ("raw", "flavor", "processed"):
            raise ValueError(f"unknown view format kind {self.kind!r}")
        if self.kind == "flavor" and not self.profile_id:
            raise ValueError("flavor format requires a profile_id")

    def tag(self) -> str:
        return f"flavor:{self.profile_id}" if self.kind == "flavor" else self.kind

    @classmethod
    def from_tag(cls, tag: str) -> "ViewFormat":
        if tag.startswith("flavor:"):
            return cls("flavor", tag.split(":", 1)[1])
        return cls(tag)


RAW = ViewFormat("raw")
PROCESSED = ViewFormat("processed")


@dataclass
class ViewImage:
    """One mammographic view: a uint16 pixel grid plus acquisition metadata."""

    pixels: np.ndarray
    pixel_spacing_mm: float
    laterality: Laterality
    view_position: ViewPosition
    fmt: ViewFormat = RAW
    i_max: int = I_MAX_RAW
    downscale_warning: bool = False
    flipped: bool = False  # mirrored across the vertical axis upstream

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        if self.pixels.ndim != 2:
            raise ValueError("view pixels must be a 2-D grid")
        if self.pixels.dtype != np.uint16:
            if np.any(self.pixels < 0) or np.any(self.pixels > 65535):
                raise ValueError("pixel values outside uint16 range")
            self.pixels = self.pixels.astype(np.uint16)
        if not self.pixel_spacing_mm > 0:
            raise ValueError("pixel_spacing_mm must be positive")
        self.laterality = Laterality(self.laterality)
        self.view_position = ViewPosition(self.view_position)

    @property
    def height_px(self) -> int:
        return self.pixels.shape[0]

    @property
    def width_px(self) -> int:
        return self.pixels.shape[1]

    @property
    def chest_wall_column(self) -> int:
        """Column index of the chest-wall edge.

        Left views sit flush left, right views flush right; a horizontal flip
        swaps the side.
        """
        at_left = (self.laterality is Laterality.LEFT) != self.flipped
        return 0 if at_left else self.width_px - 1

    def with_pixels(self, pixels: np.ndarray, fmt: ViewFormat | None = None,
                    i_max: int | None = None, **kw) -> "ViewImage":
        return replace(self, pixels=pixels, fmt=fmt or self.fmt,
                       i_max=self.i_max if i_max is None else i_max, **kw)


@dataclass
class BreastMask:
    """Boolean grid delineating breast tissue, congruent with its source view."""

    mask: np.ndarray
    breast_area_px: int = field(init=False)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 2:
            raise ValueError("mask must be a 2-D grid")
        self.breast_area_px = int(self.mask.sum())


@dataclass
class DistanceMap:
    """Per-pixel Euclidean distance (px) to the skin-air boundary; 0 outside the mask."""

    dist: np.ndarray

    def __post_init__(self):
        self.dist = np.asarray(self.dist, dtype=float)


# Validation bounds for profile fields.  The inner (soft) ranges are the spans
# used when constructing the shipped profile grid; the hard bounds gate any
# user-supplied profile (tuner requests, profile files).
PROFILE_HARD_BOUNDS = {
    "alpha": (0.1, 20.0),
    "beta": (0.0, 5.0),
    "gamma": (0.0, 10.0),
    "delta": (0.0, 10.0),
    "lowpass_sigma_px": (0.1, 64.0),
    "edge_band_mm": (0.1, 100.0),
    "interior_threshold_mm": (0.1, 200.0),
}
PROFILE_SOFT_RANGES = {"alpha": (4.0, 5.5), "beta": (0.7, 1.2)}

TONE_MAP_MODES = ("monotone_log_square_ratio", "squared_log_ratio")


@dataclass(frozen=True)
class FlavorProfile:
    """Parameter set defining one synthetic processed-view style."""

    profile_id: str
    alpha: float
    beta: float
    gamma: float
    delta: float
    tone_map_mode: str = "monotone_log_square_ratio"
    lowpass_sigma_px: float = 8.0
    edge_band_mm: float = 12.0
    interior_threshold_mm: float = 20.0

    def __post_init__(self):
        if not self.profile_id:
            raise ParameterOutOfRangeError("profile_id must be non-empty")
        if self.tone_map_mode not in TONE_MAP_MODES:
            raise ParameterOutOfRangeError(
                f"tone_map_mode must be one of {TONE_MAP_MODES}, got {self.tone_map_mode!r}")
        for name, (lo, hi) in PROFILE_HARD_BOUNDS.items():
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ParameterOutOfRangeError(f"{name} must be finite, got {value!r}")
            if not lo <= value <= hi:
                raise ParameterOutOfRangeError(
                    f"{name}={value} outside allowed range [{lo}, {hi}]")

    def to_dict(self) -> dict:
        return {
            "profile_id": self.profile_id,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "delta": self.delta,
            "tone_map_mode": self.tone_map_mode,
            "lowpass_sigma_px": self.lowpass_sigma_px,
            "edge_band_mm": self.edge_band_mm,
            "interior_threshold_mm": self.interior_threshold_mm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FlavorProfile":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


def load_profiles(directory: str | Path) -> dict[str, FlavorProfile]:
    """Load every ``*.json`` profile in a directory, keyed by profile_id."""
    profiles: dict[str, FlavorProfile] = {}
    for path in sorted(Path(directory).glob("*.json")):
        profile = FlavorProfile.from_dict(json.loads(path.read_text()))
        if profile.profile_id in profiles:
            raise ParameterOutOfRangeError(
                f"duplicate profile_id {profile.profile_id!r} in {directory}")
        profiles[profile.profile_id] = profile
    return profiles


def save_profile(profile: FlavorProfile, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{profile.profile_id}.json"
    path.write_text(json.dumps(profile.to_dict(), indent=2) + "\n")
    return path


AUGMENT_RANGES = {
    "rotation_deg": (-15.0, 15.0),
    "scale_factor": (-0.2, 0.2),
    "shear_factor": (-0.15, 0.15),
}


@dataclass(frozen=True)
class GeometricAugmentation:
    """One sampled geometric perturbation mimicking scanner-position variation."""

    rotation_deg: float = 0.0
    scale_factor: float = 0.0
    shear_factor: float = 0.0
    flip_right_views: bool = True

    def __post_init__(self):
        for name, (lo, hi) in AUGMENT_RANGES.items():
            value = getattr(self, name)
            if not (math.isfinite(value) and lo <= value <= hi):
                raise ParameterOutOfRangeError(
                    f"{name}={value} outside allowed range [{lo}, {hi}]")

    @classmethod
    def sample(cls, rng: np.random.Generator, flip_right_views: bool = True
               ) -> "GeometricAugmentation":
        """Draw parameters uniformly over the declared ranges."""
        draws = {name: float(rng.uniform(lo, hi))
                 for name, (lo, hi) in AUGMENT_RANGES.items()}
        return cls(flip_right_views=flip_right_views, **draws)


@dataclass(frozen=True)
class StandardizationStats:
    """Pooled pixel mean/std of a sampled view set, used to normalize scorer input."""

    mean: float
    std: float
    sample_size: int

    def __post_init__(self):
        if not self.std > 0:
            raise ZeroVarianceError("standardization std must be positive")
