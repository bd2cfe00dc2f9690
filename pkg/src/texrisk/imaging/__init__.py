"""Flavorization, segmentation, geometry, and standardization for mammographic views."""

from .flavor import (
    HELD_OUT_PROFILE_ID,
    TRAINING_PROFILE_IDS,
    apply_tone_map,
    correct_peripheral_tissue,
    default_profiles,
    enhance_contrast,
    enhancement_mask,
    flavorize,
    tone_map_value,
)
from .geometry import flip_horizontal, geometric_augment, resample_and_pad
from .mask import compute_breast_mask, compute_distance_map, zero_background
from .standardize import compute_standardization, standardize
from .types import (
    I_MAX_PROCESSED,
    I_MAX_RAW,
    RAW,
    BreastMask,
    DistanceMap,
    FlavorProfile,
    GeometricAugmentation,
    Laterality,
    StandardizationStats,
    ViewFormat,
    ViewImage,
    ViewPosition,
    load_profiles,
    save_profile,
)

__all__ = [
    "I_MAX_PROCESSED", "I_MAX_RAW", "RAW", "BreastMask", "DistanceMap",
    "FlavorProfile", "GeometricAugmentation", "Laterality",
    "StandardizationStats", "ViewFormat", "ViewImage", "ViewPosition",
    "HELD_OUT_PROFILE_ID", "TRAINING_PROFILE_IDS",
    "apply_tone_map", "compute_breast_mask", "compute_distance_map",
    "compute_standardization", "correct_peripheral_tissue", "default_profiles",
    "enhance_contrast", "enhancement_mask", "flavorize", "flip_horizontal",
    "geometric_augment", "load_profiles", "resample_and_pad", "save_profile",
    "standardize", "tone_map_value", "zero_background",
]
