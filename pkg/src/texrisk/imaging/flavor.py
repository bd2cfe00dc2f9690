"""Raw-to-processed flavorization: tone mapping, peripheral correction, enhancement.

The four steps compose as mask -> zero background -> tone map -> peripheral
(edge-tissue) correction -> contrast enhancement.  Each step takes and returns
a uint16 view clamped to [0, 4095]; background stays exactly 0 throughout.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import DegenerateBreastMeanError
from .mask import compute_breast_mask, compute_distance_map, zero_background
from .types import (
    I_MAX_PROCESSED,
    BreastMask,
    DistanceMap,
    FlavorProfile,
    ViewFormat,
    ViewImage,
)

EDGE_GAIN_MAX = 4.0
EDGE_GAIN_SMOOTH_BINS = 3


def tone_map_value(ratio, alpha: float, beta: float, mode: str):
    """Map an intensity ratio I/I_breast through the log + inverse-sigmoid curve.

    In monotone mode the log term is log10((I/I_bar)^2) = 2*log10(I/I_bar),
    giving a map monotone non-increasing in I; squared mode uses
    (log10(I/I_bar))^2, literal to the typeset formula.
    """
    ratio = np.maximum(np.asarray(ratio, dtype=float), 1e-12)
    log_ratio = np.log10(ratio)
    if mode == "monotone_log_square_ratio":
        term = 2.0 * log_ratio
    elif mode == "squared_log_ratio":
        term = log_ratio ** 2
    else:
        raise ValueError(f"unknown tone_map_mode {mode!r}")
    arg = alpha * (term - 1.0) + beta
    with np.errstate(over="ignore"):
        return I_MAX_PROCESSED / (1.0 + np.exp(arg))


def interior_breast_mean(view: ViewImage, mask: BreastMask, dmap: DistanceMap,
                         profile: FlavorProfile) -> float:
    """Mean raw intensity over fully compressed tissue (D >= interior threshold)."""
    threshold_px = profile.interior_threshold_mm / view.pixel_spacing_mm
    region = mask.mask & (dmap.dist >= threshold_px)
    if not region.any():
        raise DegenerateBreastMeanError(
            f"no pixels at depth >= {profile.interior_threshold_mm} mm")
    mean = float(view.pixels[region].mean())
    if mean <= 0:
        raise DegenerateBreastMeanError(f"interior mean {mean} is not positive")
    return mean


def apply_tone_map(view: ViewImage, mask: BreastMask, profile: FlavorProfile,
                   dmap: DistanceMap | None = None) -> ViewImage:
    """Tone-map breast pixels; background forced to 0; output in [0, 4095]."""
    if dmap is None:
        dmap = compute_distance_map(mask)
    i_bar = interior_breast_mean(view, mask, dmap, profile)
    out = np.zeros(view.pixels.shape, dtype=float)
    inside = mask.mask
    out[inside] = tone_map_value(view.pixels[inside] / i_bar,
                                 profile.alpha, profile.beta, profile.tone_map_mode)
    pixels = np.rint(np.clip(out, 0, I_MAX_PROCESSED)).astype(np.uint16)
    return view.with_pixels(pixels, i_max=I_MAX_PROCESSED)


def edge_gain_curve(pixels: np.ndarray, mask: np.ndarray, dist: np.ndarray,
                    band_px: float) -> tuple[np.ndarray, np.ndarray]:
    """Distance-binned gain lifting the edge band toward the interior mean.

    Returns (bin positions, gains) suitable for linear interpolation over
    distance; the curve is anchored at gain 1 on the band's inner boundary.
    """
    interior = mask & (dist >= band_px)
    band = mask & (dist < band_px)
    n_bins = int(np.ceil(band_px))
    if not interior.any() or not band.any() or n_bins == 0:
        return np.array([0.0, band_px]), np.array([1.0, 1.0])
    interior_mean = pixels[interior].mean()
    if interior_mean <= 0:
        return np.array([0.0, band_px]), np.array([1.0, 1.0])

    bin_width = band_px / n_bins
    bin_index = np.minimum((dist[band] / bin_width).astype(int), n_bins - 1)
    sums = np.bincount(bin_index, weights=pixels[band].astype(float), minlength=n_bins)
    counts = np.bincount(bin_index, minlength=n_bins)
    gains = np.ones(n_bins)
    nonempty = counts > 0
    means = sums[nonempty] / counts[nonempty]
    gains[nonempty] = np.where(means > 0, interior_mean / np.maximum(means, 1e-9), 1.0)

    if n_bins >= EDGE_GAIN_SMOOTH_BINS:
        kernel = np.ones(EDGE_GAIN_SMOOTH_BINS) / EDGE_GAIN_SMOOTH_BINS
        padded = np.concatenate([gains[:1], gains, [1.0]])  # interior continues at 1
        gains = np.convolve(padded, kernel, mode="valid")
    gains = np.clip(gains, 1.0, EDGE_GAIN_MAX)

    positions = (np.arange(n_bins) + 0.5) * bin_width
    return np.concatenate([positions, [band_px]]), np.concatenate([gains, [1.0]])


def correct_peripheral_tissue(view: ViewImage, mask: BreastMask, dmap: DistanceMap,
                              profile: FlavorProfile) -> ViewImage:
    """Lift thin peripheral tissue so its distance-binned mean approaches the interior mean.

    Interior pixels (D >= band) are returned unchanged; an empty band or empty
    interior makes the whole step a no-op.
    """
    band_px = profile.edge_band_mm / view.pixel_spacing_mm
    positions, gains = edge_gain_curve(view.pixels, mask.mask, dmap.dist, band_px)
    if np.all(gains == 1.0):
        return view.with_pixels(view.pixels.copy())
    out = view.pixels.astype(float)
    band = mask.mask & (dmap.dist < band_px)
    out[band] *= np.interp(dmap.dist[band], positions, gains)
    pixels = np.rint(np.clip(out, 0, I_MAX_PROCESSED)).astype(np.uint16)
    return view.with_pixels(pixels)


def enhancement_mask(pixels: np.ndarray, sigma_px: float) -> np.ndarray:
    """Difference between the view and its Gaussian low-pass."""
    as_float = pixels.astype(float)
    return as_float - ndimage.gaussian_filter(as_float, sigma=sigma_px)


def enhance_contrast(view: ViewImage, mask: BreastMask, profile: FlavorProfile) -> ViewImage:
    """Unsharp-style enhancement: I' = gamma*I + delta*(F/I_max)*I inside the mask."""
    if profile.gamma == 1.0 and profile.delta == 0.0:
        return view.with_pixels(view.pixels.copy())
    as_float = view.pixels.astype(float)
    f = enhancement_mask(view.pixels, profile.lowpass_sigma_px)
    out = profile.gamma * as_float + profile.delta * (f / I_MAX_PROCESSED) * as_float
    out[~mask.mask] = 0.0
    pixels = np.rint(np.clip(out, 0, I_MAX_PROCESSED)).astype(np.uint16)
    return view.with_pixels(pixels)


def flavorize(view: ViewImage, profile: FlavorProfile,
              skip_tone_map: bool = False, skip_edge_correction: bool = False,
              skip_enhancement: bool = False,
              mask: BreastMask | None = None,
              dmap: DistanceMap | None = None) -> ViewImage:
    """Run the full raw-to-flavor pipeline for one profile.

    Deterministic for a fixed (view, profile).  The skip flags exist for
    fixture/bypass paths (tuner previews); the production pipeline runs all
    four steps.  ``mask``/``dmap`` may carry precomputed segmentation when one
    view is flavorized under many profiles.
    """
    if view.fmt.kind != "raw":
        raise ValueError(f"flavorize expects a raw view, got {view.fmt.tag()}")
    if mask is None:
        mask = compute_breast_mask(view)
    if dmap is None:
        dmap = compute_distance_map(mask)
    out = zero_background(view, mask)
    if not skip_tone_map:
        out = apply_tone_map(out, mask, profile, dmap)
    if not skip_edge_correction:
        out = correct_peripheral_tissue(out, mask, dmap, profile)
    if not skip_enhancement:
        out = enhance_contrast(out, mask, profile)
    pixels = np.minimum(out.pixels, I_MAX_PROCESSED)
    return out.with_pixels(pixels, fmt=ViewFormat("flavor", profile.profile_id),
                           i_max=I_MAX_PROCESSED)


def default_profiles() -> dict[str, FlavorProfile]:
    """The shipped seven-profile set.

    flavor01..flavor06 span the alpha/beta tuning grid with distinct
    gamma/delta pairs and are intended for training-time augmentation;
    flavor07 sits outside the training grid's convex hull in (alpha, delta)
    and is reserved as the unseen test flavor.
    """
    # gamma stays at or below 1.0: the tone curve parks dense tissue near the
    # white point, and gamma above 1 would clip it flat, wiping the texture
    # the enhancement step is meant to amplify.
    rows = [
        ("flavor01", 4.00, 0.70, 0.85, 0.60, 8.0),
        ("flavor02", 4.00, 1.20, 1.00, 1.60, 6.0),
        ("flavor03", 4.75, 0.95, 0.90, 0.40, 10.0),
        ("flavor04", 4.75, 0.70, 0.80, 2.40, 8.0),
        ("flavor05", 5.50, 0.95, 1.00, 1.20, 6.0),
        ("flavor06", 5.50, 1.20, 0.95, 2.00, 10.0),
        ("flavor07", 5.90, 1.00, 0.90, 3.00, 7.0),
    ]
    return {
        pid: FlavorProfile(profile_id=pid, alpha=a, beta=b, gamma=g, delta=d,
                           lowpass_sigma_px=s)
        for pid, a, b, g, d, s in rows
    }


TRAINING_PROFILE_IDS = tuple(f"flavor0{i}" for i in range(1, 7))
HELD_OUT_PROFILE_ID = "flavor07"
