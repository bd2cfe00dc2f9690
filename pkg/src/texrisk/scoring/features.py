"""Hand-crafted texture features computed from a standardized view.

Stands in for a deep encoder: 32 deterministic global descriptors of the
masked breast region covering intensity statistics, gradient energy, coarse
gray-level co-occurrence, a dense-area (PMD-proxy) fraction, an
edge-band/interior contrast, and band-limited blob energies.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import EmptyMaskError
from ..imaging.mask import boundary_cells, compute_distance_map, otsu_threshold
from ..imaging.types import BreastMask

FEATURE_LENGTH = 32
GLCM_LEVELS = 16
GLCM_OFFSETS = (1, 4)
EDGE_BAND_FRACTION = 0.25  # of the mask's maximum skin distance


def _moments(values: np.ndarray) -> tuple[float, float, float, float]:
    mean = float(values.mean())
    std = float(values.std())
    if std < 1e-12:
        return mean, 0.0, 0.0, 0.0
    z = (values - mean) / std
    return mean, std, float(np.mean(z ** 3)), float(np.mean(z ** 4) - 3.0)


def _entropy(values: np.ndarray, bins: int = 32) -> float:
    hist, _ = np.histogram(values, bins=bins)
    p = hist[hist > 0] / values.size
    return float(-(p * np.log2(p)).sum())


def _glcm_stats(quantized: np.ndarray, valid: np.ndarray, offset: int
                ) -> tuple[float, float, float]:
    """Contrast, correlation, homogeneity over symmetrized h+v pairs."""
    pairs_a, pairs_b = [], []
    for axis in (0, 1):
        a = np.take(quantized, range(quantized.shape[axis] - offset), axis=axis)
        b = np.take(quantized, range(offset, quantized.shape[axis]), axis=axis)
        va = np.take(valid, range(valid.shape[axis] - offset), axis=axis)
        vb = np.take(valid, range(offset, valid.shape[axis]), axis=axis)
        ok = va & vb
        pairs_a.extend((a[ok], b[ok]))  # both directions: symmetric GLCM
        pairs_b.extend((b[ok], a[ok]))
    a = np.concatenate(pairs_a).astype(float)
    b = np.concatenate(pairs_b).astype(float)
    if a.size == 0:
        return 0.0, 0.0, 1.0
    diff = a - b
    contrast = float(np.mean(diff ** 2))
    homogeneity = float(np.mean(1.0 / (1.0 + diff ** 2)))
    sa, sb = a.std(), b.std()
    if sa < 1e-12 or sb < 1e-12:
        correlation = 0.0
    else:
        correlation = float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))
    return contrast, correlation, homogeneity


BLOB_SIGMAS = (1.0, 3.0, 6.0, 10.0)  # consecutive pairs form the three bands


def extract_features(std_view: np.ndarray, mask: BreastMask,
                     dist: np.ndarray | None = None) -> np.ndarray:
    """Compute the 32-value feature vector of a standardized view.

    Deterministic and finite for any non-empty mask.  ``dist`` may carry a
    precomputed skin-distance map for the mask (they are recomputed otherwise).
    """
    if mask.breast_area_px == 0:
        raise EmptyMaskError("cannot extract features from an empty mask")
    grid = np.asarray(std_view, dtype=np.float64)
    if grid.shape != mask.mask.shape:
        raise ValueError("view and mask shapes differ")
    inside = mask.mask
    values = grid[inside]

    mean, std, skew, kurt = _moments(values)
    p10, p25, p50, p75, p90 = np.percentile(values, [10, 25, 50, 75, 90])
    area_fraction = mask.breast_area_px / grid.size
    entropy = _entropy(values)

    gy, gx = np.gradient(grid)
    gmag = np.hypot(gy, gx)[inside]
    grad_mean = float(gmag.mean())
    grad_std = float(gmag.std())
    grad_energy = float(np.mean(gmag ** 2))
    grad_p90 = float(np.percentile(gmag, 90))

    # Quantile-quantized co-occurrence over the masked region.
    if values.std() < 1e-12:
        quantized = np.zeros_like(grid, dtype=np.int32)
    else:
        edges = np.quantile(values, np.linspace(0, 1, GLCM_LEVELS + 1)[1:-1])
        quantized = np.searchsorted(edges, grid, side="right").astype(np.int32)
    glcm = []
    for offset in GLCM_OFFSETS:
        glcm.extend(_glcm_stats(quantized, inside, offset))

    # Dense-area fraction above an adaptive (Otsu) threshold of masked values.
    if values.std() < 1e-12:
        dense_fraction = 0.0
        dense_fraction_halfstd = 0.0
        dense_contrast = 0.0
    else:
        dense = values >= otsu_threshold(values)
        dense_fraction = float(dense.mean())
        dense_fraction_halfstd = float((values >= mean + 0.5 * std).mean())
        if dense.any() and (~dense).any():
            dense_contrast = float(values[dense].mean() - values[~dense].mean())
        else:
            dense_contrast = 0.0

    # Edge band vs interior on a positive-shifted copy (standardized values
    # can be negative, so raw ratios would be unstable).
    if dist is None:
        if boundary_cells(inside).any():
            dist = compute_distance_map(mask).dist
        else:
            # full-frame mask: no skin line, so no edge band either
            dist = np.zeros_like(grid)
    band_px = max(1.0, EDGE_BAND_FRACTION * float(dist.max()))
    band = inside & (dist < band_px)
    interior = inside & (dist >= band_px)
    shifted = grid - values.min() + 1.0
    shifted[~inside] = 0.0
    if band.any() and interior.any():
        band_vals = shifted[band]
        interior_vals = shifted[interior]
        edge_mean_ratio = float(band_vals.mean() / max(interior_vals.mean(), 1e-9))
        edge_std_ratio = float(band_vals.std() / max(interior_vals.std(), 1e-9))
    else:
        edge_mean_ratio = 1.0
        edge_std_ratio = 1.0

    smoothed = [ndimage.gaussian_filter(shifted, s) for s in BLOB_SIGMAS]
    blob_fine, blob_mid, blob_coarse = (
        float((smoothed[i] - smoothed[i + 1])[inside].var()) for i in range(3))
    local_mean_std = float(ndimage.uniform_filter(grid, size=9)[inside].std())
    tail_fraction = float((np.abs(values) > 1.5).mean())

    features = np.array([
        mean, std, skew, kurt,
        p10, p25, p50, p75, p90, p75 - p25,
        area_fraction, entropy,
        grad_mean, grad_std, grad_energy, grad_p90,
        *glcm,
        dense_fraction, dense_fraction_halfstd, dense_contrast,
        edge_mean_ratio, edge_std_ratio,
        blob_fine, blob_mid, blob_coarse,
        local_mean_std, tail_fraction,
    ], dtype=np.float64)
    if features.shape != (FEATURE_LENGTH,):
        raise AssertionError(f"feature vector length {features.shape} != {FEATURE_LENGTH}")
    if not np.all(np.isfinite(features)):
        raise ValueError("non-finite feature encountered")
    return features


FEATURE_NAMES = (
    "mean", "std", "skew", "kurtosis",
    "p10", "p25", "p50", "p75", "p90", "iqr",
    "area_fraction", "entropy",
    "grad_mean", "grad_std", "grad_energy", "grad_p90",
    "glcm1_contrast", "glcm1_correlation", "glcm1_homogeneity",
    "glcm4_contrast", "glcm4_correlation", "glcm4_homogeneity",
    "dense_fraction", "dense_fraction_halfstd", "dense_contrast",
    "edge_mean_ratio", "edge_std_ratio",
    "blob_fine", "blob_mid", "blob_coarse",
    "local_mean_std", "tail_fraction",
)
