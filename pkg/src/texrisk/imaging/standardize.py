"""Inference-time intensity standardization from a sampled view set."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ..errors import ZeroVarianceError
from .types import StandardizationStats, ViewImage

DEFAULT_SAMPLE_SIZE = 1000


def compute_standardization(views: Sequence[ViewImage],
                            sample_size: int = DEFAULT_SAMPLE_SIZE,
                            seed: int = 0) -> StandardizationStats:
    """Pooled pixel mean/std over a random view sample (background included).

    Sampling is without replacement; a sample_size above the corpus size uses
    the whole corpus.  Std is the population (1/N) convention.
    """
    if len(views) == 0:
        raise ValueError("view sample must be non-empty")
    n = min(sample_size, len(views))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(views), size=n, replace=False)

    total = 0
    s1 = 0.0
    s2 = 0.0
    for idx in chosen:
        px = views[int(idx)].pixels.astype(np.float64)
        total += px.size
        s1 += float(px.sum())
        s2 += float((px * px).sum())
    mean = s1 / total
    var = max(s2 / total - mean * mean, 0.0)
    std = float(np.sqrt(var))
    if std == 0.0:
        raise ZeroVarianceError(f"sampled views are constant at {mean}")
    return StandardizationStats(mean=mean, std=std, sample_size=n)


def standardize(view: ViewImage, stats: StandardizationStats) -> np.ndarray:
    """Return (pixels - mean)/std as a float64 grid for scorer consumption."""
    return (view.pixels.astype(np.float64) - stats.mean) / stats.std
