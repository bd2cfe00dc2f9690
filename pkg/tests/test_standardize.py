"""Standardization statistics and application."""

import numpy as np
import pytest

from texrisk.errors import ZeroVarianceError
from texrisk.imaging.standardize import compute_standardization, standardize
from texrisk.imaging.types import (
    Laterality,
    StandardizationStats,
    ViewImage,
    ViewPosition,
)


def single_pixel_view(value):
    return ViewImage(pixels=np.array([[value]], dtype=np.uint16),
                     pixel_spacing_mm=1.0, laterality=Laterality.LEFT,
                     view_position=ViewPosition.CC)


def test_two_single_pixel_views():
    stats = compute_standardization([single_pixel_view(0),
                                     single_pixel_view(10)], sample_size=2)
    assert stats.mean == pytest.approx(5.0)
    assert stats.std == pytest.approx(5.0)  # population (1/N) convention


def test_constant_views_raise_zero_variance():
    with pytest.raises(ZeroVarianceError):
        compute_standardization([single_pixel_view(7), single_pixel_view(7)],
                                sample_size=2)


def test_sample_size_clamped_to_corpus():
    views = [single_pixel_view(v) for v in (1, 2, 3)]
    stats = compute_standardization(views, sample_size=100, seed=5)
    assert stats.sample_size == 3
    assert stats.mean == pytest.approx(2.0)


def test_deterministic_given_seed():
    rng = np.random.default_rng(0)
    views = [ViewImage(pixels=rng.integers(0, 4000, (16, 12)).astype(np.uint16),
                       pixel_spacing_mm=1.0, laterality=Laterality.LEFT,
                       view_position=ViewPosition.CC) for _ in range(20)]
    a = compute_standardization(views, sample_size=8, seed=3)
    b = compute_standardization(views, sample_size=8, seed=3)
    assert (a.mean, a.std) == (b.mean, b.std)
    c = compute_standardization(views, sample_size=8, seed=4)
    assert (a.mean, a.std) != (c.mean, c.std)


def test_standardize_pointwise():
    stats = StandardizationStats(mean=100.0, std=50.0, sample_size=10)
    view = single_pixel_view(100)
    assert standardize(view, stats)[0, 0] == 0.0
    view = single_pixel_view(150)
    assert standardize(view, stats)[0, 0] == 1.0


def test_restandardized_sample_is_unit():
    rng = np.random.default_rng(1)
    views = [ViewImage(pixels=rng.integers(0, 3000, (20, 15)).astype(np.uint16),
                       pixel_spacing_mm=1.0, laterality=Laterality.LEFT,
                       view_position=ViewPosition.CC) for _ in range(30)]
    stats = compute_standardization(views, sample_size=30, seed=0)
    pooled = np.concatenate([standardize(v, stats).ravel() for v in views])
    assert pooled.mean() == pytest.approx(0.0, abs=1e-6)
    assert pooled.std() == pytest.approx(1.0, abs=1e-6)
