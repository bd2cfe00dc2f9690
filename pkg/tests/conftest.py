"""Shared fixtures: small deterministic phantoms and profiles."""

import numpy as np
import pytest

from texrisk.imaging.types import (
    FlavorProfile,
    Laterality,
    ViewImage,
    ViewPosition,
)


def make_half_ellipse_view(height=120, width=64, a_mm=36.0, b_mm=30.0,
                           spacing=0.7, base=600.0, noise=0.0, seed=0,
                           laterality=Laterality.LEFT, texture=0.0):
    """Raw phantom used across imaging tests; chest wall flush left."""
    rng = np.random.default_rng(seed)
    rows = (np.arange(height) - height / 2.0) * spacing
    cols = np.arange(width) * spacing + spacing / 2.0
    r2 = (cols[None, :] / b_mm) ** 2 + (rows[:, None] / a_mm) ** 2
    mask = r2 <= 1.0
    image = base * (0.5 + 0.5 * np.sqrt(np.clip(1.0 - r2, 0, None)))
    if texture > 0:
        from scipy.ndimage import gaussian_filter

        blobs = gaussian_filter(rng.normal(size=(height, width)), 5.0)
        image += texture * base * blobs / max(blobs[mask].std(), 1e-9)
    if noise > 0:
        image += rng.normal(0, noise, size=(height, width))
    image[~mask] = 0.0
    pixels = np.clip(np.rint(image), 0, 16383).astype(np.uint16)
    if laterality is Laterality.RIGHT:
        pixels = pixels[:, ::-1].copy()
    return ViewImage(pixels=pixels, pixel_spacing_mm=spacing,
                     laterality=laterality, view_position=ViewPosition.CC), mask


@pytest.fixture
def phantom_view():
    view, _ = make_half_ellipse_view()
    return view


@pytest.fixture
def phantom_view_and_mask():
    return make_half_ellipse_view()


@pytest.fixture
def profile():
    return FlavorProfile(profile_id="test01", alpha=4.0, beta=1.0,
                         gamma=1.0, delta=1.0)
