"""Geometric augmentation and spatial-normalization tests."""

import numpy as np
import pytest

from texrisk.errors import ParameterOutOfRangeError
from texrisk.imaging.geometry import (
    flip_horizontal,
    geometric_augment,
    resample_and_pad,
)
from texrisk.imaging.types import (
    GeometricAugmentation,
    Laterality,
    ViewImage,
    ViewPosition,
)

from conftest import make_half_ellipse_view


class TestGeometricAugment:
    def test_identity_parameters_bit_exact(self, phantom_view):
        aug = GeometricAugmentation(0.0, 0.0, 0.0, flip_right_views=True)
        out = geometric_augment(phantom_view, aug)
        assert (out.pixels == phantom_view.pixels).all()

    def test_right_view_flip_is_involution(self):
        view, _ = make_half_ellipse_view(laterality=Laterality.RIGHT)
        flipped = flip_horizontal(view)
        assert (flip_horizontal(flipped).pixels == view.pixels).all()
        assert not (flipped.pixels == view.pixels).all()

    def test_right_view_flipped_before_warp(self):
        view, _ = make_half_ellipse_view(laterality=Laterality.RIGHT)
        aug = GeometricAugmentation(0.0, 0.0, 0.0, flip_right_views=True)
        out = geometric_augment(view, aug)
        assert (out.pixels == flip_horizontal(view).pixels).all()
        no_flip = GeometricAugmentation(0.0, 0.0, 0.0, flip_right_views=False)
        assert (geometric_augment(view, no_flip).pixels == view.pixels).all()

    def test_rotation_composition_nearly_cancels(self):
        view, _ = make_half_ellipse_view()
        plus = GeometricAugmentation(rotation_deg=10.0)
        minus = GeometricAugmentation(rotation_deg=-10.0)
        once = geometric_augment(view, plus)
        back = geometric_augment(once, minus)
        mad = np.abs(back.pixels.astype(float) - view.pixels.astype(float)).mean()
        assert mad < 0.02 * view.i_max

    def test_parameters_out_of_range_rejected(self):
        with pytest.raises(ParameterOutOfRangeError):
            GeometricAugmentation(rotation_deg=20.0)
        with pytest.raises(ParameterOutOfRangeError):
            GeometricAugmentation(scale_factor=0.5)
        with pytest.raises(ParameterOutOfRangeError):
            GeometricAugmentation(shear_factor=-0.3)

    def test_sampling_stays_in_ranges(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            aug = GeometricAugmentation.sample(rng)
            assert -15.0 <= aug.rotation_deg <= 15.0
            assert -0.2 <= aug.scale_factor <= 0.2
            assert -0.15 <= aug.shear_factor <= 0.15

    def test_deterministic(self, phantom_view):
        aug = GeometricAugmentation(7.0, 0.1, -0.05)
        a = geometric_augment(phantom_view, aug, rng_seed=1)
        b = geometric_augment(phantom_view, aug, rng_seed=1)
        assert (a.pixels == b.pixels).all()

    def test_background_fill_zero(self, phantom_view):
        aug = GeometricAugmentation(rotation_deg=15.0, scale_factor=-0.2)
        out = geometric_augment(phantom_view, aug)
        assert out.pixels[0, 0] == 0
        assert out.pixels.shape == phantom_view.pixels.shape


def make_sized_view(h, w, spacing, laterality=Laterality.LEFT):
    rng = np.random.default_rng(1)
    pixels = rng.integers(1, 2000, size=(h, w)).astype(np.uint16)
    return ViewImage(pixels=pixels, pixel_spacing_mm=spacing,
                     laterality=laterality, view_position=ViewPosition.CC)


class TestResampleAndPad:
    def test_already_target_is_unchanged(self):
        view = make_sized_view(1194, 938, 0.255)
        out = resample_and_pad(view)
        assert (out.pixels == view.pixels).all()
        assert not out.downscale_warning

    def test_exact_two_times_upsample(self):
        view = make_sized_view(597, 469, 0.51)
        out = resample_and_pad(view)
        assert out.pixels.shape == (1194, 938)
        assert out.pixel_spacing_mm == pytest.approx(0.255)
        assert not out.downscale_warning

    def test_pure_padding_left_view_flush_left(self):
        view = make_sized_view(800, 600, 0.255, Laterality.LEFT)
        out = resample_and_pad(view)
        assert out.pixels.shape == (1194, 938)
        assert (out.pixels[:800, :600] == view.pixels).all()
        assert (out.pixels[800:, :] == 0).all()
        assert (out.pixels[:, 600:] == 0).all()

    def test_right_view_flush_right(self):
        view = make_sized_view(800, 600, 0.255, Laterality.RIGHT)
        out = resample_and_pad(view)
        assert (out.pixels[:800, -600:] == view.pixels).all()
        assert (out.pixels[:, :-600] == 0).all()

    def test_oversized_downscales_with_warning(self):
        view = make_sized_view(700, 500, 0.51)  # -> 1400x1000 after resampling
        out = resample_and_pad(view)
        assert out.pixels.shape == (1194, 938)
        assert out.downscale_warning
        assert out.pixel_spacing_mm > 0.255
