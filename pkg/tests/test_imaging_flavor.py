"""Tone map, peripheral correction, enhancement, and full-pipeline tests."""

import numpy as np
import pytest

from texrisk.errors import DegenerateBreastMeanError
from texrisk.imaging.flavor import (
    apply_tone_map,
    correct_peripheral_tissue,
    default_profiles,
    enhance_contrast,
    enhancement_mask,
    flavorize,
    tone_map_value,
)
from texrisk.imaging.mask import compute_breast_mask, compute_distance_map
from texrisk.imaging.types import (
    BreastMask,
    DistanceMap,
    FlavorProfile,
    Laterality,
    ViewImage,
    ViewPosition,
)

from conftest import make_half_ellipse_view


def make_profile(**kw):
    defaults = dict(profile_id="p", alpha=4.0, beta=1.0, gamma=1.0, delta=0.0)
    defaults.update(kw)
    return FlavorProfile(**defaults)


def make_view(pixels, spacing=0.7):
    return ViewImage(pixels=np.asarray(pixels, dtype=np.uint16),
                     pixel_spacing_mm=spacing, laterality=Laterality.LEFT,
                     view_position=ViewPosition.CC)


class TestToneMap:
    def test_hand_value_at_ratio_one(self):
        # I = I_breast, alpha=4, beta=1: exponent argument is -4 + 1 = -3
        expected = 4095.0 / (1.0 + np.exp(-3.0))
        assert expected == pytest.approx(3900.8, abs=0.05)
        for mode in ("monotone_log_square_ratio", "squared_log_ratio"):
            assert tone_map_value(1.0, 4.0, 1.0, mode) == pytest.approx(expected)

    def test_modes_agree_exactly_at_ratio_one(self):
        a = tone_map_value(1.0, 5.2, 0.8, "monotone_log_square_ratio")
        b = tone_map_value(1.0, 5.2, 0.8, "squared_log_ratio")
        assert a == b

    def test_monotone_mode_is_non_increasing(self):
        rng = np.random.default_rng(0)
        ratios = np.sort(rng.uniform(0.05, 20.0, size=200))
        out = tone_map_value(ratios, 4.7, 0.9, "monotone_log_square_ratio")
        assert (np.diff(out) <= 1e-9).all()

    def test_squared_mode_is_not_monotone(self):
        ratios = np.array([0.2, 1.0, 5.0])
        out = tone_map_value(ratios, 4.0, 1.0, "squared_log_ratio")
        assert out[1] > out[0] and out[1] > out[2]

    def test_monotone_order_preserved_on_ramp_view(self):
        # 8-level synthetic ramp, checked exhaustively on all pixel pairs
        levels = np.array([100, 200, 300, 400, 500, 600, 700, 800])
        pixels = np.zeros((44, 70))
        for i, level in enumerate(levels):
            pixels[2:-2, 2 + i * 8:2 + (i + 1) * 8] = level
        view = make_view(pixels)
        mask = BreastMask(pixels > 0)
        profile = make_profile(interior_threshold_mm=1.0)
        mapped = apply_tone_map(view, mask, profile)
        outs = [mapped.pixels[12, 4 + i * 8] for i in range(8)]
        for lo, hi in zip(outs[:-1], outs[1:]):
            assert lo >= hi

    def test_background_forced_to_zero(self, phantom_view):
        mask = compute_breast_mask(phantom_view)
        mapped = apply_tone_map(phantom_view, mask, make_profile())
        assert (mapped.pixels[~mask.mask] == 0).all()
        assert mapped.pixels.max() <= 4095

    def test_interior_pixels_at_mean_map_to_hand_value(self):
        pixels = np.full((60, 60), 500.0)
        pixels[:2, :] = 0  # leave a boundary so the mask is well-formed
        view = make_view(pixels)
        mask = BreastMask(pixels > 0)
        profile = make_profile(interior_threshold_mm=2.0)
        mapped = apply_tone_map(view, mask, profile)
        # constant region: I == I_breast everywhere inside
        interior = mask.mask.copy()
        interior[:10, :] = False
        expected = round(4095.0 / (1.0 + np.exp(-3.0)))
        assert (mapped.pixels[interior] == expected).all()

    def test_degenerate_interior_raises(self):
        pixels = np.zeros((30, 30))
        pixels[10:14, 10:14] = 400  # tiny blob, no pixel 20 mm deep
        view = make_view(pixels)
        mask = BreastMask(pixels > 0)
        with pytest.raises(DegenerateBreastMeanError):
            apply_tone_map(view, mask, make_profile(interior_threshold_mm=20.0))


class TestPeripheralCorrection:
    def _mask_dmap(self, pixels):
        mask = BreastMask(np.asarray(pixels) > 0)
        return mask, compute_distance_map(mask)

    def test_uniform_breast_is_identity_within_one_unit(self):
        view, ellipse = make_half_ellipse_view(base=900.0)
        flat = np.where(ellipse, 2000, 0).astype(np.uint16)
        view = make_view(flat)
        mask, dmap = self._mask_dmap(flat)
        out = correct_peripheral_tissue(view, mask, dmap, make_profile())
        assert np.abs(out.pixels.astype(int) - flat.astype(int)).max() <= 1

    def test_interior_unchanged_exactly(self):
        view, _ = make_half_ellipse_view()
        mask = compute_breast_mask(view)
        dmap = compute_distance_map(mask)
        profile = make_profile(edge_band_mm=10.0)
        out = correct_peripheral_tissue(view, mask, dmap, profile)
        band_px = profile.edge_band_mm / view.pixel_spacing_mm
        interior = mask.mask & (dmap.dist >= band_px)
        assert (out.pixels[interior] == view.pixels[interior]).all()

    def test_linear_falloff_bins_reach_interior_mean(self):
        # intensity ramps from 50% at the skin line to 100% at the band edge
        view, ellipse = make_half_ellipse_view()
        mask, dmap = self._mask_dmap(np.where(ellipse, 1, 0))
        band_mm = 12.0
        band_px = band_mm / view.pixel_spacing_mm
        ramp = np.clip(dmap.dist / band_px, 0.0, 1.0)
        pixels = np.where(ellipse, 2000.0 * (0.5 + 0.5 * ramp), 0.0)
        view = make_view(pixels)
        profile = make_profile(edge_band_mm=band_mm)
        out = correct_peripheral_tissue(view, mask, dmap, profile)

        # independent histogram oracle: per-integer-distance-bin means
        interior_mean = out.pixels[ellipse & (dmap.dist >= band_px)].mean()
        for b in range(int(band_px)):
            sel = ellipse & (dmap.dist >= b) & (dmap.dist < b + 1)
            if sel.sum() < 20:
                continue
            bin_mean = out.pixels[sel].mean()
            assert abs(bin_mean - interior_mean) / interior_mean < 0.05

    def test_band_spanning_whole_breast_is_noop(self):
        # no interior left to define a target mean: the step must be a no-op
        view, _ = make_half_ellipse_view()
        mask = compute_breast_mask(view)
        dmap = compute_distance_map(mask)
        profile = make_profile(edge_band_mm=90.0)
        out = correct_peripheral_tissue(view, mask, dmap, profile)
        assert (out.pixels == view.pixels).all()


class TestEnhancement:
    def brute_force_gaussian(self, image, sigma):
        """Direct separable convolution with a truncated gaussian kernel and
        edge-repeating reflect boundary (numpy pad mode 'symmetric')."""
        radius = int(4.0 * sigma + 0.5)
        x = np.arange(-radius, radius + 1)
        kernel = np.exp(-0.5 * (x / sigma) ** 2)
        kernel /= kernel.sum()
        padded = np.pad(image, radius, mode="symmetric")
        rows = np.apply_along_axis(np.convolve, 1, padded, kernel, mode="same")
        out = np.apply_along_axis(np.convolve, 0, rows, kernel, mode="same")
        return out[radius:-radius, radius:-radius]

    def test_identity_parameters_bit_exact(self, phantom_view):
        mask = compute_breast_mask(phantom_view)
        out = enhance_contrast(phantom_view, mask,
                               make_profile(gamma=1.0, delta=0.0))
        assert (out.pixels == phantom_view.pixels).all()

    def test_pure_linear_scaling(self):
        pixels = np.zeros((30, 30))
        pixels[5:25, 5:25] = 1000
        view = make_view(pixels)
        mask = BreastMask(pixels > 0)
        out = enhance_contrast(view, mask, make_profile(gamma=0.5, delta=0.0))
        assert (out.pixels[mask.mask] == 500).all()

    def test_constant_view_gives_zero_enhancement_mask(self):
        # full-frame constant: the low-pass of a constant is the constant
        pixels = np.full((40, 40), 700.0)
        f = enhancement_mask(pixels, sigma_px=3.0)
        np.testing.assert_allclose(f, 0.0, atol=1e-9)
        oracle = pixels - self.brute_force_gaussian(pixels, 3.0)
        np.testing.assert_allclose(f, oracle, atol=1e-7)
        view = make_view(pixels)
        mask = BreastMask(np.ones_like(pixels, dtype=bool))
        out = enhance_contrast(view, mask, make_profile(gamma=0.8, delta=2.0))
        assert (out.pixels == round(0.8 * 700)).all()

    def test_enhancement_mask_matches_brute_force(self):
        rng = np.random.default_rng(3)
        image = rng.uniform(0, 2000, size=(36, 28))
        f = enhancement_mask(image, sigma_px=2.0)
        oracle = image - self.brute_force_gaussian(image, 2.0)
        np.testing.assert_allclose(f, oracle, rtol=1e-6, atol=1e-6)

    def test_lowpass_linearity(self):
        rng = np.random.default_rng(4)
        image = rng.uniform(0, 1500, size=(24, 24))
        f1 = enhancement_mask(image, 2.5)
        f3 = enhancement_mask(3.0 * image, 2.5)
        np.testing.assert_allclose(f3, 3.0 * f1, rtol=1e-9, atol=1e-6)


class TestFlavorize:
    def test_deterministic(self, phantom_view, profile):
        a = flavorize(phantom_view, profile)
        b = flavorize(phantom_view, profile)
        assert (a.pixels == b.pixels).all()
        assert a.fmt.tag() == f"flavor:{profile.profile_id}"

    def test_delta_shift_changes_pixels(self):
        view, _ = make_half_ellipse_view(texture=0.08, seed=5)
        p1 = make_profile(delta=0.5)
        p2 = make_profile(delta=1.0)
        a = flavorize(view, p1)
        b = flavorize(view, p2)
        mask = compute_breast_mask(view)
        differing = (a.pixels != b.pixels)[mask.mask].mean()
        assert differing > 0.01

    def test_output_range_and_background(self):
        for pid, profile in default_profiles().items():
            view, _ = make_half_ellipse_view(texture=0.05, noise=15.0,
                                             seed=hash(pid) % 1000)
            out = flavorize(view, profile)
            mask = compute_breast_mask(view)
            assert out.pixels.max() <= 4095
            assert (out.pixels[~mask.mask] == 0).all()
            assert out.i_max == 4095

    def test_requires_raw_input(self, phantom_view, profile):
        flavored = flavorize(phantom_view, profile)
        with pytest.raises(ValueError):
            flavorize(flavored, profile)

    def test_annotation_burnin_removed(self):
        view, ellipse = make_half_ellipse_view()
        pixels = view.pixels.copy()
        pixels[2:8, -12:-2] = 3000  # burned-in annotation in the background
        annotated = make_view(pixels)
        out = flavorize(annotated, make_profile())
        assert (out.pixels[2:8, -12:-2] == 0).all()

    def test_default_profile_set_shape(self):
        profiles = default_profiles()
        assert len(profiles) == 7
        alphas = {p.alpha for p in profiles.values()}
        assert min(alphas) >= 4.0 - 1e-9
        train = [profiles[f"flavor0{i}"] for i in range(1, 7)]
        held_out = profiles["flavor07"]
        assert held_out.alpha > max(p.alpha for p in train)
        assert held_out.delta > max(p.delta for p in train)
