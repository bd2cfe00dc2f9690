"""Segmentation and distance-map tests against brute-force oracles."""

import numpy as np
import pytest

from texrisk.errors import EmptyMaskError
from texrisk.imaging.mask import (
    boundary_cells,
    compute_breast_mask,
    compute_distance_map,
    zero_background,
)
from texrisk.imaging.types import BreastMask, Laterality, ViewImage, ViewPosition

from conftest import make_half_ellipse_view


def make_view(pixels):
    return ViewImage(pixels=np.asarray(pixels, dtype=np.uint16),
                     pixel_spacing_mm=0.7, laterality=Laterality.LEFT,
                     view_position=ViewPosition.CC)


def brute_force_distance(mask):
    """Nearest-boundary-cell search in O(n^2); boundary = mask cell with an
    in-frame 4-neighbour outside the mask."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    boundary = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and not mask[ny, nx]:
                    boundary.append((y, x))
                    break
    dist = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            if mask[y, x] and boundary:
                dist[y, x] = min(np.hypot(y - by, x - bx) for by, bx in boundary)
    return dist


class TestBreastMask:
    def test_half_ellipse_area_matches_analytic(self):
        a_mm, b_mm, spacing = 36.0, 30.0, 0.7
        view, _ = make_half_ellipse_view(a_mm=a_mm, b_mm=b_mm, spacing=spacing)
        mask = compute_breast_mask(view)
        analytic_px = (np.pi * a_mm * b_mm / 2.0) / spacing**2
        assert abs(mask.breast_area_px - analytic_px) / analytic_px < 0.01

    def test_all_zero_image_raises(self):
        with pytest.raises(EmptyMaskError):
            compute_breast_mask(make_view(np.zeros((40, 30))))

    def test_tiny_speck_raises(self):
        pixels = np.zeros((50, 50))
        pixels[10, 10] = 900
        with pytest.raises(EmptyMaskError):
            compute_breast_mask(make_view(pixels))

    def test_full_foreground_gets_border_guard(self):
        pixels = np.full((40, 30), 700)
        mask = compute_breast_mask(make_view(pixels))
        assert not mask.mask[0, :].any()
        assert not mask.mask[:, -1].any()
        assert mask.mask[5:-5, 5:-5].all()

    def test_mask_matches_generating_ellipse(self):
        view, true_mask = make_half_ellipse_view()
        mask = compute_breast_mask(view)
        overlap = (mask.mask & true_mask).sum() / true_mask.sum()
        assert overlap > 0.98

    def test_zero_background(self):
        view, _ = make_half_ellipse_view()
        mask = compute_breast_mask(view)
        cleaned = zero_background(view, mask)
        assert (cleaned.pixels[~mask.mask] == 0).all()
        assert (cleaned.pixels[mask.mask] == view.pixels[mask.mask]).all()


class TestDistanceMap:
    def test_boundary_pixels_are_zero(self):
        view, _ = make_half_ellipse_view()
        mask = compute_breast_mask(view)
        dmap = compute_distance_map(mask)
        boundary = boundary_cells(mask.mask)
        assert boundary.any()
        assert (dmap.dist[boundary] == 0).all()

    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_square_center_distance(self, k):
        side = 2 * k + 1
        mask = np.zeros((side + 6, side + 6), dtype=bool)
        mask[3:3 + side, 3:3 + side] = True
        dmap = compute_distance_map(BreastMask(mask))
        assert dmap.dist[3 + k, 3 + k] == pytest.approx(k)

    def test_single_pixel_mask(self):
        mask = np.zeros((9, 9), dtype=bool)
        mask[4, 4] = True
        dmap = compute_distance_map(BreastMask(mask))
        assert dmap.dist[4, 4] == 0.0
        assert (dmap.dist == 0).all()

    def test_zero_outside_mask(self):
        view, _ = make_half_ellipse_view()
        mask = compute_breast_mask(view)
        dmap = compute_distance_map(mask)
        assert (dmap.dist[~mask.mask] == 0).all()

    def test_empty_mask_raises(self):
        with pytest.raises(EmptyMaskError):
            compute_distance_map(BreastMask(np.zeros((5, 5), dtype=bool)))

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_brute_force_on_random_masks(self, seed):
        rng = np.random.default_rng(seed)
        shape = (int(rng.integers(8, 33)), int(rng.integers(8, 33)))
        field = rng.random(shape)
        from scipy.ndimage import gaussian_filter, label

        mask = gaussian_filter(field, 2.5) > np.quantile(
            gaussian_filter(field, 2.5), 0.6)
        if not mask.any():
            return
        labels, n = label(mask)
        sizes = np.bincount(labels.ravel())
        sizes[0] = 0
        mask = labels == np.argmax(sizes)
        dmap = compute_distance_map(BreastMask(mask))
        np.testing.assert_allclose(dmap.dist, brute_force_distance(mask),
                                   atol=1e-9)

    def test_chest_wall_edge_is_not_boundary(self):
        # mask flush against the left edge: distances grow from the skin
        # line, not from the image border
        mask = np.zeros((11, 11), dtype=bool)
        mask[2:9, 0:6] = True
        dmap = compute_distance_map(BreastMask(mask))
        assert dmap.dist[5, 0] > 0  # chest-wall pixel is interior
        np.testing.assert_allclose(dmap.dist, brute_force_distance(mask))
