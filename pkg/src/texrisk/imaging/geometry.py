"""Spatial operations: geometric training augmentation and resolution normalization."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .types import GeometricAugmentation, Laterality, ViewImage

TARGET_SPACING_MM = 0.255
TARGET_HEIGHT_PX = 1194
TARGET_WIDTH_PX = 938


def flip_horizontal(view: ViewImage) -> ViewImage:
    """Mirror a view across the vertical axis, toggling its orientation flag."""
    return view.with_pixels(np.ascontiguousarray(np.fliplr(view.pixels)),
                            flipped=not view.flipped)


def _augment_matrix(aug: GeometricAugmentation) -> np.ndarray:
    """Forward 2x2 affine in (row, col) coordinates: rotation * scale * shear."""
    theta = np.deg2rad(aug.rotation_deg)
    rot = np.array([[np.cos(theta), -np.sin(theta)],
                    [np.sin(theta), np.cos(theta)]])
    scale = (1.0 + aug.scale_factor) * np.eye(2)
    shear = np.array([[1.0, 0.0], [aug.shear_factor, 1.0]])  # x' = x + k*y
    return rot @ scale @ shear


def geometric_augment(view: ViewImage, aug: GeometricAugmentation,
                      rng_seed: int = 0) -> ViewImage:
    """Apply a fixed affine perturbation about the image center.

    Bilinear interpolation, zero background fill.  Right-laterality views are
    flipped across the vertical axis first when ``aug.flip_right_views`` is
    set.  Pure function of (view, aug); ``rng_seed`` is accepted for API
    stability but the warp itself draws no randomness.
    """
    del rng_seed
    out = view
    if aug.flip_right_views and view.laterality is Laterality.RIGHT:
        out = flip_horizontal(out)
    if (aug.rotation_deg, aug.scale_factor, aug.shear_factor) == (0.0, 0.0, 0.0):
        return out.with_pixels(out.pixels.copy())
    forward = _augment_matrix(aug)
    inverse = np.linalg.inv(forward)
    center = (np.asarray(out.pixels.shape, dtype=float) - 1.0) / 2.0
    offset = center - inverse @ center
    warped = ndimage.affine_transform(
        out.pixels.astype(float), inverse, offset=offset, order=1,
        mode="constant", cval=0.0)
    pixels = np.rint(np.clip(warped, 0, view.i_max)).astype(np.uint16)
    return out.with_pixels(pixels)


def resample_and_pad(view: ViewImage,
                     target_spacing_mm: float = TARGET_SPACING_MM,
                     target_shape: tuple[int, int] = (TARGET_HEIGHT_PX, TARGET_WIDTH_PX),
                     ) -> ViewImage:
    """Resample to the target resolution and zero-pad to the target frame.

    Content stays flush to the top row and the chest-wall column; padding goes
    on the opposite sides.  Views still larger than the frame after resampling
    are uniformly downscaled to fit and flagged with ``downscale_warning``.
    """
    target_h, target_w = target_shape
    zoom = view.pixel_spacing_mm / target_spacing_mm
    if zoom == 1.0:
        resampled = view.pixels
    else:
        out_shape = (int(round(view.height_px * zoom)), int(round(view.width_px * zoom)))
        exact = (out_shape[0] / view.height_px, out_shape[1] / view.width_px)
        resampled = ndimage.zoom(view.pixels.astype(float), exact, order=1,
                                 grid_mode=True, mode="grid-constant")
        resampled = np.rint(np.clip(resampled, 0, view.i_max)).astype(np.uint16)

    spacing = target_spacing_mm
    warned = False
    h, w = resampled.shape
    if h > target_h or w > target_w:
        fit = min(target_h / h, target_w / w)
        shrunk_shape = (int(np.floor(h * fit)), int(np.floor(w * fit)))
        exact = (shrunk_shape[0] / h, shrunk_shape[1] / w)
        resampled = ndimage.zoom(resampled.astype(float), exact, order=1,
                                 grid_mode=True, mode="grid-constant")
        resampled = np.rint(np.clip(resampled, 0, view.i_max)).astype(np.uint16)
        spacing = target_spacing_mm / exact[0]
        warned = True
        h, w = resampled.shape

    padded = np.zeros((target_h, target_w), dtype=np.uint16)
    if view.chest_wall_column == 0:
        padded[:h, :w] = resampled
    else:
        padded[:h, target_w - w:] = resampled
    out = view.with_pixels(padded)
    out.pixel_spacing_mm = spacing
    out.downscale_warning = warned
    return out
