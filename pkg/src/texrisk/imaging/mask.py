"""Breast segmentation and skin-line distance maps.

Segmentation is a global bimodal-histogram split (Otsu) followed by
morphological closing, hole filling, and largest-connected-component
selection.  Distances are Euclidean, measured to the nearest boundary cell of
the mask, where a boundary cell is a mask pixel 4-adjacent to background
*inside* the frame: a mask flush against the image edge (the chest wall) has
no skin-air boundary on that side.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import EmptyMaskError
from .types import BreastMask, DistanceMap, ViewImage

MIN_COMPONENT_FRACTION = 0.01
CLOSING_DISC_RADIUS_PX = 5
FULL_FRAME_BORDER_GUARD_PX = 2


def _disc(radius: int) -> np.ndarray:
    yy, xx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return (yy * yy + xx * xx) <= radius * radius


def otsu_threshold(values: np.ndarray, bins: int = 256) -> float:
    """Threshold maximizing between-class variance of a 1-D sample."""
    values = np.asarray(values, dtype=float).ravel()
    lo, hi = values.min(), values.max()
    if hi <= lo:
        return float(lo)
    hist, edges = np.histogram(values, bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    weight = hist.astype(float)
    w0 = np.cumsum(weight)
    w1 = w0[-1] - w0
    m0 = np.cumsum(weight * centers)
    mu0 = np.divide(m0, w0, out=np.zeros_like(m0), where=w0 > 0)
    mu1 = np.divide(m0[-1] - m0, w1, out=np.zeros_like(m0), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    return float(centers[int(np.argmax(between))])


def compute_breast_mask(view: ViewImage) -> BreastMask:
    """Segment the breast in a raw view.

    Raises EmptyMaskError when no foreground component exceeds
    MIN_COMPONENT_FRACTION of the frame area.
    """
    pixels = view.pixels.astype(float)
    # The bimodal split runs on log intensities: tissue has wide internal
    # contrast (dim compressed interior vs bright thin periphery) and a
    # linear-domain split can land inside the tissue instead of at the
    # air-tissue valley.  The floor keeps an all-dark frame from thresholding
    # at zero and claiming the whole image as foreground.
    floor = max(1.0, 0.005 * view.i_max)
    log_pixels = np.log1p(pixels)
    threshold = max(otsu_threshold(log_pixels), np.log1p(floor))
    foreground = log_pixels >= threshold

    if foreground.all():
        # Degenerate full-foreground frame: carve a border guard so the
        # mask keeps a well-defined skin-air boundary.
        g = FULL_FRAME_BORDER_GUARD_PX
        foreground[:g, :] = False
        foreground[-g:, :] = False
        foreground[:, :g] = False
        foreground[:, -g:] = False

    if not foreground.any():
        raise EmptyMaskError("no foreground pixels above threshold")

    closed = ndimage.binary_closing(foreground, structure=_disc(CLOSING_DISC_RADIUS_PX))
    closed |= foreground  # closing must never erase true foreground
    # pad the chest-wall side with tissue before filling, so dark pockets
    # open to the chest wall (not skin-air) still count as interior
    if view.chest_wall_column == 0:
        padded = np.pad(closed, ((0, 0), (1, 0)), constant_values=True)
        filled = ndimage.binary_fill_holes(padded)[:, 1:]
    else:
        padded = np.pad(closed, ((0, 0), (0, 1)), constant_values=True)
        filled = ndimage.binary_fill_holes(padded)[:, :-1]
    labels, n = ndimage.label(filled)
    if n == 0:
        raise EmptyMaskError("no connected foreground component")
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    biggest = int(np.argmax(sizes))
    if sizes[biggest] <= MIN_COMPONENT_FRACTION * pixels.size:
        raise EmptyMaskError(
            f"largest component covers {sizes[biggest]} px "
            f"(<= {MIN_COMPONENT_FRACTION:.0%} of frame)")
    return BreastMask(labels == biggest)


def boundary_cells(mask: np.ndarray) -> np.ndarray:
    """Mask cells 4-adjacent to in-frame background (the skin-air boundary)."""
    mask = np.asarray(mask, dtype=bool)
    # border_value=1 treats off-frame as tissue, so the chest-wall edge does
    # not become boundary.
    interior = ndimage.binary_erosion(
        mask, structure=ndimage.generate_binary_structure(2, 1), border_value=1)
    return mask & ~interior


def compute_distance_map(mask: BreastMask) -> DistanceMap:
    """Euclidean distance (px) to the nearest skin-air boundary cell; 0 outside."""
    if mask.breast_area_px == 0:
        raise EmptyMaskError("mask is empty")
    boundary = boundary_cells(mask.mask)
    if not boundary.any():
        # Only reachable for a mask flush on every side, which segmentation
        # never produces (border guard).
        raise EmptyMaskError("mask has no skin-air boundary")
    dist = ndimage.distance_transform_edt(~boundary)
    dist[~mask.mask] = 0.0
    return DistanceMap(dist)


def zero_background(view: ViewImage, mask: BreastMask) -> ViewImage:
    """Set every non-mask pixel to 0 (also removes burned-in annotations)."""
    pixels = view.pixels.copy()
    pixels[~mask.mask] = 0
    return view.with_pixels(pixels)
