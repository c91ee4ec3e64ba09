"""Background plates and the deterministic frame synthesizer."""

import logging
from typing import Optional

import numpy as np

from ..core.oar import OarFrame
from ..ingest.relations import depth_order
from .flow import backward_map, is_rigid_pair
from .raster import (
    DEFAULT_BACKGROUND, RasterFrame, box_slices, check_raster, foreground_support,
    owner_map, sprite_pixels, to_uint8
)
from .warp import sample_bilinear


logger = logging.getLogger(__name__)


def _row_fill(image: np.ndarray, hole: np.ndarray) -> np.ndarray:
    """Replace hole pixels by the nearest non-hole pixel of the same row (left wins ties)."""
    height, width = hole.shape
    cols = np.broadcast_to(np.arange(width), (height, width))

    left = np.maximum.accumulate(np.where(hole, -1, cols), axis=1)
    right = np.minimum.accumulate(np.where(hole, width, cols)[:, ::-1], axis=1)[:, ::-1]

    has_left = left >= 0
    has_right = right < width
    use_left = has_left & (~has_right | (cols - left <= right - cols))
    src = np.where(use_left, left, np.where(has_right, right, cols))

    rows = np.broadcast_to(np.arange(height)[:, None], (height, width))
    filled = image[rows, src]
    return np.where(hole[..., None], filled, image)


def background_plate(reference: RasterFrame, ref_frame: OarFrame) -> RasterFrame:
    """
    Reference frame with its foreground boxes inpainted.

    Each covered pixel takes the nearest uncovered pixel of its row; rows
    covered end to end take the nearest filled pixel of their column, and a
    fully covered frame falls back to the default background color.
    """
    height, width = reference.shape[:2]
    hole = foreground_support([ref_frame], width, height)
    if not hole.any():
        return reference.copy()
    if hole.all():
        plate = np.empty_like(reference)
        plate[...] = np.asarray(DEFAULT_BACKGROUND, dtype=np.uint8)
        return plate

    plate = _row_fill(reference, hole)
    full_rows = hole.all(axis=1)
    if full_rows.any():
        column_hole = np.broadcast_to(full_rows[:, None], hole.shape)
        plate = np.swapaxes(
            _row_fill(np.swapaxes(plate, 0, 1), np.ascontiguousarray(column_hole.T)), 0, 1
        )
    return plate


def layout_support(layout: Optional[np.ndarray], width: int, height: int, downscale: int = 1) -> np.ndarray:
    """Pixels whose layout cell carries a nonzero feature (all pixels when no layout)."""
    if layout is None:
        return np.ones((height, width), dtype=bool)
    cells = np.any(layout != 0, axis=2)
    ii = np.arange(height) // downscale
    jj = np.arange(width) // downscale
    return cells[ii[:, None], jj[None, :]]


def synthesize_float(
    layout: Optional[np.ndarray],
    frame: OarFrame,
    reference: RasterFrame,
    background: RasterFrame,
    ref_frame: Optional[OarFrame] = None,
    downscale: int = 1,
    support: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Paint the background plate, then every object back to front.

    An object that exists in ref_frame is resampled from the reference
    frame through its backward affine map; source pixels it does not own
    in the reference fall back to its sprite. Objects absent from the
    reference, or resized by the canvas border since it, are painted as
    category sprites. Painting is limited to the layout's support.

    Args:
        layout: H' x W' x D layout or None
        frame: Frame to synthesize
        reference: Decoded reference frame
        background: Background plate
        ref_frame: OAR of the reference frame
        downscale: Layout downscale factor
        support: Precomputed H x W layout support; replaces the layout when given

    Returns:
        H x W x 3 float64 image
    """
    height, width = background.shape[:2]
    check_raster(reference, width, height)
    canvas = background.astype(np.float64)
    if support is None:
        support = layout_support(layout, width, height, downscale)
    ref_owners = owner_map(ref_frame, width, height) if ref_frame is not None else None

    for oid in depth_order(frame):
        a = frame.attributes[oid]
        sl = box_slices(a, width, height)
        if sl is None:
            continue
        patch = sprite_pixels(a, width, height).astype(np.float64)

        src = ref_frame.attributes.get(oid) if ref_frame is not None else None
        if src is not None and is_rigid_pair(src, a, width, height):
            dx, dy = backward_map(src, a, *sl)
            yy, xx = np.mgrid[sl]
            ri, rj = yy + dy, xx + dx
            ni = np.floor(ri + 0.5).astype(np.int64)
            nj = np.floor(rj + 0.5).astype(np.int64)
            inside = (ni >= 0) & (ni < height) & (nj >= 0) & (nj < width)
            owned = np.zeros_like(inside)
            owned[inside] = ref_owners[ni[inside], nj[inside]] == oid
            sampled = sample_bilinear(reference, ri, rj)
            patch = np.where(owned[..., None], sampled, patch)

        region = canvas[sl]
        canvas[sl] = np.where(support[sl][..., None], patch, region)

    return canvas


def synthesize(
    layout: Optional[np.ndarray],
    frame: OarFrame,
    reference: RasterFrame,
    background: RasterFrame,
    ref_frame: Optional[OarFrame] = None,
    downscale: int = 1
) -> RasterFrame:
    return to_uint8(synthesize_float(layout, frame, reference, background, ref_frame, downscale))
