"""Bilinear backward warping with edge clamping."""

import numpy as np
from scipy import ndimage

from .raster import RasterFrame, to_uint8


def sample_bilinear(image: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """
    Bilinear samples of an H x W (x C) image at fractional (row, col)
    positions; positions outside the image clamp to the nearest edge.
    """
    src = np.asarray(image, dtype=np.float64)
    coords = np.stack([np.asarray(rows, dtype=np.float64), np.asarray(cols, dtype=np.float64)])
    if src.ndim == 2:
        return ndimage.map_coordinates(src, coords, order=1, mode="nearest")

    out = np.empty(coords.shape[1:] + (src.shape[2],))
    for ch in range(src.shape[2]):
        out[..., ch] = ndimage.map_coordinates(src[..., ch], coords, order=1, mode="nearest")
    return out


def warp_float(image: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """
    Sample image at (row + dy, col + dx) for every pixel.

    Args:
        image: H x W x C array
        flow: H x W x 2 displacements (dx, dy)

    Returns:
        H x W x C float64 image
    """
    image = np.asarray(image)
    if image.shape[:2] != flow.shape[:2] or flow.shape[2] != 2:
        raise ValueError(f"Flow {flow.shape} does not match image {image.shape}")

    height, width = image.shape[:2]
    ii, jj = np.mgrid[0:height, 0:width]
    return sample_bilinear(image, ii + flow[..., 1], jj + flow[..., 0])


def warp(image: RasterFrame, flow: np.ndarray) -> RasterFrame:
    """warp_float rounded half-up to 8 bits."""
    return to_uint8(warp_float(image, flow))
