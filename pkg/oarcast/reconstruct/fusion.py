"""Two-branch fusion: W * synthesized + (1 - W) * warped."""

import numpy as np

from ..core.errors import ContractViolation
from .raster import RasterFrame, to_uint8


# H x W weights in [0, 1]
FusionMask = np.ndarray


def check_mask(mask: np.ndarray) -> FusionMask:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim != 2:
        raise ContractViolation(f"Fusion mask must be H x W, got {mask.shape}")
    if not np.isfinite(mask).all() or mask.min(initial=0.0) < 0.0 or mask.max(initial=0.0) > 1.0:
        raise ContractViolation("Fusion mask values must lie in [0, 1]")
    return mask


def fuse_float(synth: np.ndarray, warped: np.ndarray, mask: FusionMask) -> np.ndarray:
    """Pixelwise convex combination before rounding."""
    synth = np.asarray(synth, dtype=np.float64)
    warped = np.asarray(warped, dtype=np.float64)
    if synth.shape != warped.shape:
        raise ContractViolation(f"Branch shapes differ: {synth.shape} vs {warped.shape}")
    w = check_mask(mask)
    if w.shape != synth.shape[:2]:
        raise ContractViolation(f"Mask {w.shape} does not match frame {synth.shape[:2]}")
    w = w[..., None]
    return w * synth + (1.0 - w) * warped


def fuse(synth: np.ndarray, warped: np.ndarray, mask: FusionMask) -> RasterFrame:
    """fuse_float rounded half-up to 8 bits."""
    return to_uint8(fuse_float(synth, warped, mask))
