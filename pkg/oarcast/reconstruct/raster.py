"""Raster frames, the sprite painter, pixel ownership and image file I/O."""

import io
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from ..core.oar import BACKGROUND_ID, Attributes, Category, OarFrame
from ..ingest.relations import depth_order


logger = logging.getLogger(__name__)


# H x W x 3 uint8 array
RasterFrame = np.ndarray

DEFAULT_BACKGROUND = (96, 96, 96)

PALETTE: Dict[Category, Tuple[int, int, int]] = {
    Category.CAR: (200, 40, 40),
    Category.BUS: (240, 180, 20),
    Category.VAN: (40, 120, 220),
    Category.OTHERS: (60, 180, 80),
}

# Heading stripe brightness relative to the body color
STRIPE_SHADE = 0.45


def new_canvas(width: int, height: int, color: Sequence[int] = DEFAULT_BACKGROUND) -> RasterFrame:
    canvas = np.empty((height, width, 3), dtype=np.uint8)
    canvas[...] = np.asarray(color, dtype=np.uint8)
    return canvas


def check_raster(frame: RasterFrame, width: int, height: int) -> RasterFrame:
    if frame.shape != (height, width, 3) or frame.dtype != np.uint8:
        raise ValueError(
            f"Raster must be uint8 {height}x{width}x3, got {frame.dtype} {frame.shape}"
        )
    return frame


def to_uint8(values: np.ndarray) -> RasterFrame:
    """Round half-up and saturate to 8 bits."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def box_slices(attrs: Attributes, width: int, height: int) -> Optional[Tuple[slice, slice]]:
    x0, y0, x1, y1 = attrs.clipped_bbox(width, height)
    if x1 <= x0 or y1 <= y0:
        return None
    return slice(y0, y1), slice(x0, x1)


def sprite_pixels(attrs: Attributes, width: int, height: int) -> Optional[np.ndarray]:
    """
    Category-colored oriented sprite covering the clipped box.

    The body fills the box; a darker stripe runs from the box center along
    the heading (cos angle, sin angle) in image coordinates.
    """
    sl = box_slices(attrs, width, height)
    if sl is None:
        return None

    rows, cols = sl
    body = np.asarray(PALETTE.get(attrs.category, PALETTE[Category.OTHERS]), dtype=np.float64)
    patch = np.empty((rows.stop - rows.start, cols.stop - cols.start, 3), dtype=np.float64)
    patch[...] = body

    cx, cy = attrs.center
    yy, xx = np.mgrid[rows, cols]
    vx = xx + 0.5 - cx
    vy = yy + 0.5 - cy
    theta = math.radians(attrs.angle)
    dx, dy = math.cos(theta), math.sin(theta)
    along = vx * dx + vy * dy
    across = np.abs(vx * dy - vy * dx)
    half_width = max(1.0, min(attrs.w, attrs.h) / 6.0)
    stripe = (along >= 0) & (across <= half_width)
    patch[stripe] = body * STRIPE_SHADE

    return to_uint8(patch)


def paint_sprite(canvas: RasterFrame, attrs: Attributes) -> RasterFrame:
    height, width = canvas.shape[:2]
    sl = box_slices(attrs, width, height)
    if sl is not None:
        canvas[sl] = sprite_pixels(attrs, width, height)
    return canvas


def render_frame(
    frame: OarFrame,
    width: int,
    height: int,
    background: Union[RasterFrame, Sequence[int]] = DEFAULT_BACKGROUND
) -> RasterFrame:
    """Paint every object's sprite back-to-front over a background."""
    if isinstance(background, np.ndarray):
        canvas = check_raster(background, width, height).copy()
    else:
        canvas = new_canvas(width, height, background)

    for oid in depth_order(frame):
        paint_sprite(canvas, frame.attributes[oid])
    return canvas


def owner_map(frame: OarFrame, width: int, height: int) -> np.ndarray:
    """Front-most object ID per pixel; BACKGROUND_ID where no box covers."""
    owners = np.full((height, width), BACKGROUND_ID, dtype=np.int64)
    for oid in depth_order(frame):
        sl = box_slices(frame.attributes[oid], width, height)
        if sl is not None:
            owners[sl] = oid
    return owners


def foreground_support(frames: Iterable[OarFrame], width: int, height: int) -> np.ndarray:
    """Boolean map of pixels covered by any box of any of the frames."""
    support = np.zeros((height, width), dtype=bool)
    for frame in frames:
        for oid in frame.objects:
            sl = box_slices(frame.attributes[oid], width, height)
            if sl is not None:
                support[sl] = True
    return support


def raster_to_bytes(frame: RasterFrame) -> bytes:
    return np.ascontiguousarray(frame, dtype=np.uint8).tobytes()


def raster_from_bytes(data: bytes, width: int, height: int) -> RasterFrame:
    expected = width * height * 3
    if len(data) != expected:
        raise ValueError(f"Raw frame holds {len(data)} bytes, expected {expected}")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3).copy()


def encode_image(frame: RasterFrame, fmt: str = "PPM") -> bytes:
    """Serialize a raster with Pillow (PPM writes binary P6)."""
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(frame, dtype=np.uint8)).save(buf, format=fmt)
    return buf.getvalue()


def decode_image(data: bytes) -> RasterFrame:
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()


def write_image(frame: RasterFrame, path: Union[str, Path]):
    """Write PNG or PPM depending on the suffix."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = "PPM" if path.suffix.lower() in (".ppm", ".pnm") else "PNG"
    Image.fromarray(np.ascontiguousarray(frame, dtype=np.uint8)).save(path, format=fmt)


def read_image(path: Union[str, Path]) -> RasterFrame:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()
