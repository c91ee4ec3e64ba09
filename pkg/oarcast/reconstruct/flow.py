"""Closed-form backward flow between two OAR frames."""

import math
from typing import Optional, Tuple

import numpy as np

from ..core.oar import Attributes, OarFrame
from ..ingest.relations import depth_order
from .raster import box_slices, owner_map


# H x W x 2 backward displacements (dx, dy) in pixels
FlowField = np.ndarray


def touches_border(attrs: Attributes, width: int, height: int) -> bool:
    return attrs.x <= 0 or attrs.y <= 0 or attrs.x + attrs.w >= width or attrs.y + attrs.h >= height


def is_rigid_pair(src: Attributes, dst: Attributes, width: int, height: int) -> bool:
    """
    False when the box changed size while the canvas border clips it.

    Such a box only shows the part of the object still inside the canvas,
    so the size ratio is not a scale of the content and the affine map
    does not hold.
    """
    if src.w == dst.w and src.h == dst.h:
        return True
    return not (touches_border(src, width, height) or touches_border(dst, width, height))


def backward_map(
    src: Attributes,
    dst: Attributes,
    rows: slice,
    cols: slice
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Displacements sending pixel centers inside dst's box to src coordinates.

    The map undoes, about the box centers, the rotation by the angle
    difference and the anisotropic scale given by the size ratio, then
    applies the center translation.

    Returns:
        (dx, dy) arrays shaped like the box
    """
    yy, xx = np.mgrid[rows, cols]
    cx1, cy1 = dst.center
    cx0, cy0 = src.center
    ux = xx + 0.5 - cx1
    uy = yy + 0.5 - cy1

    dtheta = math.radians(dst.angle - src.angle)
    if dtheta == 0.0:
        rx, ry = ux, uy
    else:
        c, s = math.cos(dtheta), math.sin(dtheta)
        # rotate by -dtheta
        rx = c * ux + s * uy
        ry = -s * ux + c * uy

    vx = rx * (src.w / dst.w) if src.w != dst.w else rx
    vy = ry * (src.h / dst.h) if src.h != dst.h else ry

    # (c0 + v) - p, grouped so the identity map is exactly zero
    dx = (cx0 - cx1) + (vx - ux)
    dy = (cy0 - cy1) + (vy - uy)
    return dx, dy


def flow_from_oar(prev: OarFrame, curr: OarFrame, width: int, height: int) -> FlowField:
    """
    Backward flow from curr to prev.

    Inside the clipped box of every object present in both frames the flow
    is that object's backward affine map; where boxes overlap the front-most
    object of curr wins. Elsewhere, including births, the flow is zero.
    """
    flow = np.zeros((height, width, 2))
    for oid in depth_order(curr):
        if oid not in prev.attributes:
            continue
        sl = box_slices(curr.attributes[oid], width, height)
        if sl is None:
            continue
        dx, dy = backward_map(prev.attributes[oid], curr.attributes[oid], *sl)
        flow[sl[0], sl[1], 0] = dx
        flow[sl[0], sl[1], 1] = dy
    return flow


def sample_owner(owners: np.ndarray, flow: FlowField) -> np.ndarray:
    """
    Owner of the nearest source pixel for every flow target.

    Positions outside the canvas map to -1.
    """
    height, width = owners.shape
    ii, jj = np.mgrid[0:height, 0:width]
    si = np.floor(ii + flow[..., 1] + 0.5).astype(np.int64)
    sj = np.floor(jj + flow[..., 0] + 0.5).astype(np.int64)
    inside = (si >= 0) & (si < height) & (sj >= 0) & (sj < width)
    sampled = np.full((height, width), -1, dtype=np.int64)
    sampled[inside] = owners[si[inside], sj[inside]]
    return sampled


def correspondence_mask(
    prev: OarFrame,
    curr: OarFrame,
    width: int,
    height: int,
    flow: Optional[FlowField] = None
) -> np.ndarray:
    """
    True where a pixel of curr has a valid backward correspondence in prev.

    A pixel is valid when the pixel it samples in prev is owned by the same
    object (or by the background for background pixels). Births, newly
    uncovered pixels, samples leaving the canvas and objects whose box is
    resized by the canvas border are invalid.
    """
    if flow is None:
        flow = flow_from_oar(prev, curr, width, height)
    now = owner_map(curr, width, height)
    before = sample_owner(owner_map(prev, width, height), flow)
    valid = before == now
    for oid in curr.objects:
        if oid in prev.attributes and not is_rigid_pair(prev.attributes[oid], curr.attributes[oid], width, height):
            valid[now == oid] = False
    return valid
