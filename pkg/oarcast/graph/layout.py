"""Dense layout maps from per-object features."""

import math
from typing import Mapping, Optional, Tuple, Union

import numpy as np

from ..core.oar import OarFrame
from .embedding import embed
from .gcn import graph_compute


def layout_shape(height: int, width: int, downscale: int = 1) -> Tuple[int, int]:
    return math.ceil(height / downscale), math.ceil(width / downscale)


def build_layout(
    features: Union[np.ndarray, Mapping[int, np.ndarray]],
    frame: OarFrame,
    height: int,
    width: int,
    downscale: int = 1,
    feature_dim: Optional[int] = None
) -> np.ndarray:
    """
    Sum of per-object feature planes, each constant inside its clipped box.

    Args:
        features: (N, D) rows aligned with frame.objects, or object ID -> vector
        frame: Frame whose boxes define the support
        height: Canvas height
        width: Canvas width
        downscale: Integer factor; a box covers every cell it touches
        feature_dim: D when no feature is given (empty frame and a mapping)

    Returns:
        (H', W', D) layout, exactly zero outside every box
    """
    if downscale < 1:
        raise ValueError(f"downscale must be >= 1, got {downscale}")

    if isinstance(features, Mapping):
        rows = np.array([np.asarray(features[oid], dtype=np.float64) for oid in frame.objects])
    else:
        rows = np.asarray(features, dtype=np.float64)
    if rows.shape[0] != frame.object_count:
        raise ValueError(f"{rows.shape[0]} feature rows for {frame.object_count} objects")

    if rows.ndim == 2:
        dim = rows.shape[1]
    elif feature_dim is not None:
        dim = feature_dim
    else:
        raise ValueError("feature_dim is required when no features are given")

    h, w = layout_shape(height, width, downscale)
    layout = np.zeros((h, w, dim))

    for oid, f in zip(frame.objects, rows):
        x0, y0, x1, y1 = frame.attributes[oid].clipped_bbox(width, height)
        if x1 <= x0 or y1 <= y0:
            continue
        rows_sl = slice(y0 // downscale, -(-y1 // downscale))
        cols_sl = slice(x0 // downscale, -(-x1 // downscale))
        layout[rows_sl, cols_sl] += f

    return layout


def frame_features(frame: OarFrame, model) -> np.ndarray:
    """embed then graph_compute; row 0 is the background node."""
    nodes, edges, edge_index = embed(frame, model.tables, model.tables.q_angle)
    return graph_compute(nodes, edges, edge_index, model.gcn)


def frame_layout(frame: OarFrame, model, height: int, width: int, downscale: int = 1) -> np.ndarray:
    """Layout of one frame under a GraphModel."""
    feats = frame_features(frame, model)
    return build_layout(feats[1:], frame, height, width, downscale, model.gcn.feature_dim)
