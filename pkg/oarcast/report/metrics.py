"""Pixel and semantic fidelity metrics."""

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from ..core.oar import GopStream


# 11 x 11 Gaussian window: radius = int(truncate * sigma + 0.5) = 5
SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PEAK = 255.0

Box = Tuple[int, int, int, int]


def region_mask(boxes: Iterable[Box], width: int, height: int) -> np.ndarray:
    """Union of (x0, y0, x1, y1) boxes as an H x W boolean mask."""
    mask = np.zeros((height, width), dtype=bool)
    for x0, y0, x1, y1 in boxes:
        x0, x1 = max(0, x0), min(width, x1)
        y0, y1 = max(0, y0), min(height, y1)
        if x1 > x0 and y1 > y0:
            mask[y0:y1, x0:x1] = True
    return mask


def _pair(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"Image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _select(values: np.ndarray, region: Optional[np.ndarray]) -> np.ndarray:
    if region is None:
        return values
    return values[region]


def metric_psnr(a: np.ndarray, b: np.ndarray, region: Optional[Sequence[Box]] = None) -> float:
    """
    PSNR in dB for 8-bit images; +inf when the images are identical.

    Args:
        a: First image
        b: Second image
        region: Optional boxes restricting the comparison
    """
    a, b = _pair(a, b)
    mask = region_mask(region, a.shape[1], a.shape[0]) if region is not None else None
    err = _select((a - b) ** 2, mask)
    if err.size == 0:
        return math.inf
    mse = float(err.mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK ** 2 / mse)


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-pixel SSIM averaged over channels, Gaussian-weighted statistics."""
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]

    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2

    def blur(x: np.ndarray) -> np.ndarray:
        return gaussian_filter(x, sigma=SSIM_SIGMA, truncate=SSIM_TRUNCATE)

    maps = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]
        mu_x, mu_y = blur(x), blur(y)
        var_x = blur(x * x) - mu_x ** 2
        var_y = blur(y * y) - mu_y ** 2
        cov = blur(x * y) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
        maps.append(num / den)
    return np.mean(maps, axis=0)


def metric_ssim(a: np.ndarray, b: np.ndarray, region: Optional[Sequence[Box]] = None) -> float:
    """Mean SSIM, optionally over the pixels inside the given boxes."""
    values = ssim_map(a, b)
    mask = region_mask(region, values.shape[1], values.shape[0]) if region is not None else None
    selected = _select(values, mask)
    if selected.size == 0:
        return 1.0
    return float(selected.mean())


def box_iou(a: Box, b: Box) -> float:
    ix = max(0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def angle_error(a: float, b: float) -> float:
    """Absolute angular difference in degrees, wrapped to [0, 180]."""
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


@dataclass(frozen=True)
class OarFidelity:
    """Semantic agreement between a sent and a received GoP."""

    box_iou: float
    category_accuracy: float
    angle_mae: float
    relation_f1: float

    @classmethod
    def failed(cls) -> "OarFidelity":
        return cls(0.0, 0.0, 0.0, 0.0)


def metric_oar_fidelity(sent: GopStream, received: Optional[GopStream]) -> OarFidelity:
    """
    Compare objects matched by ID frame by frame.

    Objects missing from the received frame count as IoU 0 and a wrong
    category; the angle error is averaged over matched objects only.
    A failed GoP (None) scores zero everywhere.
    """
    if received is None:
        return OarFidelity.failed()
    if received.gop_length != sent.gop_length:
        raise ValueError(
            f"GoP lengths differ: sent {sent.gop_length}, received {received.gop_length}"
        )

    ious, hits, angles = [], [], []
    sent_rel, recv_rel = set(), set()

    for t, (s, r) in enumerate(zip(sent.frames, received.frames), start=1):
        for oid in s.objects:
            a = s.attributes[oid]
            b = r.attributes.get(oid)
            if b is None:
                ious.append(0.0)
                hits.append(False)
                continue
            ious.append(box_iou(a.bbox, b.bbox))
            hits.append(a.category == b.category)
            angles.append(angle_error(a.angle, b.angle))
        sent_rel.update((t, rel) for rel in s.relations)
        recv_rel.update((t, rel) for rel in r.relations)

    if sent_rel or recv_rel:
        true_pos = len(sent_rel & recv_rel)
        precision = true_pos / len(recv_rel) if recv_rel else 0.0
        recall = true_pos / len(sent_rel) if sent_rel else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    else:
        f1 = 1.0

    return OarFidelity(
        box_iou=float(np.mean(ious)) if ious else 1.0,
        category_accuracy=float(np.mean(hits)) if hits else 1.0,
        angle_mae=float(np.mean(angles)) if angles else 0.0,
        relation_f1=f1,
    )
