"""Assemble OAR sequences and GoPs from track records."""

import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..core.errors import ConfigurationError, IngestionError
from ..core.oar import Attributes, GopStream, OarFrame, ensure_valid_frame
from .relations import identify_relations
from .tracks import EMPTY_MASK, ForegroundMask, TrackRecord


logger = logging.getLogger(__name__)


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def clip_box(
    x: int,
    y: int,
    w: int,
    h: int,
    width: int,
    height: int
) -> Optional[Tuple[int, int, int, int]]:
    """Clip a box to the canvas; None when nothing is left."""
    x0, y0 = max(0, x), max(0, y)
    x1, y1 = min(width, x + w), min(height, y + h)
    if x1 <= x0 or y1 <= y0:
        return None
    return (x0, y0, x1 - x0, y1 - y0)


def displacement_angle(dx: float, dy: float) -> Optional[int]:
    """Heading in whole degrees from a displacement, None below 1 px."""
    if math.hypot(dx, dy) < 1.0:
        return None
    return round_half_up(math.degrees(math.atan2(dy, dx))) % 360


def frames_from_records(
    records: Iterable[TrackRecord],
    width: int,
    height: int,
    mask: ForegroundMask = EMPTY_MASK,
    zero_angle: bool = False
) -> List[OarFrame]:
    """
    Build one OarFrame per source frame number between the first and the
    last annotated frame; frames without records are empty.
    """
    by_frame: Dict[int, Dict[int, TrackRecord]] = {}
    for rec in records:
        frame_records = by_frame.setdefault(rec.frame_index, {})
        if rec.object_id in frame_records:
            raise IngestionError(
                f"Duplicate record for object {rec.object_id} in frame {rec.frame_index}"
            )
        frame_records[rec.object_id] = rec

    if not by_frame:
        return []

    mask = mask.clipped(width, height)
    last_center: Dict[int, Tuple[float, float]] = {}
    last_angle: Dict[int, float] = {}
    frames = []

    for frame_no in range(min(by_frame), max(by_frame) + 1):
        attributes: Dict[int, Attributes] = {}

        for oid, rec in sorted(by_frame.get(frame_no, {}).items()):
            box = clip_box(
                round_half_up(rec.x), round_half_up(rec.y),
                round_half_up(rec.w), round_half_up(rec.h),
                width, height
            )
            center = (rec.x + rec.w / 2.0, rec.y + rec.h / 2.0)

            if zero_angle:
                angle = 0.0
            elif rec.angle is not None:
                angle = float(rec.angle) % 360.0
            else:
                derived = None
                if oid in last_center:
                    px, py = last_center[oid]
                    derived = displacement_angle(center[0] - px, center[1] - py)
                angle = float(derived) if derived is not None else last_angle.get(oid, 0.0)

            last_center[oid] = center
            last_angle[oid] = angle

            if box is None:
                logger.debug(f"Frame {frame_no}: object {oid} lies outside the canvas, dropped")
                continue

            attributes[oid] = Attributes(box[0], box[1], box[2], box[3], angle, rec.category)

        frame = OarFrame(frame_no, tuple(sorted(attributes)), attributes)
        frame = frame.with_relations(identify_relations(frame, mask))
        frames.append(ensure_valid_frame(frame, width, height))

    return frames


def group_gops(
    frames: Sequence[OarFrame],
    gop_length: int,
    width: int,
    height: int
) -> List[GopStream]:
    """Split frames into consecutive GoPs of gop_length, dropping the tail."""
    if gop_length < 2:
        raise ConfigurationError(f"GoP length must be >= 2, got {gop_length}")

    gops = []
    for start in range(0, len(frames) - gop_length + 1, gop_length):
        chunk = frames[start:start + gop_length]
        gops.append(GopStream(
            width=width,
            height=height,
            gop_length=gop_length,
            frames=tuple(f.with_index(i) for i, f in enumerate(chunk, start=1)),
            start_frame=chunk[0].frame_index,
        ))

    dropped = len(frames) % gop_length
    if dropped:
        logger.info(f"Dropped {dropped} trailing frames that do not fill a GoP")
    return gops


def build_oar_sequence(
    records: Iterable[TrackRecord],
    mask: ForegroundMask = EMPTY_MASK,
    gop_length: int = 15,
    width: int = 512,
    height: int = 512,
    zero_angle: bool = False
) -> List[GopStream]:
    """
    Turn track records into GoPs of OAR frames.

    Args:
        records: Parsed track records
        mask: Foreground background regions for background occlusion
        gop_length: Frames per GoP (T >= 2)
        width: Canvas width
        height: Canvas height
        zero_angle: Force angle 0 for datasets without orientation

    Returns:
        GoPs in source order; a final partial GoP is dropped
    """
    if gop_length < 2:
        raise ConfigurationError(f"GoP length must be >= 2, got {gop_length}")
    frames = frames_from_records(records, width, height, mask, zero_angle)
    return group_gops(frames, gop_length, width, height)
