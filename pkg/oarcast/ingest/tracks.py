"""Annotation track and mask file parsing."""

import json
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

from ..core.errors import TrackParseError
from ..core.oar import Category


logger = logging.getLogger(__name__)


TRACK_FORMATS = ("jsonl", "detrac_xml")


@dataclass(frozen=True)
class TrackRecord:
    """One annotated box of one object in one frame (source pixel units)."""

    frame_index: int
    object_id: int
    x: float
    y: float
    w: float
    h: float
    angle: Optional[float]
    category: Category


@dataclass(frozen=True)
class ForegroundMask:
    """Background regions lying in front of the foreground, as (x, y, w, h)."""

    rectangles: Tuple[Tuple[int, int, int, int], ...] = ()

    def clipped(self, width: int, height: int) -> "ForegroundMask":
        """Clip every rectangle to the canvas, dropping empty ones."""
        kept = []
        for x, y, w, h in self.rectangles:
            x0, y0 = max(0, x), max(0, y)
            x1, y1 = min(width, x + w), min(height, y + h)
            if x1 > x0 and y1 > y0:
                kept.append((x0, y0, x1 - x0, y1 - y0))
        return ForegroundMask(tuple(kept))


EMPTY_MASK = ForegroundMask()


def _number(obj: dict, key: str, locus: str) -> float:
    if key not in obj:
        raise TrackParseError(f"missing field '{key}'", locus)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TrackParseError(f"field '{key}' is not a number", locus)
    return float(value)


def _integer(obj: dict, key: str, locus: str) -> int:
    value = _number(obj, key, locus)
    if value != int(value):
        raise TrackParseError(f"field '{key}' is not an integer", locus)
    return int(value)


def _record_from_json(obj: dict, locus: str) -> TrackRecord:
    if not isinstance(obj, dict):
        raise TrackParseError("record is not a JSON object", locus)

    frame_index = _integer(obj, "frame", locus)
    if frame_index < 1:
        raise TrackParseError("frame must be >= 1", locus)

    object_id = _integer(obj, "id", locus)
    if object_id < 1:
        raise TrackParseError("id must be >= 1 (0 is the background)", locus)

    angle = obj.get("angle")
    if angle is not None:
        angle = _number(obj, "angle", locus)

    label = obj.get("cat", obj.get("category", "others"))
    if not isinstance(label, str):
        raise TrackParseError("field 'cat' is not a string", locus)

    return TrackRecord(
        frame_index=frame_index,
        object_id=object_id,
        x=_number(obj, "x", locus),
        y=_number(obj, "y", locus),
        w=_number(obj, "w", locus),
        h=_number(obj, "h", locus),
        angle=angle,
        category=Category.from_label(label),
    )


def _parse_jsonl(path: Path) -> List[TrackRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            locus = f"{path.name}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise TrackParseError(f"invalid JSON ({e.msg})", locus) from e
            records.append(_record_from_json(obj, locus))
    return records


def _parse_detrac_xml(path: Path) -> List[TrackRecord]:
    """Best-effort UA-DETRAC sequence XML reader (boxes, orientation, type)."""
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as e:
        raise TrackParseError(f"invalid XML ({e})", path.name) from e

    records = []
    for frame_el in root.iter("frame"):
        num = frame_el.get("num")
        if num is None or not num.isdigit():
            raise TrackParseError("frame without numeric 'num'", f"{path.name}:frame")

        for target in frame_el.iter("target"):
            locus = f"{path.name}:frame {num}:target {target.get('id')}"
            box = target.find("box")
            if box is None:
                raise TrackParseError("target without <box>", locus)
            attr = target.find("attribute")
            obj = {
                "frame": int(num),
                "id": _xml_number(target.get("id"), "id", locus),
                "x": _xml_number(box.get("left"), "left", locus),
                "y": _xml_number(box.get("top"), "top", locus),
                "w": _xml_number(box.get("width"), "width", locus),
                "h": _xml_number(box.get("height"), "height", locus),
                "cat": "others",
            }
            if attr is not None:
                if attr.get("orientation") is not None:
                    obj["angle"] = _xml_number(attr.get("orientation"), "orientation", locus) % 360.0
                obj["cat"] = attr.get("vehicle_type", "others")
            records.append(_record_from_json(obj, locus))
    return records


def _xml_number(text: Optional[str], name: str, locus: str) -> float:
    if text is None:
        raise TrackParseError(f"missing attribute '{name}'", locus)
    try:
        return float(text)
    except ValueError as e:
        raise TrackParseError(f"attribute '{name}' is not a number", locus) from e


def parse_tracks(path: Union[str, Path], fmt: str = "jsonl") -> List[TrackRecord]:
    """
    Read an annotation track file.

    Args:
        path: Track file
        fmt: "jsonl" or "detrac_xml"

    Returns:
        Records sorted by (frame_index, object_id)
    """
    path = Path(path)
    if fmt not in TRACK_FORMATS:
        raise TrackParseError(f"unknown track format '{fmt}'", str(path))
    if not path.exists():
        raise TrackParseError("file does not exist", str(path))

    if fmt == "jsonl":
        records = _parse_jsonl(path)
    else:
        records = _parse_detrac_xml(path)

    records.sort(key=lambda r: (r.frame_index, r.object_id))
    logger.info(f"Parsed {len(records)} track records from {path.name}")
    return records


def read_mask(path: Union[str, Path, None]) -> ForegroundMask:
    """Read a jsonl file of {"x","y","w","h"} rectangles."""
    if path is None:
        return EMPTY_MASK

    path = Path(path)
    if not path.exists():
        raise TrackParseError("file does not exist", str(path))

    rects = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            locus = f"{path.name}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise TrackParseError(f"invalid JSON ({e.msg})", locus) from e
            if not isinstance(obj, dict):
                raise TrackParseError("rectangle is not a JSON object", locus)
            rect = tuple(_integer(obj, k, locus) for k in ("x", "y", "w", "h"))
            if rect[2] <= 0 or rect[3] <= 0:
                raise TrackParseError("rectangle must have positive size", locus)
            rects.append(rect)

    return ForegroundMask(tuple(rects))
