"""
OAR sequences as jsonl: one GoP header line followed by one line per frame.

    {"gop": 0, "width": 512, "height": 512, "gop_length": 15, "start_frame": 1}
    {"frame": 1, "objects": [{"id": 3, "x": 10, ...}], "relations": [[3, 0, "in"]]}
"""

import json
import logging
from pathlib import Path
from typing import Iterable, List, Union

from ..core.errors import FrameValidationError, TrackParseError
from ..core.oar import (
    Attributes, Category, GopStream, OarFrame, Relation, RelationLabel, ensure_valid_frame
)


logger = logging.getLogger(__name__)


def _frame_record(frame: OarFrame) -> dict:
    return {
        "frame": frame.frame_index,
        "objects": [
            {
                "id": oid,
                "x": a.x,
                "y": a.y,
                "w": a.w,
                "h": a.h,
                "angle": a.angle,
                "cat": a.category.label,
            }
            for oid, a in ((oid, frame.attributes[oid]) for oid in frame.objects)
        ],
        "relations": [
            [rel.subject, rel.object, rel.label.label] for rel in sorted(frame.relations)
        ],
    }


def write_oar_jsonl(gops: Iterable[GopStream], path: Union[str, Path]) -> Path:
    """Write GoPs in order; reference payloads are not part of the file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for index, gop in enumerate(gops):
            header = {
                "gop": index,
                "width": gop.width,
                "height": gop.height,
                "gop_length": gop.gop_length,
                "start_frame": gop.start_frame,
            }
            f.write(json.dumps(header) + "\n")
            for frame in gop.frames:
                f.write(json.dumps(_frame_record(frame)) + "\n")
            count += 1

    logger.info(f"Wrote {count} GoPs to {path}")
    return path


def _frame_from_record(obj: dict, width: int, height: int, locus: str) -> OarFrame:
    attributes = {}
    order = []
    for item in obj.get("objects", []):
        oid = int(item["id"])
        attributes[oid] = Attributes(
            int(item["x"]),
            int(item["y"]),
            int(item["w"]),
            int(item["h"]),
            float(item.get("angle", 0.0)),
            Category.from_label(str(item.get("cat", "others"))),
        )
        order.append(oid)

    relations = frozenset(
        Relation(int(s), int(o), RelationLabel.from_label(str(label)))
        for s, o, label in obj.get("relations", [])
    )
    frame = OarFrame(int(obj["frame"]), tuple(order), attributes, relations)
    return ensure_valid_frame(frame, width, height)


def read_oar_jsonl(path: Union[str, Path]) -> List[GopStream]:
    """
    Read GoPs written by write_oar_jsonl.

    Raises:
        TrackParseError: malformed line, with the line number as locus
    """
    path = Path(path)
    gops: List[GopStream] = []
    header = None
    frames: List[OarFrame] = []

    def flush():
        if header is None:
            return
        gops.append(GopStream(
            width=header["width"],
            height=header["height"],
            gop_length=header["gop_length"],
            frames=tuple(frames),
            start_frame=header.get("start_frame", 1),
        ))

    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            locus = f"{path.name}:{lineno}"
            try:
                obj = json.loads(line)
                if "gop" in obj:
                    flush()
                    header = {k: int(obj[k]) for k in ("width", "height", "gop_length")}
                    header["start_frame"] = int(obj.get("start_frame", 1))
                    frames = []
                elif header is None:
                    raise ValueError("frame line before any GoP header")
                else:
                    frames.append(
                        _frame_from_record(obj, header["width"], header["height"], locus)
                    )
            except (ValueError, KeyError, TypeError, FrameValidationError) as e:
                raise TrackParseError(f"Malformed OAR line: {e}", locus=locus) from e

    try:
        flush()
    except FrameValidationError as e:
        raise TrackParseError(f"Incomplete GoP: {e}", locus=f"{path.name}:end") from e

    logger.info(f"Read {len(gops)} GoPs from {path}")
    return gops
