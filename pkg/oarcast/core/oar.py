"""OAR graph domain types and value spaces."""

from dataclasses import dataclass, field, replace
from enum import IntEnum
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterable, Mapping, Optional, Sequence, Tuple

from .errors import FrameValidationError


# Object ID reserved for the background in every frame
BACKGROUND_ID = 0


class Category(IntEnum):
    """Object category value space."""

    CAR = 0
    BUS = 1
    VAN = 2
    OTHERS = 3
    BACKGROUND = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Category":
        """
        Map an annotation category string to a foreground category.

        Unknown strings (and "background", which is never a foreground
        category) fall back to OTHERS.
        """
        try:
            category = cls[label.strip().upper()]
        except KeyError:
            return cls.OTHERS
        if category is cls.BACKGROUND:
            return cls.OTHERS
        return category


class RelationLabel(IntEnum):
    """Relation label value space."""

    OCCLUSION = 0
    IN = 1
    NULL = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "RelationLabel":
        return cls[label.strip().upper()]


@dataclass(frozen=True)
class Attributes:
    """Position, size, angle and category of one object (pixels, degrees)."""

    x: int
    y: int
    w: int
    h: int
    angle: float
    category: Category

    @property
    def bbox(self) -> Tuple[int, int, int, int]:
        """Box as (x0, y0, x1, y1), exclusive far edges."""
        return (self.x, self.y, self.x + self.w, self.y + self.h)

    @property
    def bottom(self) -> int:
        return self.y + self.h

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def clipped_bbox(self, width: int, height: int) -> Tuple[int, int, int, int]:
        """Box intersected with a width x height canvas."""
        x0, y0, x1, y1 = self.bbox
        return (
            max(0, min(x0, width)),
            max(0, min(y0, height)),
            max(0, min(x1, width)),
            max(0, min(y1, height)),
        )


@dataclass(frozen=True, order=True)
class Relation:
    """Directed relation: subject --label--> object."""

    subject: int
    object: int
    label: RelationLabel


@dataclass(frozen=True)
class OarFrame:
    """One frame's (objects, attributes, relations) tuple."""

    frame_index: int
    objects: Tuple[int, ...]
    attributes: Mapping[int, Attributes]
    relations: FrozenSet[Relation] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(int(o) for o in self.objects))
        object.__setattr__(
            self, "attributes", MappingProxyType(dict(self.attributes))
        )
        object.__setattr__(self, "relations", frozenset(self.relations))

    def __eq__(self, other):
        if not isinstance(other, OarFrame):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and self.objects == other.objects
            and dict(self.attributes) == dict(other.attributes)
            and self.relations == other.relations
        )

    def __hash__(self):
        return hash((self.frame_index, self.objects, self.relations))

    @property
    def object_count(self) -> int:
        return len(self.objects)

    def with_relations(self, relations: Iterable[Relation]) -> "OarFrame":
        return replace(self, relations=frozenset(relations))

    def with_index(self, frame_index: int) -> "OarFrame":
        return replace(self, frame_index=frame_index)

    def nodes(self) -> Tuple[int, ...]:
        """Graph node IDs: the background sentinel followed by the objects."""
        return (BACKGROUND_ID,) + self.objects


@dataclass(frozen=True)
class GopStream:
    """A group of pictures: T OAR frames plus the coded reference frame."""

    width: int
    height: int
    gop_length: int
    frames: Tuple[OarFrame, ...]
    reference_payload: bytes = b""
    start_frame: int = 1

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.width <= 0 or self.height <= 0:
            raise FrameValidationError(
                f"Canvas must be positive, got {self.width}x{self.height}",
                field="width" if self.width <= 0 else "height"
            )
        if len(self.frames) != self.gop_length:
            raise FrameValidationError(
                f"GoP holds {len(self.frames)} frames, expected {self.gop_length}",
                field="gop_length"
            )
        for i, frame in enumerate(self.frames, start=1):
            if frame.frame_index != i:
                raise FrameValidationError(
                    f"Frame {i} carries frame_index {frame.frame_index}",
                    field="frame_index"
                )

    def with_frames(self, frames: Sequence[OarFrame]) -> "GopStream":
        return replace(self, frames=tuple(frames))


@dataclass(frozen=True)
class ValidationVerdict:
    """Result of validate_frame: OK or the first violated invariant."""

    ok: bool
    message: str = ""
    object_id: Optional[int] = None
    field: Optional[str] = None

    def __bool__(self) -> bool:
        return self.ok


_OK = ValidationVerdict(True)


def _fail(message: str, object_id: Optional[int], field_name: str) -> ValidationVerdict:
    return ValidationVerdict(False, message, object_id, field_name)


def _check_attributes(
    oid: int,
    a: Attributes,
    width: int,
    height: int
) -> ValidationVerdict:
    if a.category is Category.BACKGROUND or a.category not in Category:
        return _fail("background category on a foreground object", oid, "category")

    for name, value, limit, dim in (
        ("x", a.x, width, "W"),
        ("y", a.y, height, "H"),
    ):
        if value < 0:
            return _fail(f"{name} is negative", oid, name)
        if value > limit:
            return _fail(f"{name} exceeds {dim}", oid, name)

    for name, value, limit, dim in (
        ("w", a.w, width, "W"),
        ("h", a.h, height, "H"),
    ):
        if value <= 0:
            return _fail(f"{name} must be positive", oid, name)
        if value > limit:
            return _fail(f"{name} exceeds {dim}", oid, name)

    if not (0.0 <= a.angle < 360.0):
        return _fail("angle outside [0, 360)", oid, "angle")

    # Box must overlap the canvas
    if a.x >= width or a.y >= height:
        return _fail("bounding box does not intersect the frame", oid, "bbox")

    return _OK


def validate_frame(frame: OarFrame, width: int, height: int) -> ValidationVerdict:
    """
    Check a frame against the OAR value spaces.

    Args:
        frame: Frame to check
        width: Canvas width in pixels
        height: Canvas height in pixels

    Returns:
        OK verdict, or the first violated invariant with object ID and field
    """
    if frame.frame_index < 1:
        return _fail("frame_index must be >= 1", None, "frame_index")

    if len(set(frame.objects)) != len(frame.objects):
        return _fail("duplicate object IDs", None, "objects")

    if BACKGROUND_ID in frame.objects:
        return _fail("background ID used for a foreground object", BACKGROUND_ID, "objects")

    for oid in frame.objects:
        if oid not in frame.attributes:
            return _fail("object has no attributes", oid, "attributes")

    for oid in frame.attributes:
        if oid not in frame.objects:
            return _fail("attributes for an absent object", oid, "attributes")

    for oid in frame.objects:
        verdict = _check_attributes(oid, frame.attributes[oid], width, height)
        if not verdict:
            return verdict

    present = set(frame.objects)
    present.add(BACKGROUND_ID)
    for rel in sorted(frame.relations):
        if rel.subject == rel.object:
            return _fail("relation subject equals object", rel.subject, "subject")
        if rel.subject not in present:
            return _fail("dangling relation endpoint", rel.subject, "subject")
        if rel.object not in present:
            return _fail("dangling relation endpoint", rel.object, "object")

    return _OK


def ensure_valid_frame(frame: OarFrame, width: int, height: int) -> OarFrame:
    """Return the frame unchanged or raise FrameValidationError."""
    verdict = validate_frame(frame, width, height)
    if not verdict:
        raise FrameValidationError(
            f"Frame {frame.frame_index}: {verdict.message}",
            object_id=verdict.object_id,
            field=verdict.field
        )
    return frame


def make_frame(
    frame_index: int,
    attributes: Dict[int, Attributes],
    relations: Iterable[Relation] = (),
    order: Optional[Sequence[int]] = None
) -> OarFrame:
    """Build a frame, ordering objects by ID unless an order is given."""
    objects = tuple(order) if order is not None else tuple(sorted(attributes))
    return OarFrame(frame_index, objects, attributes, frozenset(relations))
