"""Geometric relation identification and the depth rule."""

from itertools import combinations
from typing import FrozenSet, List, Tuple

from ..core.oar import (
    BACKGROUND_ID, Attributes, OarFrame, Relation, RelationLabel
)
from .tracks import EMPTY_MASK, ForegroundMask


def _overlap_area(a: Tuple[int, int, int, int], b: Tuple[int, int, int, int]) -> int:
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    if w <= 0 or h <= 0:
        return 0
    return w * h


def depth_key(oid: int, attrs: Attributes) -> Tuple[int, int]:
    """
    Sort key placing objects back-to-front.

    The object with the larger bottom edge (y + h) is in front; on a tie
    the smaller ID is in front.
    """
    return (attrs.bottom, -oid)


def depth_order(frame: OarFrame) -> List[int]:
    """Object IDs ordered back-to-front (front-most last)."""
    return sorted(frame.objects, key=lambda oid: depth_key(oid, frame.attributes[oid]))


def in_front(a: int, b: int, frame: OarFrame) -> bool:
    return depth_key(a, frame.attributes[a]) > depth_key(b, frame.attributes[b])


def identify_relations(frame: OarFrame, mask: ForegroundMask = EMPTY_MASK) -> FrozenSet[Relation]:
    """
    Derive occlusion and "in" relations from box geometry.

    Args:
        frame: A valid frame
        mask: Background regions in front of the foreground

    Returns:
        One occlusion per overlapping pair (front -> back), background
        occlusions for boxes touching the mask, and (object in background)
        for every object
    """
    relations = set()

    ids = sorted(frame.objects)
    for a, b in combinations(ids, 2):
        if _overlap_area(frame.attributes[a].bbox, frame.attributes[b].bbox) > 0:
            front, back = (a, b) if in_front(a, b, frame) else (b, a)
            relations.add(Relation(front, back, RelationLabel.OCCLUSION))

    for oid in ids:
        box = frame.attributes[oid].bbox
        for x, y, w, h in mask.rectangles:
            if _overlap_area(box, (x, y, x + w, y + h)) > 0:
                relations.add(Relation(BACKGROUND_ID, oid, RelationLabel.OCCLUSION))
                break
        relations.add(Relation(oid, BACKGROUND_ID, RelationLabel.IN))

    return frozenset(relations)
