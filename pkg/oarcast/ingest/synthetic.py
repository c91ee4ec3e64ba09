"""Seeded synthetic scenes: matched OAR sequences and sprite renders."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ConfigurationError
from ..core.oar import Attributes, Category, GopStream, OarFrame, ensure_valid_frame
from ..reconstruct.raster import (
    DEFAULT_BACKGROUND, RasterFrame, raster_to_bytes, render_frame
)
from .relations import identify_relations
from .sequence import clip_box, round_half_up
from .tracks import EMPTY_MASK, ForegroundMask


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MotionProgram:
    """Per-object motion: constant velocity, optional rotation and scaling."""

    x0: float
    y0: float
    w0: float
    h0: float
    angle0: float = 0.0
    category: Category = Category.CAR
    vx: float = 0.0
    vy: float = 0.0
    rotation_rate: float = 0.0  # degrees per frame
    scale_rate: float = 0.0     # relative size change per frame

    def at(self, t: int) -> Tuple[float, float, float, float, float]:
        """(x, y, w, h, angle) at 1-based frame t."""
        k = t - 1
        s = max(0.0, 1.0 + self.scale_rate * k)
        return (
            self.x0 + self.vx * k,
            self.y0 + self.vy * k,
            self.w0 * s,
            self.h0 * s,
            (self.angle0 + self.rotation_rate * k) % 360.0,
        )


@dataclass(frozen=True)
class SyntheticSceneSpec:
    """Recipe for a deterministic synthetic GoP."""

    seed: int
    object_count: int = 4
    width: int = 128
    height: int = 128
    gop_length: int = 10
    programs: Optional[Tuple[MotionProgram, ...]] = None
    max_speed: int = 3
    rotation: bool = False
    scaling: bool = False
    background: Tuple[int, int, int] = DEFAULT_BACKGROUND
    mask: ForegroundMask = field(default=EMPTY_MASK)


def random_programs(spec: SyntheticSceneSpec) -> Tuple[MotionProgram, ...]:
    """Draw integer-velocity motion programs from the scene seed."""
    rng = np.random.default_rng(spec.seed)
    programs = []
    foreground = [Category.CAR, Category.BUS, Category.VAN, Category.OTHERS]

    for _ in range(spec.object_count):
        w = int(rng.integers(max(4, spec.width // 16), max(5, spec.width // 5)))
        h = int(rng.integers(max(4, spec.height // 16), max(5, spec.height // 5)))
        programs.append(MotionProgram(
            x0=float(rng.integers(0, max(1, spec.width - w))),
            y0=float(rng.integers(0, max(1, spec.height - h))),
            w0=float(w),
            h0=float(h),
            angle0=float(rng.integers(0, 360)),
            category=foreground[int(rng.integers(0, len(foreground)))],
            vx=float(rng.integers(-spec.max_speed, spec.max_speed + 1)),
            vy=float(rng.integers(-spec.max_speed, spec.max_speed + 1)),
            rotation_rate=float(rng.integers(-10, 11)) if spec.rotation else 0.0,
            scale_rate=float(rng.uniform(-0.02, 0.02)) if spec.scaling else 0.0,
        ))
    return tuple(programs)


def generate_synthetic(spec: SyntheticSceneSpec) -> Tuple[GopStream, List[RasterFrame]]:
    """
    Evaluate the motion programs and render every frame.

    Objects are numbered 1..N in program order. An object whose box leaves
    the canvas entirely is removed from that frame on.

    Args:
        spec: Scene recipe

    Returns:
        (GoP with the raw reference frame as payload, ground-truth renders)
    """
    if spec.gop_length < 2:
        raise ConfigurationError(f"GoP length must be >= 2, got {spec.gop_length}")
    if spec.width <= 0 or spec.height <= 0:
        raise ConfigurationError(f"Canvas must be positive, got {spec.width}x{spec.height}")

    programs = spec.programs if spec.programs is not None else random_programs(spec)
    mask = spec.mask.clipped(spec.width, spec.height)
    gone = set()
    frames: List[OarFrame] = []
    renders: List[RasterFrame] = []

    for t in range(1, spec.gop_length + 1):
        attributes: Dict[int, Attributes] = {}
        for oid, prog in enumerate(programs, start=1):
            if oid in gone:
                continue
            x, y, w, h, angle = prog.at(t)
            w_i, h_i = round_half_up(w), round_half_up(h)
            box = None
            if w_i > 0 and h_i > 0:
                box = clip_box(round_half_up(x), round_half_up(y), w_i, h_i,
                               spec.width, spec.height)
            if box is None:
                logger.debug(f"Synthetic object {oid} left the canvas at frame {t}")
                gone.add(oid)
                continue
            attributes[oid] = Attributes(box[0], box[1], box[2], box[3], angle, prog.category)

        frame = OarFrame(t, tuple(sorted(attributes)), attributes)
        frame = frame.with_relations(identify_relations(frame, mask))
        frames.append(ensure_valid_frame(frame, spec.width, spec.height))
        renders.append(render_frame(frame, spec.width, spec.height, spec.background))

    gop = GopStream(
        width=spec.width,
        height=spec.height,
        gop_length=spec.gop_length,
        frames=tuple(frames),
        reference_payload=raster_to_bytes(renders[0]),
    )
    return gop, renders
