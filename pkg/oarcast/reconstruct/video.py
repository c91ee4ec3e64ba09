"""GoP reconstruction from a reference frame and decoded OAR."""

import logging
from typing import List, Optional

import numpy as np

from ..core.errors import PipelineError
from ..core.oar import GopStream
from ..graph.layout import frame_layout
from ..graph.weights import GraphModel
from .flow import correspondence_mask, flow_from_oar
from .fusion import fuse
from .raster import RasterFrame, check_raster
from .synthesis import background_plate, layout_support, synthesize_float
from .warp import warp_float


logger = logging.getLogger(__name__)


def reconstruct_gop(
    gop: GopStream,
    reference: Optional[RasterFrame],
    model: Optional[GraphModel] = None,
    downscale: int = 1
) -> List[RasterFrame]:
    """
    Rebuild every frame of a GoP.

    Frame 1 is the reference. Frame t fuses the synthesized frame with the
    previous reconstruction warped along the OAR flow; the fusion mask is 1
    on pixels without a valid backward correspondence and 0 elsewhere.

    Args:
        gop: Decoded OAR GoP
        reference: Decoded reference frame
        model: Graph model providing layouts (None paints without layout gating)
        downscale: Layout downscale factor

    Returns:
        T raster frames
    """
    if reference is None:
        raise PipelineError("Reconstruction needs a reference frame")
    width, height = gop.width, gop.height
    check_raster(reference, width, height)

    ref_frame = gop.frames[0]
    plate = background_plate(reference, ref_frame)
    frames = [reference.copy()]

    for t in range(1, gop.gop_length):
        prev, curr = gop.frames[t - 1], gop.frames[t]
        support = None
        if model is not None:
            # Only the support gates synthesis; the H x W x D layout is not kept
            layout = frame_layout(curr, model, height, width, downscale)
            support = layout_support(layout, width, height, downscale)
            del layout

        flow = flow_from_oar(prev, curr, width, height)
        warped = warp_float(frames[-1], flow)
        synth = synthesize_float(None, curr, reference, plate, ref_frame, downscale, support)
        mask = (~correspondence_mask(prev, curr, width, height, flow)).astype(np.float64)

        frames.append(fuse(synth, warped, mask))
        logger.debug(
            f"Frame {t + 1}/{gop.gop_length}: {int(mask.sum())} pixels from the synthesis branch"
        )

    return frames
