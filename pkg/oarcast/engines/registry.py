"""Image codec lookup by plug-in id."""

import logging
from typing import Optional

from ..core.discovery import BinaryDiscovery
from ..core.errors import ConfigurationError
from .base import ImageCodec
from .builtin import PpmCodec, RawCodec
from .external_engine import CommandSpec, ExternalCommandCodec
from .ffmpeg_engine import FORMATS, FFmpegImageCodec


logger = logging.getLogger(__name__)


CODECS = ("raw", "ppm", "ffmpeg", "external") + tuple(f"ffmpeg-{fmt}" for fmt in FORMATS)


def create_codec(name: str, discovery: Optional[BinaryDiscovery] = None) -> ImageCodec:
    """
    Build an available image codec.

    "external" uses OARCAST_IMAGE_CODEC when set, else bpgenc/bpgdec from
    discovery. "ffmpeg" defaults to WebP; "ffmpeg-jpeg" picks JPEG.

    Raises:
        ConfigurationError: unknown id or a codec whose binaries are missing
    """
    key = name.strip().lower()

    if key == "raw":
        return RawCodec()
    if key == "ppm":
        return PpmCodec()

    if key == "ffmpeg" or key.startswith("ffmpeg-"):
        fmt = key.partition("-")[2] or "webp"
        if fmt not in FORMATS:
            raise ConfigurationError(f"Unknown ffmpeg image format {fmt}")
        if discovery is not None and not discovery.ffmpeg_path:
            discovery.discover_all()
        path = discovery.ffmpeg_path if discovery else None
        codec = FFmpegImageCodec(path, fmt)
        if not codec.is_available():
            raise ConfigurationError(f"ffmpeg with {codec.encoder} is not available")
        return codec

    if key == "external":
        spec = CommandSpec.from_env()
        if spec is None:
            if discovery is not None and not (discovery.bpgenc_path and discovery.bpgdec_path):
                discovery.discover_all()
            if discovery is None or not (discovery.bpgenc_path and discovery.bpgdec_path):
                raise ConfigurationError(
                    "External codec requested but neither OARCAST_IMAGE_CODEC "
                    "nor bpgenc/bpgdec is available"
                )
            spec = CommandSpec.bpg(discovery.bpgenc_path, discovery.bpgdec_path)
        codec = ExternalCommandCodec(spec)
        if not codec.is_available():
            raise ConfigurationError(f"External codec command not found: {codec.binary_path}")
        logger.debug(f"Using external codec {codec.binary_path}")
        return codec

    raise ConfigurationError(f"Unknown image codec {name}; choose from {', '.join(CODECS)}")
