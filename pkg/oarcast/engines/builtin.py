"""In-process image codecs: raw RGB bytes and binary PPM."""

from typing import Optional

from PIL import UnidentifiedImageError

from ..reconstruct.raster import (
    RasterFrame, decode_image, encode_image, raster_from_bytes, raster_to_bytes
)
from .base import ImageCodec


class RawCodec(ImageCodec):
    """Uncompressed row-major RGB; the payload is W*H*3 bytes."""

    name = "raw"

    def encode(self, frame: RasterFrame, quality: int = 30) -> Optional[bytes]:
        return raster_to_bytes(frame)

    def decode(self, data: bytes, width: int, height: int) -> Optional[RasterFrame]:
        try:
            return raster_from_bytes(data, width, height)
        except ValueError as e:
            self.logger.warning(f"Raw decode failed: {e}")
            return None

    def is_available(self) -> bool:
        return True


class PpmCodec(ImageCodec):
    """Binary P6 PPM through Pillow; quality is ignored."""

    name = "ppm"

    def encode(self, frame: RasterFrame, quality: int = 30) -> Optional[bytes]:
        return encode_image(frame, "PPM")

    def decode(self, data: bytes, width: int, height: int) -> Optional[RasterFrame]:
        try:
            frame = decode_image(data)
        except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as e:
            self.logger.warning(f"PPM decode failed: {e}")
            return None
        return self._check_decoded(frame, width, height)

    def is_available(self) -> bool:
        return True
