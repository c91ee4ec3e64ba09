"""FFmpeg still-image codec implementation."""

from pathlib import Path
from typing import Optional
import subprocess

import numpy as np

from ..reconstruct.raster import RasterFrame, write_image
from .base import ImageCodec


# format -> (ffmpeg encoder, file suffix)
FORMATS = {
    "webp": ("libwebp", ".webp"),
    "jpeg": ("mjpeg", ".jpg"),
}


class FFmpegImageCodec(ImageCodec):
    """Encode reference frames to WebP or JPEG with ffmpeg."""

    name = "ffmpeg"

    def __init__(self, binary_path: Optional[str] = None, fmt: str = "webp"):
        super().__init__(binary_path)
        if fmt not in FORMATS:
            raise ValueError(f"Unsupported ffmpeg image format {fmt}; use one of {sorted(FORMATS)}")
        self.fmt = fmt
        self.encoder, self.suffix = FORMATS[fmt]

    def _quality_args(self, quality: int) -> list:
        if self.fmt == "webp":
            # libwebp: 0..100, higher is better
            return ["-quality", str(max(0, min(100, quality)))]
        # mjpeg: qscale 2..31, lower is better; map 0..100 onto it
        qscale = int(round(31 - 29 * max(0, min(100, quality)) / 100))
        return ["-q:v", str(qscale)]

    def encode(self, frame: RasterFrame, quality: int = 30) -> Optional[bytes]:
        """Encode via a temporary PNG."""
        with self._workdir() as tmp:
            src = Path(tmp) / "input.png"
            dst = Path(tmp) / f"output{self.suffix}"
            write_image(frame, src)

            cmd = [
                self.binary_path or "ffmpeg",
                "-v", "error",
                "-i", str(src),
                "-frames:v", "1",
                "-c:v", self.encoder,
            ]
            cmd.extend(self._quality_args(quality))
            cmd.extend(["-y", str(dst)])

            if not self._run_command(cmd):
                return None
            return self._read_output(dst)

    def decode(self, data: bytes, width: int, height: int) -> Optional[RasterFrame]:
        """Decode to raw RGB24 on stdout."""
        with self._workdir() as tmp:
            src = Path(tmp) / f"input{self.suffix}"
            src.write_bytes(data)
            cmd = [
                self.binary_path or "ffmpeg",
                "-v", "error",
                "-i", str(src),
                "-frames:v", "1",
                "-f", "rawvideo",
                "-pix_fmt", "rgb24",
                "-",
            ]
            try:
                self.logger.debug(f"Running command: {' '.join(cmd)}")
                result = subprocess.run(cmd, capture_output=True, timeout=120)
            except (OSError, subprocess.TimeoutExpired) as e:
                self.logger.error(f"ffmpeg decode failed: {e}")
                return None

            if result.returncode != 0 or len(result.stdout) != width * height * 3:
                self.logger.warning(
                    f"ffmpeg decode produced {len(result.stdout)} bytes "
                    f"(status {result.returncode})"
                )
                return None

            frame = np.frombuffer(result.stdout, dtype=np.uint8).reshape(height, width, 3)
            return self._check_decoded(frame.copy(), width, height)

    def is_available(self) -> bool:
        """Check if ffmpeg with the chosen encoder is available."""
        try:
            cmd = [self.binary_path or "ffmpeg", "-hide_banner", "-encoders"]
            result = subprocess.run(
                cmd,
                capture_output=True,
                text=True,
                check=True
            )
            return self.encoder in result.stdout
        except (OSError, subprocess.SubprocessError):
            return False
