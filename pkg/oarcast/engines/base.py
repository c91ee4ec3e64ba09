"""Base interface for reference-frame image codecs."""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional
import subprocess
import tempfile
import logging

import numpy as np

from ..reconstruct.raster import RasterFrame


class ImageCodec(ABC):
    """
    Abstract base class for image codecs.

    encode returns the coded bytes (the declared payload for CBR accounting)
    or None on failure; decode returns an H x W x 3 uint8 frame or None.
    Failures are logged, never raised.
    """

    name = "base"

    def __init__(self, binary_path: Optional[str] = None):
        self.binary_path = binary_path
        self.process: Optional[subprocess.Popen] = None
        self.logger = logging.getLogger(self.__class__.__name__)

    @abstractmethod
    def encode(self, frame: RasterFrame, quality: int = 30) -> Optional[bytes]:
        """
        Encode a raster frame.

        Args:
            frame: H x W x 3 uint8 image
            quality: Codec-specific quality knob

        Returns:
            Coded bytes, or None if encoding failed
        """
        pass

    @abstractmethod
    def decode(self, data: bytes, width: int, height: int) -> Optional[RasterFrame]:
        """Decode bytes to a width x height frame, None if they are unusable."""
        pass

    @abstractmethod
    def is_available(self) -> bool:
        """Check if the codec can run here."""
        pass

    def cancel(self):
        """Terminate the external process of the current encode or decode, if any."""
        process = self.process
        if process is None or process.poll() is not None:
            return
        self.logger.info("Cancelling codec process")
        process.terminate()
        try:
            process.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.logger.warning("Process didn't terminate, killing")
            process.kill()

    def _check_decoded(self, frame: Optional[np.ndarray], width: int, height: int) -> Optional[RasterFrame]:
        if frame is None:
            return None
        if frame.shape != (height, width, 3):
            self.logger.warning(f"Decoded {frame.shape}, expected {(height, width, 3)}")
            return None
        return frame.astype(np.uint8, copy=False)

    def _workdir(self) -> tempfile.TemporaryDirectory:
        return tempfile.TemporaryDirectory(prefix="oarcast-")

    def _run_command(self, cmd: list, timeout: float = 120.0) -> bool:
        """
        Run an external codec command.

        Args:
            cmd: Command and arguments
            timeout: Seconds before the process is killed

        Returns:
            True if the command exited with status 0
        """
        try:
            self.logger.debug(f"Running command: {' '.join(str(c) for c in cmd)}")

            self.process = subprocess.Popen(
                [str(c) for c in cmd],
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                universal_newlines=True
            )

            stdout, stderr = self.process.communicate(timeout=timeout)

            if self.process.returncode != 0:
                self.logger.error(f"Codec command failed: {stderr.strip()}")
                return False

            return True

        except subprocess.TimeoutExpired:
            self.logger.error(f"Codec command timed out after {timeout}s")
            if self.process:
                self.process.kill()
            return False
        except Exception as e:
            self.logger.exception(f"Codec error: {e}")
            return False
        finally:
            self.process = None

    @staticmethod
    def _read_output(path: Path) -> Optional[bytes]:
        if not path.exists():
            return None
        return path.read_bytes()
