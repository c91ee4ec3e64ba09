"""Shell-command image codec configured with command templates."""

import json
import os
import shlex
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from PIL import UnidentifiedImageError

from ..core.errors import ConfigurationError
from ..reconstruct.raster import RasterFrame, read_image, write_image
from .base import ImageCodec


ENV_VAR = "OARCAST_IMAGE_CODEC"


@dataclass(frozen=True)
class CommandSpec:
    """
    Encode/decode command templates.

    Templates are split like a shell command line and may use the
    placeholders {input}, {output} and {quality}. The encoder reads a PNG
    and writes a file with `suffix`; the decoder reads that file and writes
    a PNG or PPM named by `decoded_suffix`.
    """

    encode: str
    decode: str
    suffix: str = ".bin"
    decoded_suffix: str = ".png"

    @classmethod
    def from_json(cls, text: str) -> "CommandSpec":
        try:
            data = json.loads(text)
            return cls(
                encode=str(data["encode"]),
                decode=str(data["decode"]),
                suffix=str(data.get("suffix", ".bin")),
                decoded_suffix=str(data.get("decoded_suffix", ".png")),
            )
        except (ValueError, KeyError, TypeError) as e:
            raise ConfigurationError(f"Invalid external codec spec: {e}") from e

    @classmethod
    def from_env(cls) -> Optional["CommandSpec"]:
        """
        Read OARCAST_IMAGE_CODEC: inline JSON or the path of a JSON file.
        """
        value = os.environ.get(ENV_VAR, "").strip()
        if not value:
            return None
        if value.startswith("{"):
            return cls.from_json(value)
        path = Path(value)
        if not path.is_file():
            raise ConfigurationError(f"{ENV_VAR} points to a missing file: {value}")
        return cls.from_json(path.read_text(encoding="utf-8"))

    @classmethod
    def bpg(cls, bpgenc: str, bpgdec: str) -> "CommandSpec":
        return cls(
            encode=f"{shlex.quote(bpgenc)} -q {{quality}} -o {{output}} {{input}}",
            decode=f"{shlex.quote(bpgdec)} -o {{output}} {{input}}",
            suffix=".bpg",
        )

    def program(self, template: str) -> str:
        parts = shlex.split(template)
        if not parts:
            raise ConfigurationError("Empty external codec command")
        return parts[0]


def _render(template: str, **values) -> list:
    return [part.format(**values) for part in shlex.split(template)]


class ExternalCommandCodec(ImageCodec):
    """Runs user-configured encode and decode commands on temporary files."""

    name = "external"

    def __init__(self, spec: CommandSpec):
        super().__init__(spec.program(spec.encode))
        self.spec = spec

    def encode(self, frame: RasterFrame, quality: int = 30) -> Optional[bytes]:
        with self._workdir() as tmp:
            src = Path(tmp) / "input.png"
            dst = Path(tmp) / f"coded{self.spec.suffix}"
            write_image(frame, src)

            cmd = _render(self.spec.encode, input=src, output=dst, quality=quality)
            if not self._run_command(cmd):
                return None
            data = self._read_output(dst)
            if data is None:
                self.logger.error(f"Encoder wrote no output to {dst.name}")
            return data

    def decode(self, data: bytes, width: int, height: int) -> Optional[RasterFrame]:
        with self._workdir() as tmp:
            src = Path(tmp) / f"coded{self.spec.suffix}"
            dst = Path(tmp) / f"decoded{self.spec.decoded_suffix}"
            src.write_bytes(data)

            cmd = _render(self.spec.decode, input=src, output=dst, quality=0)
            if not self._run_command(cmd) or not dst.exists():
                return None
            try:
                frame = read_image(dst)
            except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as e:
                self.logger.warning(f"Decoded file unreadable: {e}")
                return None
            return self._check_decoded(frame, width, height)

    def is_available(self) -> bool:
        for template in (self.spec.encode, self.spec.decode):
            program = self.spec.program(template)
            if shutil.which(program) is None and not Path(program).is_file():
                return False
        return True
