"""Application settings management."""

import json
import logging
from dataclasses import asdict, dataclass, field, fields

from ..utils.osdetect import get_default_threads
from ..utils.paths import get_config_dir


logger = logging.getLogger(__name__)


@dataclass
class Settings:
    """Defaults for every command, persisted as JSON."""

    # Scene
    width: int = 512
    height: int = 512
    gop_length: int = 15
    fps: float = 25.0

    # Source codec
    q_angle: int = 8

    # OAR path
    oar_ldpc: str = "1/3"
    oar_modulation: str = "4qam"

    # Reference path
    ref_ldpc: str = "1/2"
    ref_modulation: str = "16qam"
    ref_codec: str = "raw"  # raw, ppm, ffmpeg, external
    ref_quality: int = 30

    # Channel
    cbr_mode: str = "ideal"  # ideal, block
    bp_iterations: int = 50
    bp_algorithm: str = "sum-product"  # sum-product, min-sum
    peg_seed: int = 2024

    # Graph
    d_c: int = 32
    d_theta: int = 16
    d_r: int = 16
    feature_dim: int = 64
    graph_seed: int = 0
    weights_path: str = ""
    layout_downscale: int = 1

    # Performance
    max_threads: int = field(default_factory=get_default_threads)

    # Runs whose failure rate exceeds this exit with status 2
    failure_threshold: float = 0.5

    def __post_init__(self):
        self.config_file = get_config_dir() / "settings.json"

    def load(self) -> bool:
        """Load settings from disk."""
        try:
            if self.config_file.exists():
                with open(self.config_file, 'r', encoding='utf-8') as f:
                    data = json.load(f)

                known = {f.name for f in fields(self)}
                for key, value in data.items():
                    if key in known:
                        setattr(self, key, value)
                    else:
                        logger.debug(f"Ignoring unknown setting {key}")

                logger.info(f"Settings loaded from {self.config_file}")
                return True

        except Exception as e:
            logger.warning(f"Failed to load settings: {e}")

        return False

    def save(self) -> bool:
        """Save settings to disk."""
        try:
            self.config_file.parent.mkdir(parents=True, exist_ok=True)

            with open(self.config_file, 'w', encoding='utf-8') as f:
                json.dump(self.to_dict(), f, indent=2)

            logger.info(f"Settings saved to {self.config_file}")
            return True

        except Exception as e:
            logger.error(f"Failed to save settings: {e}")
            return False

    def reset(self):
        """Reset settings to defaults."""
        default = Settings()
        for key, value in default.to_dict().items():
            setattr(self, key, value)

    def to_dict(self) -> dict:
        """Field values only, as written to disk and to report sidecars."""
        return asdict(self)
