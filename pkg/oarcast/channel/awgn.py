"""Additive white Gaussian noise channel and symbol trace dumps."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..core.errors import ConfigurationError
from .modulation import SCHEMES, SymbolBlock


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChannelConfig:
    """Symbol SNR in dB (unit signal power) and the noise seed."""

    snr_db: float
    seed: int

    def __post_init__(self):
        if math.isnan(self.snr_db):
            raise ConfigurationError("SNR must be a number")

    @property
    def noise_var(self) -> float:
        """sigma^2 = 10^(-snr_db / 10); 0 for an infinite SNR."""
        if math.isinf(self.snr_db):
            if self.snr_db > 0:
                return 0.0
            raise ConfigurationError("SNR of -inf dB is not a channel")
        return 10.0 ** (-self.snr_db / 10.0)

    def with_snr(self, snr_db: float) -> "ChannelConfig":
        return ChannelConfig(snr_db, self.seed)


def unit_noise(size: int, seed: int, real: bool = False) -> np.ndarray:
    """
    Noise realization of unit total variance.

    Real noise has variance 1; complex noise has variance 1/2 per dimension.
    The same seed gives the same realization at every SNR, so channels at
    different SNRs differ only by scale.
    """
    rng = np.random.default_rng(seed)
    if real:
        return rng.standard_normal(size).astype(np.complex128)
    pairs = rng.standard_normal((size, 2)) * math.sqrt(0.5)
    return pairs[:, 0] + 1j * pairs[:, 1]


def awgn(block: SymbolBlock, cfg: ChannelConfig, noise: Optional[np.ndarray] = None) -> SymbolBlock:
    """
    Add circularly-symmetric Gaussian noise of variance sigma^2.

    BPSK blocks get real noise of variance sigma^2.

    Args:
        block: Power-normalized symbols
        cfg: SNR and seed
        noise: Pre-drawn unit noise (see unit_noise) to reuse across SNRs

    Returns:
        Noisy copy of the block
    """
    var = cfg.noise_var
    if var == 0.0:
        return block.with_symbols(block.symbols.copy(), snr_db=cfg.snr_db, seed=cfg.seed)

    real = SCHEMES.get(block.scheme) == 1
    if noise is None:
        noise = unit_noise(block.size, cfg.seed, real=real)
    elif noise.size != block.size:
        raise ValueError(f"Noise holds {noise.size} samples for {block.size} symbols")

    noisy = block.symbols + math.sqrt(var) * noise
    return block.with_symbols(noisy, snr_db=cfg.snr_db, seed=cfg.seed)


def dump_trace(symbols: Union[SymbolBlock, np.ndarray], path: Union[str, Path]) -> Path:
    """Write symbols as interleaved little-endian float32 (re, im) pairs."""
    values = symbols.symbols if isinstance(symbols, SymbolBlock) else np.asarray(symbols)
    values = np.asarray(values, dtype=np.complex128).ravel()
    pairs = np.empty(values.size * 2, dtype="<f4")
    pairs[0::2] = values.real
    pairs[1::2] = values.imag

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(pairs.tobytes())
    logger.debug(f"Channel trace: {values.size} symbols -> {path}")
    return path


def read_trace(path: Union[str, Path]) -> np.ndarray:
    pairs = np.frombuffer(Path(path).read_bytes(), dtype="<f4")
    return pairs[0::2].astype(np.float64) + 1j * pairs[1::2].astype(np.float64)
