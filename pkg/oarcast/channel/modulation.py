"""Gray-labeled BPSK / square QAM, power normalization and max-log LLRs."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import erfc

from ..core.errors import ConfigurationError
from .ldpc import LdpcConfig, block_count


logger = logging.getLogger(__name__)


NOISE_FLOOR = 1e-12

# name -> bits per symbol
SCHEMES = {"bpsk": 1, "4qam": 2, "16qam": 4, "64qam": 6}
ALIASES = {"qpsk": "4qam"}


def _axis_levels(bits_per_axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    PAM levels along one axis and their Gray labels.

    Position i carries amplitude (L-1) - 2i and label i ^ (i >> 1), so the
    most positive level has label 0 and neighbours differ in one bit.
    """
    L = 1 << bits_per_axis
    i = np.arange(L)
    return (L - 1 - 2 * i).astype(np.float64), i ^ (i >> 1)


def _label_bits(labels: np.ndarray, width: int) -> np.ndarray:
    """(len(labels), width) MSB-first bit table."""
    shifts = np.arange(width - 1, -1, -1)
    return ((labels[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


@dataclass(frozen=True)
class ModulationScheme:
    """A Gray-labeled constellation with unit mean energy."""

    name: str
    bits_per_symbol: int
    points: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def from_name(cls, name: str) -> "ModulationScheme":
        key = name.strip().lower()
        key = ALIASES.get(key, key)
        if key not in SCHEMES:
            raise ConfigurationError(
                f"Unknown modulation '{name}'; choose from {', '.join(SCHEMES)}"
            )
        return _scheme(key)

    @property
    def is_real(self) -> bool:
        return self.bits_per_symbol == 1

    @property
    def order(self) -> int:
        return 1 << self.bits_per_symbol

    @property
    def bits_per_axis(self) -> int:
        return self.bits_per_symbol if self.is_real else self.bits_per_symbol // 2

    @property
    def axis_scale(self) -> float:
        """Divisor applied to the integer PAM grid (1, sqrt 2, sqrt 10, sqrt 42)."""
        if self.is_real:
            return 1.0
        return math.sqrt(2.0 * (self.order - 1) / 3.0)

    def label_bits(self) -> np.ndarray:
        """(M, bits_per_symbol) bit table of every point label."""
        return _label_bits(np.arange(self.order), self.bits_per_symbol)


_SCHEME_CACHE: Dict[str, ModulationScheme] = {}


def _scheme(key: str) -> ModulationScheme:
    if key not in _SCHEME_CACHE:
        bps = SCHEMES[key]
        if bps == 1:
            points = np.array([1.0 + 0j, -1.0 + 0j])
        else:
            b = bps // 2
            amps, gray = _axis_levels(b)
            by_label = np.empty(1 << b)
            by_label[gray] = amps
            labels = np.arange(1 << bps)
            scale = math.sqrt(2.0 * ((1 << bps) - 1) / 3.0)
            points = (by_label[labels >> b] + 1j * by_label[labels & ((1 << b) - 1)]) / scale
        points.setflags(write=False)
        _SCHEME_CACHE[key] = ModulationScheme(key, bps, points)
    return _SCHEME_CACHE[key]


@dataclass(frozen=True)
class SymbolBlock:
    """Channel symbols with the metadata a receiver needs."""

    symbols: np.ndarray = field(repr=False)
    n_bits: int
    padding: int
    scheme: str
    gain: float = 1.0
    provenance: Dict[str, object] = field(default_factory=dict, compare=False)

    @property
    def size(self) -> int:
        return int(self.symbols.size)

    @property
    def mean_power(self) -> float:
        if self.symbols.size == 0:
            return 1.0
        return float(np.mean(np.abs(self.symbols) ** 2))

    def with_symbols(self, symbols: np.ndarray, **provenance) -> "SymbolBlock":
        merged = dict(self.provenance)
        merged.update(provenance)
        return SymbolBlock(symbols, self.n_bits, self.padding, self.scheme, self.gain, merged)


def modulate(
    bits: np.ndarray,
    scheme: ModulationScheme,
    provenance: Optional[Dict[str, object]] = None
) -> SymbolBlock:
    """
    Map bits to normalized symbols.

    Bits are zero-padded to a whole symbol. Points are divided by the
    empirical RMS of the block so its mean power is exactly 1; the factor
    travels in SymbolBlock.gain.

    Args:
        bits: 0/1 array
        scheme: Constellation
        provenance: Free-form record of the configs that produced the block

    Returns:
        SymbolBlock
    """
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    bps = scheme.bits_per_symbol
    padding = (-bits.size) % bps
    padded = np.concatenate([bits, np.zeros(padding, dtype=np.uint8)])
    groups = padded.reshape(-1, bps)
    weights = 1 << np.arange(bps - 1, -1, -1)
    labels = groups.astype(np.int64) @ weights
    symbols = scheme.points[labels].astype(np.complex128)

    gain = 1.0
    if symbols.size:
        gain = float(np.sqrt(np.mean(np.abs(symbols) ** 2)))
        symbols = symbols / gain

    return SymbolBlock(
        symbols=symbols,
        n_bits=int(bits.size),
        padding=int(padding),
        scheme=scheme.name,
        gain=gain,
        provenance=dict(provenance or {}),
    )


def demodulate_llr(
    symbols: np.ndarray,
    scheme: ModulationScheme,
    noise_var: float,
    gain: float = 1.0
) -> np.ndarray:
    """
    Max-log per-bit LLRs (positive favors bit 0).

    Complex schemes see noise variance noise_var/2 per dimension; BPSK sees
    real noise of variance noise_var.

    Args:
        symbols: Received symbols
        scheme: Constellation used by the transmitter
        noise_var: sigma^2 of the channel
        gain: Normalization factor applied by the transmitter

    Returns:
        LLRs, bits_per_symbol per symbol, padding included
    """
    y = np.asarray(symbols, dtype=np.complex128).ravel()
    var = max(float(noise_var), NOISE_FLOOR)

    if scheme.is_real:
        return 2.0 * y.real / (gain * var)

    b = scheme.bits_per_axis
    amps, gray = _axis_levels(b)
    amps = amps / (scheme.axis_scale * gain)
    table = _label_bits(gray, b)  # bits of each level, level order

    llrs = np.empty((y.size, 2 * b))
    for axis, component in enumerate((y.real, y.imag)):
        dist = (component[:, None] - amps[None, :]) ** 2
        for j in range(b):
            ones = table[:, j] == 1
            d1 = dist[:, ones].min(axis=1)
            d0 = dist[:, ~ones].min(axis=1)
            llrs[:, axis * b + j] = (d1 - d0) / var
    return llrs.ravel()


def hard_decide(llrs: np.ndarray) -> np.ndarray:
    return (np.asarray(llrs) < 0).astype(np.uint8)


def theoretical_ber(scheme: ModulationScheme, snr_db: float) -> float:
    """
    Uncoded Gray-mapped bit error rate over AWGN at symbol SNR snr_db.

    Nearest-neighbour approximation for 16/64-QAM; exact for BPSK and 4QAM.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    snr = 10.0 ** (snr_db / 10.0)
    if scheme.is_real:
        return float(0.5 * erfc(math.sqrt(snr / 2.0)))

    M = scheme.order
    arg = math.sqrt(3.0 * snr / (M - 1))
    q = 0.5 * erfc(arg / math.sqrt(2.0))
    return float(4.0 / math.log2(M) * (1.0 - 1.0 / math.sqrt(M)) * q)


def coded_symbol_count(
    info_bits: int,
    cfg: LdpcConfig,
    scheme: ModulationScheme,
    mode: str = "ideal"
) -> int:
    """
    Channel symbols needed for info_bits.

    "ideal" charges the exact code rate, ceil(bits * n / k / bps); "block"
    charges whole padded LDPC blocks rounded up to whole symbols.
    """
    if info_bits < 0:
        raise ConfigurationError(f"Bit count must be non-negative, got {info_bits}")
    bps = scheme.bits_per_symbol
    if mode == "ideal":
        return -(-(info_bits * cfg.n) // (cfg.k * bps))
    if mode == "block":
        return -(-(block_count(info_bits, cfg) * cfg.n) // bps)
    raise ConfigurationError(f"Unknown CBR mode '{mode}'; choose ideal or block")
