"""
LDPC block codes: configurations, systematic encoding and batched
belief-propagation decoding (sum-product or normalized min-sum).
"""

import functools
import logging
import math
import os
import tempfile
import threading
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy import sparse

from ..core.errors import ConfigurationError
from ..utils.paths import get_cache_dir
from .peg import peg_construct, read_alist, write_alist


logger = logging.getLogger(__name__)


# name -> (k, n)
STANDARD_CODES = {
    "1/3": (1536, 4608),
    "1/2": (3072, 6144),
    "2/3": (3072, 4608),
}

ALGORITHMS = ("sum-product", "min-sum")

DEFAULT_PEG_SEED = 2024
COLUMN_DEGREE = 3

# LLR magnitude ceiling inside the decoder
LLR_CLIP = 30.0
MIN_SUM_SCALE = 0.8
# Blocks decoded together; bounds message-array memory
DECODE_CHUNK = 64

# Serializes code construction and the on-disk cache across sweep workers
_BUILD_LOCK = threading.Lock()


@dataclass(frozen=True)
class LdpcConfig:
    """One LDPC code plus decoder settings."""

    name: str
    k: int
    n: int
    max_iter: int = 50
    algorithm: str = "sum-product"
    peg_seed: int = DEFAULT_PEG_SEED
    alist_path: Optional[str] = None

    def __post_init__(self):
        if not 0 < self.k < self.n:
            raise ConfigurationError(f"LDPC needs 0 < k < n, got ({self.k}, {self.n})")
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"Unknown BP algorithm '{self.algorithm}'")
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be >= 1, got {self.max_iter}")

    @classmethod
    def from_name(cls, name: str, **kwargs) -> "LdpcConfig":
        """Standard code by rate name: "1/3", "1/2" or "2/3"."""
        key = name.strip()
        if key not in STANDARD_CODES:
            raise ConfigurationError(
                f"Unknown LDPC rate '{name}'; choose from {', '.join(STANDARD_CODES)}"
            )
        k, n = STANDARD_CODES[key]
        return cls(name=key, k=k, n=n, **kwargs)

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def m(self) -> int:
        return self.n - self.k


# --------------------------------------------------------------------------
# GF(2) elimination
# --------------------------------------------------------------------------

def _gf2_rref(H: sparse.spmatrix) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reduced row echelon form of H over GF(2) on bit-packed rows.

    Returns:
        (pivot columns, dense 0/1 rows of the reduced matrix for those pivots)
    """
    m, n = H.shape
    words = -(-n // 64)
    dense = np.zeros((m, words * 64), dtype=np.uint8)
    dense[:, :n] = H.toarray() & 1
    packed8 = np.packbits(dense, axis=1)
    packed = packed8.view(np.uint64)

    pivots = []
    rank = 0
    for col in range(n):
        if rank == m:
            break
        byte, shift = col >> 3, 7 - (col & 7)
        column = (packed8[rank:, byte] >> shift) & 1
        hits = np.flatnonzero(column)
        if hits.size == 0:
            continue
        p = rank + int(hits[0])
        if p != rank:
            packed[[rank, p]] = packed[[p, rank]]
        rows = np.flatnonzero((packed8[:, byte] >> shift) & 1)
        rows = rows[rows != rank]
        if rows.size:
            packed[rows] ^= packed[rank]
        pivots.append(col)
        rank += 1

    reduced = np.unpackbits(packed8[:rank], axis=1)[:, :n]
    return np.asarray(pivots, dtype=np.int64), reduced


class LdpcCode:
    """
    A parity-check matrix with its systematic encoder and decoder tables.

    Information bits occupy the first k non-pivot columns of the reduced H;
    any further non-pivot columns (rank-deficient H) are fixed to zero.
    """

    def __init__(self, cfg: LdpcConfig, H: sparse.spmatrix, pivots: np.ndarray, reduced: np.ndarray):
        self.cfg = cfg
        self.H = sparse.csr_matrix(H, dtype=np.uint8)
        m, n = self.H.shape
        if (m, n) != (cfg.m, cfg.n):
            raise ConfigurationError(
                f"H is {m}x{n}, expected {cfg.m}x{cfg.n} for {cfg.name}"
            )
        col_deg = np.diff(sparse.csc_matrix(self.H).indptr)
        if col_deg.min() < 2:
            raise ConfigurationError(f"H for {cfg.name} has a column of degree < 2")

        free = np.setdiff1d(np.arange(n), pivots)
        if free.size < cfg.k:
            raise ConfigurationError(
                f"H has rank {pivots.size}; fewer than k={cfg.k} free columns"
            )
        self.pivots = pivots
        self.info_cols = free[:cfg.k]
        # parity[p_i] = sum over info columns of reduced[i, col] * u
        self._parity_gen = reduced[:, self.info_cols].astype(np.float32)

        self._build_graph()

    def _build_graph(self):
        """Padded check-major edge tables for vectorized message passing."""
        H = self.H.tocsr()
        H.sort_indices()
        m, n = H.shape
        deg = np.diff(H.indptr)
        dmax = int(deg.max())
        slots = np.full((m, dmax), n, dtype=np.int64)
        for i in range(m):
            slots[i, :deg[i]] = H.indices[H.indptr[i]:H.indptr[i + 1]]
        self.check_slots = slots
        self.slot_valid = slots < n
        flat = slots.ravel()
        valid = flat < n
        # var x slot incidence for var-node sums
        self._var_incidence = sparse.csr_matrix(
            (np.ones(int(valid.sum()), dtype=np.float64), (flat[valid], np.flatnonzero(valid))),
            shape=(n, flat.size),
        )
        self._Hi = sparse.csr_matrix(H, dtype=np.int32)

    # ------------------------------------------------------------------

    def encode(self, info: np.ndarray) -> np.ndarray:
        """Encode (B, k) or (k,) info bits into codewords."""
        u = np.atleast_2d(np.asarray(info, dtype=np.uint8))
        if u.shape[1] != self.cfg.k:
            raise ValueError(f"Info blocks must hold {self.cfg.k} bits, got {u.shape[1]}")
        code = np.zeros((u.shape[0], self.cfg.n), dtype=np.uint8)
        code[:, self.info_cols] = u
        parity = (u.astype(np.float32) @ self._parity_gen.T).astype(np.int64) & 1
        code[:, self.pivots] = parity.astype(np.uint8)
        return code if np.ndim(info) > 1 else code[0]

    def syndrome(self, codewords: np.ndarray) -> np.ndarray:
        """(B, n-k) syndromes of (B, n) hard decisions."""
        c = np.atleast_2d(np.asarray(codewords, dtype=np.int32))
        return np.asarray(self._Hi @ c.T).T & 1

    def extract_info(self, codewords: np.ndarray) -> np.ndarray:
        return np.asarray(codewords)[..., self.info_cols]

    # ------------------------------------------------------------------

    def _check_update(self, v2c: np.ndarray) -> np.ndarray:
        """Check-to-variable messages from (B, m, dmax) variable-to-check ones."""
        if self.cfg.algorithm == "min-sum":
            mag = np.where(self.slot_valid, np.abs(v2c), np.inf)
            neg = (v2c < 0) & self.slot_valid
            parity = np.logical_xor.reduce(neg, axis=2, keepdims=True)
            order = np.argsort(mag, axis=2)
            min1 = np.take_along_axis(mag, order[..., :1], axis=2)
            min2 = np.take_along_axis(mag, order[..., 1:2], axis=2)
            is_min = np.arange(mag.shape[2])[None, None, :] == order[..., :1]
            out = np.where(is_min, min2, min1) * MIN_SUM_SCALE
            sign = np.where(parity ^ neg, -1.0, 1.0)
            return np.where(self.slot_valid, sign * out, 0.0)

        t = np.tanh(np.clip(v2c, -LLR_CLIP, LLR_CLIP) / 2.0)
        t = np.where(self.slot_valid, t, 1.0)
        neg = t < 0
        logmag = np.log(np.maximum(np.abs(t), 1e-300))
        total = logmag.sum(axis=2, keepdims=True)
        parity = np.logical_xor.reduce(neg, axis=2, keepdims=True)
        mag = np.exp(total - logmag)
        mag = np.minimum(mag, 1.0 - 1e-15)
        sign = np.where(parity ^ neg, -1.0, 1.0)
        out = 2.0 * np.arctanh(mag) * sign
        return np.where(self.slot_valid, out, 0.0)

    def _decode_chunk(self, L: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        B, n = L.shape
        m, dmax = self.check_slots.shape

        decided = (L < 0).astype(np.uint8)
        converged = ~self.syndrome(decided).any(axis=1)
        iterations = np.zeros(B, dtype=np.int64)

        active = np.flatnonzero(~converged)
        totals = L[active].copy()
        c2v = np.zeros((active.size, m, dmax))

        for it in range(1, self.cfg.max_iter + 1):
            if active.size == 0:
                break
            tpad = np.concatenate([totals, np.zeros((active.size, 1))], axis=1)
            c2v = self._check_update(tpad[:, self.check_slots] - c2v)
            totals = L[active] + (self._var_incidence @ c2v.reshape(active.size, -1).T).T

            bits = (totals < 0).astype(np.uint8)
            ok = ~self.syndrome(bits).any(axis=1)
            decided[active] = bits
            iterations[active] = it
            converged[active[ok]] = True

            keep = ~ok
            active, totals, c2v = active[keep], totals[keep], c2v[keep]

        return self.extract_info(decided), converged, iterations

    def decode(self, llrs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Batched flooding belief propagation.

        Blocks whose hard decision already satisfies every check return with
        zero iterations; the rest stop at the first zero syndrome.

        Args:
            llrs: (B, n) or (n,) channel LLRs, positive favoring bit 0

        Returns:
            (info bits (B, k), converged flags (B,), iterations used (B,))
        """
        single = np.ndim(llrs) == 1
        L = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
        if L.shape[1] != self.cfg.n:
            raise ValueError(f"Expected {self.cfg.n} LLRs per block, got {L.shape[1]}")
        L = np.clip(L, -2 * LLR_CLIP, 2 * LLR_CLIP)

        parts = [self._decode_chunk(L[i:i + DECODE_CHUNK]) for i in range(0, len(L), DECODE_CHUNK)]
        if not parts:
            return (np.zeros((0, self.cfg.k), dtype=np.uint8),
                    np.zeros(0, dtype=bool), np.zeros(0, dtype=np.int64))
        info = np.concatenate([p[0] for p in parts])
        converged = np.concatenate([p[1] for p in parts])
        iterations = np.concatenate([p[2] for p in parts])

        if single:
            return info[0], converged[:1], iterations[:1]
        return info, converged, iterations


# --------------------------------------------------------------------------
# Construction and caching
# --------------------------------------------------------------------------

def _cache_paths(cfg: LdpcConfig) -> Tuple[Path, Path]:
    base = get_cache_dir() / "ldpc"
    stem = f"peg_{cfg.n}_{cfg.k}_d{COLUMN_DEGREE}_s{cfg.peg_seed}"
    return base / f"{stem}.alist", base / f"{stem}.npz"


def _load_matrix(cfg: LdpcConfig) -> sparse.csr_matrix:
    if cfg.alist_path:
        logger.info(f"Loading parity-check matrix from {cfg.alist_path}")
        return read_alist(cfg.alist_path)

    alist, _ = _cache_paths(cfg)
    if alist.exists():
        try:
            return read_alist(alist)
        except ConfigurationError as e:
            logger.warning(f"Ignoring damaged cached matrix {alist}: {e}")

    logger.info(f"Building PEG matrix for LDPC {cfg.name} ({cfg.k},{cfg.n}), seed {cfg.peg_seed}")
    H = peg_construct(cfg.n, cfg.m, COLUMN_DEGREE, cfg.peg_seed)
    try:
        write_alist(H, alist)
    except OSError as e:
        logger.warning(f"Could not cache parity-check matrix: {e}")
    return H


def _save_tables(npz: Path, pivots: np.ndarray, reduced: np.ndarray):
    """Write the encoder tables next to their final path, then rename over it."""
    npz.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=npz.parent, prefix=npz.stem, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            np.savez_compressed(f, pivots=pivots, reduced=reduced)
        os.replace(tmp, npz)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@functools.lru_cache(maxsize=8)
def _build_code(cfg: LdpcConfig) -> LdpcCode:
    H = _load_matrix(cfg)
    _, npz = _cache_paths(cfg)

    if not cfg.alist_path and npz.exists():
        try:
            with np.load(npz) as data:
                return LdpcCode(cfg, H, data["pivots"], data["reduced"])
        except (OSError, KeyError, ValueError, EOFError, zipfile.BadZipFile) as e:
            logger.warning(f"Ignoring damaged encoder cache {npz}: {e}")

    pivots, reduced = _gf2_rref(H)
    logger.debug(f"LDPC {cfg.name}: rank {pivots.size} of {cfg.m} checks")

    if not cfg.alist_path:
        try:
            _save_tables(npz, pivots, reduced)
        except OSError as e:
            logger.warning(f"Could not cache encoder tables: {e}")

    return LdpcCode(cfg, H, pivots, reduced)


def get_code(cfg: LdpcConfig) -> LdpcCode:
    """Code for a configuration; the decoder settings do not affect H."""
    with _BUILD_LOCK:
        return _build_code(cfg)


# --------------------------------------------------------------------------
# Block-level operations
# --------------------------------------------------------------------------

def block_count(n_bits: int, cfg: LdpcConfig) -> int:
    return max(1, math.ceil(n_bits / cfg.k))


def pad_to_blocks(bits: np.ndarray, cfg: LdpcConfig) -> Tuple[np.ndarray, int]:
    """Zero-pad a bit vector to whole info blocks; returns (B x k blocks, padding)."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    blocks = block_count(bits.size, cfg)
    padding = blocks * cfg.k - bits.size
    padded = np.concatenate([bits, np.zeros(padding, dtype=np.uint8)])
    return padded.reshape(blocks, cfg.k), padding


def ldpc_encode(info_bits: np.ndarray, cfg: LdpcConfig) -> Tuple[np.ndarray, int]:
    """
    Pad and encode a bit string.

    Args:
        info_bits: 0/1 array of any length
        cfg: Code configuration

    Returns:
        (B x n codewords, padding length in bits)
    """
    blocks, padding = pad_to_blocks(info_bits, cfg)
    code = get_code(cfg)
    codewords = code.encode(blocks)
    logger.debug(
        f"LDPC {cfg.name}: {np.asarray(info_bits).size} bits -> {len(codewords)} blocks, "
        f"padding {padding}"
    )
    return codewords, padding


def ldpc_decode(llrs: np.ndarray, cfg: LdpcConfig) -> Tuple[np.ndarray, bool, int]:
    """Decode one block of n LLRs: (info bits, converged, iterations used)."""
    info, converged, iterations = get_code(cfg).decode(np.asarray(llrs).ravel())
    return info, bool(converged[0]), int(iterations[0])


def ldpc_decode_blocks(llrs: np.ndarray, cfg: LdpcConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decode (B, n) LLRs at once; failure is a returned flag, never an exception."""
    return get_code(cfg).decode(np.atleast_2d(llrs))
