"""MSB-first bit packing, Exp-Golomb codes and the CRC-16 trailer."""

import binascii

import numpy as np

from ..core.errors import TruncatedStreamError


CRC_INIT = 0xFFFF


def bits_for(count: int) -> int:
    """Fixed width needed to index `count` items (0 when there is one or none)."""
    if count <= 1:
        return 0
    return (count - 1).bit_length()


def crc16(data: bytes, n_bits: int) -> int:
    """CRC-16/CCITT (poly 0x1021, init 0xFFFF) over the first n_bits of data."""
    n_bytes = (n_bits + 7) // 8
    chunk = bytearray(data[:n_bytes])
    pad = n_bytes * 8 - n_bits
    if pad:
        chunk[-1] &= (0xFF << pad) & 0xFF
    return binascii.crc_hqx(bytes(chunk), CRC_INIT)


class BitWriter:
    """
    Append-only MSB-first bit buffer.

    Whole bytes go to a bytearray; fewer than 8 pending bits stay in an int.
    """

    def __init__(self):
        self._buf = bytearray()
        self._pending = 0
        self._pending_bits = 0

    def tell(self) -> int:
        return len(self._buf) * 8 + self._pending_bits

    def write_uint(self, value: int, bits: int):
        if bits == 0:
            return
        if value < 0 or value >> bits:
            raise ValueError(f"{value} does not fit in {bits} bits")
        acc = (self._pending << bits) | value
        n = self._pending_bits + bits
        full, rest = divmod(n, 8)
        if full:
            self._buf += (acc >> rest).to_bytes(full, "big")
            acc &= (1 << rest) - 1
        self._pending = acc
        self._pending_bits = rest

    def write_bool(self, value: bool):
        self.write_uint(int(bool(value)), 1)

    def write_ue(self, value: int):
        """Unsigned order-0 Exp-Golomb."""
        if value < 0:
            raise ValueError(f"ue() needs a non-negative value, got {value}")
        bits = (value + 1).bit_length() * 2 - 1
        self.write_uint(value + 1, bits)

    def write_se(self, value: int):
        """Signed Exp-Golomb via the zig-zag map 0, 1, -1, 2, -2, ..."""
        self.write_ue(2 * value - 1 if value > 0 else -2 * value)

    def getvalue(self) -> bytes:
        """Written bits, zero-padded to a whole byte."""
        if not self._pending_bits:
            return bytes(self._buf)
        tail = self._pending << (8 - self._pending_bits)
        return bytes(self._buf) + bytes((tail,))


class BitReader:
    """MSB-first reader over the first n_bits of a byte string."""

    def __init__(self, data: bytes, n_bits: int, pos: int = 0):
        if n_bits > len(data) * 8:
            raise TruncatedStreamError(
                f"Announced {n_bits} bits but only {len(data) * 8} are present"
            )
        self._value = int.from_bytes(data, "big") >> (len(data) * 8 - n_bits) if data else 0
        self._n = n_bits
        self._pos = pos

    def tell(self) -> int:
        return self._pos

    @property
    def remaining(self) -> int:
        return self._n - self._pos

    def read_uint(self, bits: int) -> int:
        if bits == 0:
            return 0
        if self._pos + bits > self._n:
            raise TruncatedStreamError(
                f"Read of {bits} bits at {self._pos} passes the end ({self._n})"
            )
        shift = self._n - self._pos - bits
        self._pos += bits
        return (self._value >> shift) & ((1 << bits) - 1)

    def read_bool(self) -> bool:
        return bool(self.read_uint(1))

    def read_ue(self) -> int:
        zeros = 0
        while self.read_uint(1) == 0:
            zeros += 1
        return ((1 << zeros) | self.read_uint(zeros)) - 1

    def read_se(self) -> int:
        value = self.read_ue()
        q, r = value >> 1, value & 1
        return q + 1 if r else -q


def bytes_to_bits(data: bytes, n_bits: int) -> np.ndarray:
    """First n_bits of data as a uint8 array of 0/1."""
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:n_bits].copy()


def bits_to_bytes(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()
