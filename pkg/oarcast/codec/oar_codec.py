"""
Bit-exact OAR source codec.

Frame 1 of a GoP is coded in full (I-frame). Later frames (P-frames) code
deaths as indices into the previous object list, persisting objects as
signed Exp-Golomb deltas, births in full, and the relation set in full.

Layout (MSB first, no byte alignment between frames):

    magic "OARS" 32 | version 8 | width 16 | height 16 | T 16 | q 8 |
    categories 8 | relation labels 8 | payload bits 32 |
    payload ... | CRC-16 over everything before it
"""

import logging
import struct
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import (
    BitstreamDecodeError, CapacityError, ConfigurationError, CrcMismatchError,
    TruncatedStreamError
)
from ..core.oar import (
    BACKGROUND_ID, Attributes, Category, GopStream, OarFrame, Relation,
    RelationLabel, ensure_valid_frame, validate_frame
)
from ..utils.progress import calculate_bitrate
from .bitio import BitReader, BitWriter, bits_for, bits_to_bytes, bytes_to_bits, crc16


logger = logging.getLogger(__name__)


MAGIC = b"OARS"
VERSION = 1
HEADER_BITS = 32 + 8 + 16 + 16 + 16 + 8 + 8 + 8 + 32
CRC_BITS = 16
MAX_OBJECTS = 1 << 16
CATEGORY_BITS = bits_for(len(Category))
LABEL_BITS = 2


@dataclass(frozen=True)
class QuantParams:
    """Angle quantization; coordinate widths follow from the canvas."""

    q_angle: int = 8

    def __post_init__(self):
        if not 1 <= self.q_angle <= 16:
            raise ConfigurationError(f"q_angle must be in [1, 16], got {self.q_angle}")

    @property
    def angle_bins(self) -> int:
        return 1 << self.q_angle

    @staticmethod
    def coord_bits(dim: int) -> int:
        """ceil(log2(dim + 1))"""
        return int(dim).bit_length()


@dataclass(frozen=True)
class Bitstream:
    """Encoded GoP: packed bytes plus the exact bit length."""

    data: bytes
    n_bits: int
    frame_bits: Tuple[int, ...] = field(default=(), compare=False)

    def to_bits(self) -> np.ndarray:
        return bytes_to_bits(self.data, self.n_bits)

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "Bitstream":
        return cls(bits_to_bytes(bits), int(len(bits)))

    @property
    def gop_length(self) -> int:
        return _read_header(self)["gop_length"]


@dataclass(frozen=True)
class BitAccount:
    """Rate report for one bitstream."""

    total_bits: int
    header_bits: int
    frame_payload_bits: Tuple[int, ...]
    bits_per_frame: float
    kbps: float
    fps: float


# --------------------------------------------------------------------------
# Quantization
# --------------------------------------------------------------------------

def angle_to_bin(angle: float, q: int) -> int:
    bins = 1 << q
    return int(np.floor(angle * bins / 360.0 + 0.5)) % bins


def bin_to_angle(b: int, q: int) -> float:
    return b * 360.0 / (1 << q)


def quantize_frame(frame: OarFrame, params: QuantParams) -> OarFrame:
    """Snap every angle to the q-bit grid; coordinates are already integers."""
    q = params.q_angle
    attributes = {
        oid: Attributes(a.x, a.y, a.w, a.h, bin_to_angle(angle_to_bin(a.angle, q), q), a.category)
        for oid, a in frame.attributes.items()
    }
    return OarFrame(frame.frame_index, frame.objects, attributes, frame.relations)


def quantize_gop(gop: GopStream, params: QuantParams) -> GopStream:
    return gop.with_frames([quantize_frame(f, params) for f in gop.frames])


# --------------------------------------------------------------------------
# Encoding
# --------------------------------------------------------------------------

class _Layout:
    def __init__(self, width: int, height: int, params: QuantParams):
        self.x_bits = QuantParams.coord_bits(width)
        self.y_bits = QuantParams.coord_bits(height)
        self.q = params.q_angle
        self.bins = params.angle_bins


def _write_full_object(bw: BitWriter, oid: int, a: Attributes, lay: _Layout):
    bw.write_ue(oid)
    bw.write_uint(int(a.category), CATEGORY_BITS)
    bw.write_uint(a.x, lay.x_bits)
    bw.write_uint(a.y, lay.y_bits)
    bw.write_uint(a.w, lay.x_bits)
    bw.write_uint(a.h, lay.y_bits)
    bw.write_uint(angle_to_bin(a.angle, lay.q), lay.q)


def _write_relations(bw: BitWriter, frame: OarFrame):
    node_index = {oid: i for i, oid in enumerate(frame.nodes())}
    width = bits_for(len(node_index))
    relations = sorted(frame.relations)
    bw.write_ue(len(relations))
    for rel in relations:
        bw.write_uint(node_index[rel.subject], width)
        bw.write_uint(node_index[rel.object], width)
        bw.write_uint(int(rel.label), LABEL_BITS)


def _circular_delta(b1: int, b0: int, bins: int) -> int:
    d = (b1 - b0) % bins
    if d >= bins // 2:
        d -= bins
    return d


def _write_iframe(bw: BitWriter, frame: OarFrame, lay: _Layout):
    bw.write_ue(frame.object_count)
    for oid in frame.objects:
        _write_full_object(bw, oid, frame.attributes[oid], lay)
    _write_relations(bw, frame)


def _write_pframe(bw: BitWriter, frame: OarFrame, prev: OarFrame, lay: _Layout):
    prev_index = {oid: i for i, oid in enumerate(prev.objects)}
    idx_bits = bits_for(prev.object_count)
    current = set(frame.objects)

    if prev.object_count:
        deaths = [i for i, oid in enumerate(prev.objects) if oid not in current]
        bw.write_ue(len(deaths))
        for i in deaths:
            bw.write_uint(i, idx_bits)

    bw.write_ue(frame.object_count)
    for oid in frame.objects:
        a = frame.attributes[oid]
        if oid in prev_index:
            p = prev.attributes[oid]
            bw.write_bool(False)
            bw.write_uint(prev_index[oid], idx_bits)
            bw.write_se(a.x - p.x)
            bw.write_se(a.y - p.y)
            bw.write_se(a.w - p.w)
            bw.write_se(a.h - p.h)
            bw.write_se(_circular_delta(
                angle_to_bin(a.angle, lay.q), angle_to_bin(p.angle, lay.q), lay.bins
            ))
            if a.category == p.category:
                bw.write_bool(False)
            else:
                bw.write_bool(True)
                bw.write_uint(int(a.category), CATEGORY_BITS)
        else:
            bw.write_bool(True)
            _write_full_object(bw, oid, a, lay)

    _write_relations(bw, frame)


def _write_header(bw: BitWriter, gop: GopStream, params: QuantParams, payload_bits: int):
    bw.write_uint(int.from_bytes(MAGIC, "big"), 32)
    bw.write_uint(VERSION, 8)
    bw.write_uint(gop.width, 16)
    bw.write_uint(gop.height, 16)
    bw.write_uint(gop.gop_length, 16)
    bw.write_uint(params.q_angle, 8)
    bw.write_uint(len(Category), 8)
    bw.write_uint(len(RelationLabel), 8)
    bw.write_uint(payload_bits, 32)


def encode_gop(gop: GopStream, params: QuantParams = QuantParams()) -> Bitstream:
    """
    Encode a GoP into a bitstream.

    Args:
        gop: GoP whose frames all pass validate_frame
        params: Quantization parameters

    Returns:
        Bitstream with per-frame payload sizes attached
    """
    if gop.width >= 1 << 16 or gop.height >= 1 << 16 or gop.gop_length >= 1 << 16:
        raise CapacityError(f"Canvas {gop.width}x{gop.height}, T={gop.gop_length} exceeds 16-bit header fields")

    lay = _Layout(gop.width, gop.height, params)
    payload = BitWriter()
    frame_bits = []
    prev: Optional[OarFrame] = None

    for frame in gop.frames:
        ensure_valid_frame(frame, gop.width, gop.height)
        if frame.object_count > MAX_OBJECTS:
            raise CapacityError(
                f"Frame {frame.frame_index} holds {frame.object_count} objects (max {MAX_OBJECTS})"
            )
        start = payload.tell()
        if prev is None:
            _write_iframe(payload, frame, lay)
        else:
            _write_pframe(payload, frame, prev, lay)
        frame_bits.append(payload.tell() - start)
        prev = frame

    n_payload = payload.tell()
    bw = BitWriter()
    _write_header(bw, gop, params, n_payload)
    # Append payload bits verbatim
    if n_payload:
        bw.write_uint(int.from_bytes(payload.getvalue(), "big") >> ((-n_payload) % 8), n_payload)
    body = bw.getvalue()
    bw.write_uint(crc16(body, bw.tell()), CRC_BITS)

    stream = Bitstream(bw.getvalue(), bw.tell(), tuple(frame_bits))
    logger.debug(
        f"Encoded GoP {gop.width}x{gop.height} T={gop.gop_length}: "
        f"{stream.n_bits} bits (I-frame payload {frame_bits[0] if frame_bits else 0})"
    )
    return stream


# --------------------------------------------------------------------------
# Decoding
# --------------------------------------------------------------------------

def _read_header(bits: Bitstream) -> Dict[str, int]:
    if bits.n_bits < HEADER_BITS:
        raise TruncatedStreamError(f"Stream of {bits.n_bits} bits is shorter than the header")
    br = BitReader(bits.data, bits.n_bits)
    magic = br.read_uint(32).to_bytes(4, "big")
    if magic != MAGIC:
        raise BitstreamDecodeError(f"Bad magic {magic!r}")
    header = {
        "version": br.read_uint(8),
        "width": br.read_uint(16),
        "height": br.read_uint(16),
        "gop_length": br.read_uint(16),
        "q_angle": br.read_uint(8),
        "categories": br.read_uint(8),
        "labels": br.read_uint(8),
        "payload_bits": br.read_uint(32),
    }
    if header["version"] != VERSION:
        raise BitstreamDecodeError(f"Unsupported bitstream version {header['version']}")
    if header["categories"] != len(Category) or header["labels"] != len(RelationLabel):
        raise BitstreamDecodeError("Vocabulary sizes in header do not match this decoder")
    return header


def _read_full_object(br: BitReader, lay: _Layout) -> Tuple[int, Attributes]:
    oid = br.read_ue()
    cat = br.read_uint(CATEGORY_BITS)
    if cat >= len(Category):
        raise BitstreamDecodeError(f"Category code {cat} out of range")
    x = br.read_uint(lay.x_bits)
    y = br.read_uint(lay.y_bits)
    w = br.read_uint(lay.x_bits)
    h = br.read_uint(lay.y_bits)
    angle = bin_to_angle(br.read_uint(lay.q), lay.q)
    return oid, Attributes(x, y, w, h, angle, Category(cat))


def _read_relations(br: BitReader, nodes: Sequence[int]) -> List[Relation]:
    width = bits_for(len(nodes))
    relations = []
    for _ in range(br.read_ue()):
        s = br.read_uint(width)
        o = br.read_uint(width)
        label = br.read_uint(LABEL_BITS)
        if s >= len(nodes) or o >= len(nodes) or label >= len(RelationLabel):
            raise BitstreamDecodeError("Relation field out of range")
        relations.append(Relation(nodes[s], nodes[o], RelationLabel(label)))
    return relations


def _read_iframe(br: BitReader, lay: _Layout) -> OarFrame:
    count = br.read_ue()
    if count > MAX_OBJECTS:
        raise BitstreamDecodeError(f"Object count {count} out of range")
    objects, attributes = [], {}
    for _ in range(count):
        oid, a = _read_full_object(br, lay)
        objects.append(oid)
        attributes[oid] = a
    relations = _read_relations(br, (BACKGROUND_ID,) + tuple(objects))
    return OarFrame(1, tuple(objects), attributes, frozenset(relations))


def _read_pframe(br: BitReader, prev: OarFrame, index: int, lay: _Layout) -> OarFrame:
    idx_bits = bits_for(prev.object_count)
    deaths = set()
    if prev.object_count:
        for _ in range(br.read_ue()):
            deaths.add(br.read_uint(idx_bits))

    count = br.read_ue()
    if count > MAX_OBJECTS:
        raise BitstreamDecodeError(f"Object count {count} out of range")

    objects, attributes = [], {}
    for _ in range(count):
        if not br.read_bool():
            i = br.read_uint(idx_bits)
            if i >= prev.object_count or i in deaths:
                raise BitstreamDecodeError(f"Reference to dead or missing object index {i}")
            oid = prev.objects[i]
            p = prev.attributes[oid]
            x = p.x + br.read_se()
            y = p.y + br.read_se()
            w = p.w + br.read_se()
            h = p.h + br.read_se()
            b = (angle_to_bin(p.angle, lay.q) + br.read_se()) % lay.bins
            category = p.category
            if br.read_bool():
                cat = br.read_uint(CATEGORY_BITS)
                if cat >= len(Category):
                    raise BitstreamDecodeError(f"Category code {cat} out of range")
                category = Category(cat)
            a = Attributes(x, y, w, h, bin_to_angle(b, lay.q), category)
        else:
            oid, a = _read_full_object(br, lay)
        objects.append(oid)
        attributes[oid] = a

    relations = _read_relations(br, (BACKGROUND_ID,) + tuple(objects))
    return OarFrame(index, tuple(objects), attributes, frozenset(relations))


def _check_integrity(bits: Bitstream) -> Dict[str, int]:
    header = _read_header(bits)
    end = HEADER_BITS + header["payload_bits"]
    if bits.n_bits < end + CRC_BITS:
        raise TruncatedStreamError(
            f"Stream of {bits.n_bits} bits ends before payload and CRC ({end + CRC_BITS})"
        )
    expected = BitReader(bits.data, bits.n_bits, pos=end).read_uint(CRC_BITS)
    if crc16(bits.data, end) != expected:
        raise CrcMismatchError("CRC-16 mismatch")
    return header


def verify_stream(bits: Bitstream) -> bool:
    """True when the header parses and the CRC trailer matches."""
    try:
        _check_integrity(bits)
    except BitstreamDecodeError as e:
        logger.debug(f"Stream rejected: {e}")
        return False
    return True


def decode_gop(bits: Bitstream, reference_payload: bytes = b"") -> GopStream:
    """
    Decode a bitstream produced by encode_gop.

    Raises:
        TruncatedStreamError: stream shorter than announced
        CrcMismatchError: CRC trailer does not match
        BitstreamDecodeError: any other malformed content
    """
    header = _check_integrity(bits)
    width, height, T = header["width"], header["height"], header["gop_length"]
    params = QuantParams(header["q_angle"]) if 1 <= header["q_angle"] <= 16 else None
    if params is None or width == 0 or height == 0:
        raise BitstreamDecodeError("Header fields out of range")

    lay = _Layout(width, height, params)
    end = HEADER_BITS + header["payload_bits"]
    br = BitReader(bits.data, end, pos=HEADER_BITS)

    frames: List[OarFrame] = []
    try:
        for t in range(1, T + 1):
            frame = _read_iframe(br, lay) if t == 1 else _read_pframe(br, frames[-1], t, lay)
            verdict = validate_frame(frame, width, height)
            if not verdict:
                raise BitstreamDecodeError(f"Decoded frame {t} is invalid: {verdict.message}")
            frames.append(frame)
    except TruncatedStreamError as e:
        raise BitstreamDecodeError(f"Payload ends inside frame {len(frames) + 1}") from e

    if br.remaining:
        raise BitstreamDecodeError(f"{br.remaining} payload bits left after frame {T}")

    return GopStream(width, height, T, tuple(frames), reference_payload)


def frame_payload_bits(bits: Bitstream) -> Tuple[int, ...]:
    """Per-frame payload sizes, recovered by parsing when not attached."""
    if bits.frame_bits:
        return bits.frame_bits

    header = _check_integrity(bits)
    params = QuantParams(header["q_angle"])
    lay = _Layout(header["width"], header["height"], params)
    br = BitReader(bits.data, HEADER_BITS + header["payload_bits"], pos=HEADER_BITS)
    sizes, frames = [], []
    for t in range(1, header["gop_length"] + 1):
        start = br.tell()
        frames.append(_read_iframe(br, lay) if t == 1 else _read_pframe(br, frames[-1], t, lay))
        sizes.append(br.tell() - start)
    return tuple(sizes)


def bit_account(bits: Bitstream, fps: float = 25.0) -> BitAccount:
    """
    Rate report: kbps = total_bits / (T / fps) / 1000.

    Args:
        bits: Encoded GoP
        fps: Frame rate used to turn bits into a bit-rate
    """
    if fps <= 0:
        raise ConfigurationError(f"fps must be positive, got {fps}")
    T = bits.gop_length
    sizes = frame_payload_bits(bits)
    return BitAccount(
        total_bits=bits.n_bits,
        header_bits=HEADER_BITS + CRC_BITS,
        frame_payload_bits=sizes,
        bits_per_frame=bits.n_bits / T,
        kbps=calculate_bitrate(bits.n_bits, T / fps),
        fps=fps,
    )


# --------------------------------------------------------------------------
# Container
# --------------------------------------------------------------------------

def write_streams(streams: Iterable[Bitstream]) -> bytes:
    """Pack bitstreams as (4-byte big-endian length, bytes) records."""
    out = bytearray()
    for s in streams:
        data = s.data[:(s.n_bits + 7) // 8]
        out += struct.pack(">I", len(data)) + data
    return bytes(out)


def read_streams(blob: bytes) -> List[Bitstream]:
    """
    Split a container into bitstreams; each stream's exact bit length comes
    from its own header.
    """
    streams, pos = [], 0
    while pos < len(blob):
        if pos + 4 > len(blob):
            raise TruncatedStreamError("Container ends inside a record length")
        (size,) = struct.unpack(">I", blob[pos:pos + 4])
        data = blob[pos + 4:pos + 4 + size]
        if len(data) != size:
            raise TruncatedStreamError("Container ends inside a record")
        pos += 4 + size
        head = Bitstream(data, len(data) * 8)
        header = _read_header(head)
        streams.append(Bitstream(data, HEADER_BITS + header["payload_bits"] + CRC_BITS))
    return streams
