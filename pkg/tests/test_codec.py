import numpy as np
import pytest

from oarcast.codec.bitio import BitReader, BitWriter, bits_for, crc16
from oarcast.codec.oar_codec import (
    CRC_BITS, HEADER_BITS, Bitstream, QuantParams, angle_to_bin, bit_account, decode_gop,
    encode_gop, frame_payload_bits, quantize_gop, read_streams, verify_stream, write_streams
)
from oarcast.core.errors import (
    BitstreamDecodeError, CapacityError, ConfigurationError, CrcMismatchError, TruncatedStreamError
)
from oarcast.core.oar import Category, GopStream, make_frame

from conftest import attrs, frame_of


FOREGROUND = (Category.CAR, Category.BUS, Category.VAN, Category.OTHERS)


def random_gop(seed: int) -> GopStream:
    """Seeded GoP with births, deaths, category changes and off-grid angles."""
    rng = np.random.default_rng(seed)
    width, height = int(rng.integers(16, 513)), int(rng.integers(16, 513))
    length = int(rng.integers(1, 16))
    frames = []
    for t in range(1, length + 1):
        boxes = {}
        for oid in range(1, 8):
            if rng.random() < 0.35:
                continue
            w = int(rng.integers(1, width // 2 + 1))
            h = int(rng.integers(1, height // 2 + 1))
            boxes[oid] = attrs(
                int(rng.integers(0, width - w + 1)), int(rng.integers(0, height - h + 1)), w, h,
                float(rng.uniform(0.0, 360.0)), FOREGROUND[int(rng.integers(len(FOREGROUND)))]
            )
        frames.append(frame_of(t, boxes))
    return GopStream(width, height, length, tuple(frames))


def test_exp_golomb_codes():
    bw = BitWriter()
    bw.write_ue(0)
    bw.write_ue(3)
    bw.write_se(-2)
    bw.write_se(1)
    bw.write_uint(5, 3)
    assert bw.tell() == 1 + 5 + 5 + 3 + 3

    br = BitReader(bw.getvalue(), bw.tell())
    assert br.read_ue() == 0
    assert br.read_ue() == 3
    assert br.read_se() == -2
    assert br.read_se() == 1
    assert br.read_uint(3) == 5
    assert br.remaining == 0
    with pytest.raises(TruncatedStreamError):
        br.read_uint(1)


def test_writer_packs_msb_first():
    bw = BitWriter()
    bw.write_uint(5, 3)
    bw.write_bool(True)
    assert bw.getvalue() == b"\xb0"
    bw.write_uint(0x3FF, 10)
    assert bw.tell() == 14
    assert bw.getvalue() == b"\xbf\xfc"
    bw.write_uint(0, 2)
    assert bw.getvalue() == b"\xbf\xfc"


def test_bits_for_and_crc():
    assert [bits_for(n) for n in (0, 1, 2, 3, 4, 5, 256)] == [0, 0, 1, 2, 2, 3, 8]
    assert crc16(b"123456789", 72) == 0x29B1


def test_write_uint_rejects_overflow():
    with pytest.raises(ValueError):
        BitWriter().write_uint(8, 3)


def test_quant_params_range():
    assert QuantParams(8).angle_bins == 256
    with pytest.raises(ConfigurationError):
        QuantParams(0)


def test_angle_bins_wrap():
    assert angle_to_bin(0.0, 8) == 0
    assert angle_to_bin(359.9, 8) == 0
    assert angle_to_bin(90.0, 2) == 1


def test_round_trip_is_exact_on_grid_angles(two_cars_gop):
    bits = encode_gop(two_cars_gop)
    assert decode_gop(bits) == two_cars_gop
    assert verify_stream(bits)


def test_decoder_returns_quantized_gop(two_cars_gop):
    params = QuantParams(3)
    bits = encode_gop(two_cars_gop, params)
    decoded = decode_gop(bits)
    assert decoded == quantize_gop(two_cars_gop, params)
    assert decoded.frames[2].attributes[1].angle == 0.0


def test_reference_payload_is_attached(two_cars_gop):
    decoded = decode_gop(encode_gop(two_cars_gop), b"\x01\x02")
    assert decoded.reference_payload == b"\x01\x02"


def test_synthetic_scenes_round_trip(synthetic_scene):
    gop, _ = synthetic_scene
    params = QuantParams(8)
    decoded = decode_gop(encode_gop(gop, params))
    assert decoded.frames == quantize_gop(gop, params).frames


def test_p_frames_are_cheaper_for_still_objects(still_scene):
    gop, _ = still_scene
    sizes = encode_gop(gop).frame_bits
    assert len(sizes) == 3
    assert sizes[1] < sizes[0]
    assert sizes[1] == sizes[2]


def test_bit_account(two_cars_gop):
    bits = encode_gop(two_cars_gop)
    account = bit_account(bits, fps=25.0)
    assert account.header_bits == HEADER_BITS + CRC_BITS
    assert sum(account.frame_payload_bits) + account.header_bits == bits.n_bits
    assert account.bits_per_frame == pytest.approx(bits.n_bits / 3)
    assert account.kbps == pytest.approx(bits.n_bits / (3 / 25.0) / 1000.0)
    with pytest.raises(ConfigurationError):
        bit_account(bits, fps=0)


def test_payload_sizes_recovered_by_parsing(two_cars_gop):
    bits = encode_gop(two_cars_gop)
    bare = Bitstream(bits.data, bits.n_bits)
    assert frame_payload_bits(bare) == bits.frame_bits


def test_flipped_bit_fails_crc(two_cars_gop):
    bits = encode_gop(two_cars_gop)
    raw = bits.to_bits()
    raw[HEADER_BITS + 3] ^= 1
    damaged = Bitstream.from_bits(raw)
    assert not verify_stream(damaged)
    with pytest.raises(CrcMismatchError):
        decode_gop(damaged)


def test_truncated_stream(two_cars_gop):
    bits = encode_gop(two_cars_gop)
    with pytest.raises(TruncatedStreamError):
        decode_gop(Bitstream(bits.data, bits.n_bits - 8))
    with pytest.raises(TruncatedStreamError):
        decode_gop(Bitstream(b"OA", 16))


def test_bad_magic():
    with pytest.raises(BitstreamDecodeError):
        decode_gop(Bitstream(bytes(32), 256))


def test_canvas_beyond_header_fields():
    gop = GopStream(1 << 16, 8, 2, (make_frame(1, {}), make_frame(2, {})))
    with pytest.raises(CapacityError):
        encode_gop(gop)


def test_empty_frames_encode():
    gop = GopStream(16, 16, 2, (make_frame(1, {}), make_frame(2, {})))
    assert decode_gop(encode_gop(gop)) == gop


def test_stream_container(two_cars_gop, synthetic_scene):
    streams = [encode_gop(two_cars_gop), encode_gop(synthetic_scene[0])]
    assert read_streams(write_streams(streams)) == streams
    with pytest.raises(TruncatedStreamError):
        read_streams(write_streams(streams)[:-1])


def test_random_gops_round_trip_to_their_quantization():
    for seed in range(500):
        gop = random_gop(seed)
        params = QuantParams(1 + seed % 8)
        assert decode_gop(encode_gop(gop, params)) == quantize_gop(gop, params), f"seed {seed}"


def test_bitstream_is_deterministic():
    for seed in range(20):
        gop = random_gop(seed)
        shuffled = GopStream(gop.width, gop.height, gop.gop_length, tuple(
            make_frame(f.frame_index, dict(reversed(list(f.attributes.items()))), set(f.relations))
            for f in gop.frames
        ))
        first = encode_gop(gop)
        assert encode_gop(gop).data == first.data
        assert encode_gop(shuffled).data == first.data


def test_adding_an_object_never_decreases_bits():
    for seed in range(50):
        gop = random_gop(seed)
        extra = attrs(0, 0, min(gop.width, 9), min(gop.height, 7), 45.0, Category.VAN)
        grown = GopStream(gop.width, gop.height, gop.gop_length, tuple(
            frame_of(f.frame_index, {**f.attributes, 8: extra}) for f in gop.frames
        ))
        assert encode_gop(grown).n_bits >= encode_gop(gop).n_bits, f"seed {seed}"
