import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from oarcast.channel.awgn import ChannelConfig, awgn, dump_trace, read_trace, unit_noise
from oarcast.channel.ldpc import (
    LdpcConfig, _build_code, _cache_paths, block_count, get_code, ldpc_decode_blocks, ldpc_encode,
    pad_to_blocks
)
from oarcast.channel.modulation import (
    SCHEMES, ModulationScheme, coded_symbol_count, demodulate_llr, hard_decide, modulate,
    theoretical_ber
)
from oarcast.channel.peg import peg_construct, read_alist, write_alist
from oarcast.core.errors import ConfigurationError


SMALL = LdpcConfig(name="small", k=48, n=96)


@pytest.mark.parametrize("name", sorted(SCHEMES))
def test_constellations_have_unit_energy(name):
    scheme = ModulationScheme.from_name(name)
    assert scheme.points.size == scheme.order
    assert np.mean(np.abs(scheme.points) ** 2) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("name", ["4qam", "16qam", "64qam"])
def test_gray_neighbours_differ_in_one_bit(name):
    scheme = ModulationScheme.from_name(name)
    labels = scheme.label_bits()
    pts = scheme.points
    spacing = 2 / scheme.axis_scale
    for i in range(scheme.order):
        neighbours = 0
        for j in range(scheme.order):
            if abs(abs(pts[i] - pts[j]) - spacing) < 1e-9:
                assert np.sum(labels[i] != labels[j]) == 1
                neighbours += 1
        assert 2 <= neighbours <= 4


def test_scheme_names():
    assert ModulationScheme.from_name("QPSK").name == "4qam"
    with pytest.raises(ConfigurationError):
        ModulationScheme.from_name("8psk")


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(SCHEMES))
def test_noiseless_round_trip_of_many_strings(name):
    scheme = ModulationScheme.from_name(name)
    rng = np.random.default_rng(10)
    for length in rng.integers(1, 65, 10_000):
        bits = rng.integers(0, 2, length).astype(np.uint8)
        block = modulate(bits, scheme)
        decided = hard_decide(demodulate_llr(block.symbols, scheme, 0.01, block.gain))
        assert np.array_equal(decided[:length], bits)


@pytest.mark.parametrize("name", sorted(SCHEMES))
def test_noiseless_llrs_recover_bits(name):
    scheme = ModulationScheme.from_name(name)
    bits = np.random.default_rng(1).integers(0, 2, 601).astype(np.uint8)
    block = modulate(bits, scheme)
    assert block.mean_power == pytest.approx(1.0)
    assert block.padding == (-601) % scheme.bits_per_symbol
    llrs = demodulate_llr(block.symbols, scheme, 0.01, block.gain)
    assert (hard_decide(llrs)[:601] == bits).all()


def test_modulate_carries_gain():
    scheme = ModulationScheme.from_name("16qam")
    block = modulate(np.zeros(8, dtype=np.uint8), scheme)
    # All-zero labels map to the outer corner, energy 18/10
    assert block.gain == pytest.approx(math.sqrt(1.8))
    assert np.allclose(np.abs(block.symbols), 1.0)


def test_theoretical_ber():
    bpsk = ModulationScheme.from_name("bpsk")
    qam4 = ModulationScheme.from_name("4qam")
    assert theoretical_ber(bpsk, 0.0) == pytest.approx(0.158655, rel=1e-4)
    assert theoretical_ber(qam4, 5.0) == pytest.approx(theoretical_ber(bpsk, 5.0))
    assert theoretical_ber(qam4, math.inf) == 0.0


@pytest.mark.parametrize("name, snr_db, rel", [("4qam", 4.0, 0.05), ("16qam", 12.0, 0.15)])
def test_uncoded_ber_matches_theory(name, snr_db, rel):
    scheme = ModulationScheme.from_name(name)
    bits = np.random.default_rng(2).integers(0, 2, 200_000).astype(np.uint8)
    tx = modulate(bits, scheme)
    cfg = ChannelConfig(snr_db, seed=3)
    rx = awgn(tx, cfg)
    decided = hard_decide(demodulate_llr(rx.symbols, scheme, cfg.noise_var, tx.gain))[:bits.size]
    ber = np.mean(decided != bits)
    assert ber == pytest.approx(theoretical_ber(scheme, snr_db), rel=rel)


def test_noise_is_coupled_across_snr():
    tx = modulate(np.zeros(400, dtype=np.uint8), ModulationScheme.from_name("4qam"))
    low = awgn(tx, ChannelConfig(0.0, seed=9))
    high = awgn(tx, ChannelConfig(10.0, seed=9))
    n_low = (low.symbols - tx.symbols) / math.sqrt(ChannelConfig(0.0, 9).noise_var)
    n_high = (high.symbols - tx.symbols) / math.sqrt(ChannelConfig(10.0, 9).noise_var)
    assert np.allclose(n_low, n_high)
    assert low.provenance["snr_db"] == 0.0


def test_noise_power_and_real_bpsk_noise():
    noise = unit_noise(100_000, seed=4)
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(1.0, rel=0.02)
    tx = modulate(np.zeros(64, dtype=np.uint8), ModulationScheme.from_name("bpsk"))
    rx = awgn(tx, ChannelConfig(3.0, seed=5))
    assert np.all(rx.symbols.imag == 0.0)


def test_infinite_snr_is_noiseless():
    tx = modulate(np.ones(10, dtype=np.uint8), ModulationScheme.from_name("4qam"))
    rx = awgn(tx, ChannelConfig(math.inf, seed=0))
    assert np.array_equal(rx.symbols, tx.symbols)


def test_trace_round_trip(tmp_path):
    tx = modulate(np.arange(12) % 2, ModulationScheme.from_name("16qam"))
    path = dump_trace(tx, tmp_path / "trace.f32")
    assert path.stat().st_size == tx.size * 8
    assert np.allclose(read_trace(path), tx.symbols, atol=1e-6)


def test_peg_matrix_is_regular_and_survives_alist(tmp_path):
    H = peg_construct(96, 48, column_degree=3, seed=1)
    assert H.shape == (48, 96)
    assert (np.asarray(H.sum(axis=0)).ravel() == 3).all()
    write_alist(H, tmp_path / "h.alist")
    assert (read_alist(tmp_path / "h.alist") != H).nnz == 0


def test_peg_is_seeded():
    a = peg_construct(60, 30, seed=7)
    b = peg_construct(60, 30, seed=7)
    assert (a != b).nnz == 0


def test_encoder_produces_codewords():
    code = get_code(SMALL)
    info = np.random.default_rng(0).integers(0, 2, (5, SMALL.k)).astype(np.uint8)
    words = code.encode(info)
    assert words.shape == (5, SMALL.n)
    assert not code.syndrome(words).any()
    assert np.array_equal(code.extract_info(words), info)


def test_padding_and_block_count():
    assert block_count(0, SMALL) == 1
    assert block_count(97, SMALL) == 3
    blocks, padding = pad_to_blocks(np.ones(50, dtype=np.uint8), SMALL)
    assert blocks.shape == (2, 48)
    assert padding == 46


def _send(bits, cfg, snr_db, seed):
    scheme = ModulationScheme.from_name("bpsk")
    words, _ = ldpc_encode(bits, cfg)
    channel = ChannelConfig(snr_db, seed)
    rx = awgn(modulate(words.ravel(), scheme), channel)
    llrs = demodulate_llr(rx.symbols, scheme, channel.noise_var).reshape(words.shape)
    return ldpc_decode_blocks(llrs, cfg)


@pytest.mark.parametrize("algorithm", ["sum-product", "min-sum"])
def test_decoder_corrects_noise_at_high_snr(algorithm):
    cfg = LdpcConfig(name="small", k=48, n=96, algorithm=algorithm)
    bits = np.random.default_rng(5).integers(0, 2, 20 * 48).astype(np.uint8)
    info, converged, iterations = _send(bits, cfg, 8.0, seed=6)
    assert converged.all()
    assert np.array_equal(info.ravel(), bits)
    assert iterations.max() <= cfg.max_iter


def test_decoder_fails_at_low_snr():
    bits = np.random.default_rng(5).integers(0, 2, 20 * 48).astype(np.uint8)
    _, converged, iterations = _send(bits, SMALL, -10.0, seed=6)
    assert converged.mean() < 0.5
    assert iterations.max() == SMALL.max_iter


def test_clean_llrs_need_no_iterations():
    code = get_code(SMALL)
    word = code.encode(np.zeros(SMALL.k, dtype=np.uint8))
    info, converged, iterations = code.decode(4.0 * (1.0 - 2.0 * word))
    assert converged[0] and iterations[0] == 0
    assert not info.any()


def test_coded_symbol_count_modes():
    cfg = LdpcConfig.from_name("1/3")
    qam4 = ModulationScheme.from_name("4qam")
    assert coded_symbol_count(366, cfg, qam4) == 549
    assert coded_symbol_count(219, cfg, qam4) == 329
    assert coded_symbol_count(366, cfg, qam4, "block") == 2304
    with pytest.raises(ConfigurationError):
        coded_symbol_count(366, cfg, qam4, "exact")


def test_ldpc_config_validation():
    assert LdpcConfig.from_name("2/3").rate == pytest.approx(2 / 3)
    with pytest.raises(ConfigurationError):
        LdpcConfig.from_name("3/4")
    with pytest.raises(ConfigurationError):
        LdpcConfig(name="bad", k=10, n=10)


def test_concurrent_builds_share_one_cached_code(cold_cache):
    cfg = LdpcConfig(name="small", k=48, n=96, peg_seed=11)
    with ThreadPoolExecutor(max_workers=8) as pool:
        codes = list(pool.map(lambda _: get_code(cfg), range(16)))
    assert all(code is codes[0] for code in codes)

    alist, npz = _cache_paths(cfg)
    assert (read_alist(alist) != codes[0].H).nnz == 0
    with np.load(npz) as data:
        assert np.array_equal(data["pivots"], codes[0].pivots)
    assert not list(cold_cache.rglob("*.tmp"))


def test_damaged_encoder_cache_is_rebuilt(cold_cache):
    cfg = LdpcConfig(name="small", k=48, n=96, peg_seed=12)
    reference = get_code(cfg)
    _, npz = _cache_paths(cfg)
    npz.write_bytes(b"PK\x03\x04 not a zip archive")
    _build_code.cache_clear()

    rebuilt = get_code(cfg)
    assert np.array_equal(rebuilt.pivots, reference.pivots)
    with np.load(npz) as data:
        assert np.array_equal(data["pivots"], reference.pivots)
