import math

import numpy as np
import pytest

from oarcast.channel.awgn import ChannelConfig
from oarcast.channel.ldpc import LdpcConfig
from oarcast.channel.modulation import ModulationScheme, coded_symbol_count
from oarcast.codec.oar_codec import encode_gop
from oarcast.core.errors import ConfigurationError, ContractViolation, PipelineError
from oarcast.core.pipeline import (
    PathConfig, TransmissionPlan, cbr, foreground_multiplier, model_from_settings, oar_modulate,
    path_seed, run_end_to_end, send_bits, transmit_oar, transmit_reference
)
from oarcast.core.settings import Settings
from oarcast.engines.builtin import RawCodec


SMALL = LdpcConfig(name="small", k=48, n=96)


@pytest.fixture
def plan():
    return TransmissionPlan(
        oar=PathConfig(SMALL, ModulationScheme.from_name("4qam")),
        reference=PathConfig(SMALL, ModulationScheme.from_name("16qam")),
    )


class FailingCodec(RawCodec):
    name = "failing"

    def encode(self, frame, quality=30):
        return None


@pytest.mark.parametrize("bits, expected", [(366, 6.98e-4), (219, 4.18e-4), (140, 2.67e-4), (88, 1.68e-4)])
def test_oar_cbr_at_512(bits, expected):
    symbols = coded_symbol_count(bits, LdpcConfig.from_name("1/3"), ModulationScheme.from_name("4qam"))
    assert cbr(symbols, 512, 512) == pytest.approx(expected, rel=5e-3)


def test_raw_reference_cbr_is_four():
    bits = 512 * 512 * 3 * 8
    symbols = coded_symbol_count(bits, LdpcConfig.from_name("1/2"), ModulationScheme.from_name("16qam"))
    assert cbr(symbols, 512, 512) == 4.0


def test_cbr_rejects_empty_source():
    with pytest.raises(ConfigurationError):
        cbr(10, 0, 512)
    with pytest.raises(ConfigurationError):
        cbr(-1, 4, 4)


def test_path_seed_is_stable_and_keyed():
    assert path_seed(1, 0, 0) == path_seed(1, 0, 0)
    assert path_seed(1, 0, 0) != path_seed(1, 0, 1)
    assert path_seed(1, 0, 0) != path_seed(2, 0, 0)


def test_lossless_delivery_only_accounts(plan):
    bits = np.random.default_rng(0).integers(0, 2, 100).astype(np.uint8)
    received, report = send_bits(bits, plan.oar, None)
    assert np.array_equal(received, bits)
    assert report.ok and report.blocks == 3
    assert report.symbols == coded_symbol_count(100, SMALL, plan.oar.scheme)
    assert report.channel_symbols == 3 * 96 // 2


def test_send_bits_over_noise(plan, tmp_path):
    bits = np.random.default_rng(1).integers(0, 2, 480).astype(np.uint8)
    received, report = send_bits(bits, plan.oar, ChannelConfig(12.0, seed=2), trace=tmp_path / "rx.f32")
    assert report.ok
    assert np.array_equal(received, bits)
    assert report.ber == 0.0
    assert (tmp_path / "rx.f32").stat().st_size == report.channel_symbols * 8

    _, report = send_bits(bits, plan.oar, ChannelConfig(-10.0, seed=2))
    assert not report.ok
    assert report.failed_blocks > 0
    assert "did not converge" in report.outcome.reason


def test_transmit_oar_recovers_stream(plan, two_cars_gop):
    bits = encode_gop(two_cars_gop)
    stream, report = transmit_oar(bits, plan, ChannelConfig(15.0, seed=3))
    assert report.ok
    assert stream.to_bits().tolist() == bits.to_bits().tolist()

    stream, report = transmit_oar(bits, plan, ChannelConfig(-10.0, seed=3))
    assert stream is None and not report.ok


def test_transmit_reference(plan):
    frame = np.random.default_rng(4).integers(0, 256, (8, 10, 3)).astype(np.uint8)
    decoded, report, payload = transmit_reference(frame, plan, ChannelConfig(25.0, seed=5), RawCodec())
    assert report.ok
    assert len(payload) == 240
    assert np.array_equal(decoded, frame)

    decoded, report, _ = transmit_reference(frame, plan, ChannelConfig(-10.0, seed=5), RawCodec())
    assert decoded is None and not report.ok


def test_encoder_failure_is_reported(plan):
    frame = np.zeros((4, 4, 3), dtype=np.uint8)
    decoded, report, payload = transmit_reference(frame, plan, None, FailingCodec())
    assert decoded is None
    assert not report.ok and "encoder failed" in report.outcome.reason
    assert payload == b""


def test_lossless_end_to_end(plan, synthetic_scene):
    gop, renders = synthetic_scene
    (result,) = run_end_to_end([gop], plan, None, codec=RawCodec())
    assert result.ok
    assert len(result.frames) == gop.gop_length
    assert np.array_equal(result.frames[0], renders[0])
    assert result.gop.frames[0].objects == gop.frames[0].objects

    ref_symbols = coded_symbol_count(48 * 40 * 3 * 8, SMALL, plan.reference.scheme)
    assert result.cbr_reference == pytest.approx(cbr(ref_symbols, 48, 40, 4))
    assert result.cbr_total == pytest.approx(result.cbr_oar + result.cbr_reference)
    assert result.kbps > 0


def test_noisy_end_to_end_at_high_snr(plan, still_scene):
    gop, renders = still_scene
    results = run_end_to_end([gop, gop], plan, ChannelConfig(25.0, seed=6), codec=RawCodec())
    assert all(r.ok for r in results)
    for got, want in zip(results[1].frames, renders):
        assert np.array_equal(got, want)


def test_end_to_end_failure_keeps_accounting(plan, still_scene):
    gop, _ = still_scene
    (result,) = run_end_to_end([gop], plan, ChannelConfig(-10.0, seed=6), codec=RawCodec())
    assert not result.ok
    assert result.frames is None
    assert result.cbr_oar > 0


def test_reference_count_must_match(plan, still_scene):
    gop, renders = still_scene
    with pytest.raises(PipelineError):
        run_end_to_end([gop], plan, None, references=renders[:2], codec=RawCodec())


def test_foreground_multiplier_and_modulation():
    layout = np.zeros((2, 2, 3))
    layout[0, 0, 1] = 0.5
    m = foreground_multiplier(layout)
    assert m.shape == (2, 2, 1)
    assert m[0, 0, 0] == pytest.approx(1.0 / (1.0 + math.exp(-4.0)))
    assert m[1, 1, 0] == pytest.approx(0.5)

    features = np.ones((2, 2, 3))
    assert np.allclose(oar_modulate(features, m)[1, 1], 0.5)
    with pytest.raises(ContractViolation):
        oar_modulate(features, np.ones((2, 2, 1)))
    with pytest.raises(ContractViolation):
        oar_modulate(features, np.full((2, 2, 2, 1), 0.5))


def test_plan_from_settings():
    settings = Settings()
    plan = TransmissionPlan.from_settings(settings, oar_modulation="16qam", cbr_mode=None)
    assert plan.oar.scheme.name == "16qam"
    assert plan.oar.ldpc.name == "1/3"
    assert plan.reference.ldpc.rate == pytest.approx(0.5)
    assert plan.cbr_mode == "ideal"
    with pytest.raises(ConfigurationError):
        TransmissionPlan.from_settings(settings, cbr_mode="exact")


def test_model_from_settings():
    settings = Settings()
    settings.d_c, settings.d_theta, settings.d_r, settings.feature_dim = 4, 4, 2, 3
    model = model_from_settings(settings)
    assert model.tables.node_dim == 8
    assert model.gcn.feature_dim == 3
