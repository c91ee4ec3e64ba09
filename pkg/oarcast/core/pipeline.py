"""End-to-end orchestration: reference path, OAR path, CBR accounting."""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from ..channel.awgn import ChannelConfig, awgn, dump_trace
from ..channel.ldpc import LdpcConfig, block_count, ldpc_decode_blocks, ldpc_encode
from ..channel.modulation import (
    ModulationScheme, coded_symbol_count, demodulate_llr, modulate
)
from ..codec.bitio import bits_to_bytes, bytes_to_bits
from ..codec.oar_codec import (
    Bitstream, QuantParams, bit_account, decode_gop, encode_gop, quantize_gop, verify_stream
)
from ..engines.base import ImageCodec
from ..engines.registry import create_codec
from ..graph.weights import GraphModel, load_weights
from ..reconstruct.raster import RasterFrame, raster_from_bytes
from ..reconstruct.video import reconstruct_gop
from .errors import BitstreamDecodeError, ConfigurationError, ContractViolation, PipelineError
from .oar import GopStream
from .settings import Settings


logger = logging.getLogger(__name__)


CBR_MODES = ("ideal", "block")

OAR_PATH = 0
REFERENCE_PATH = 1

# Default foreground multiplier m = sigmoid(a * fg + b)
MULTIPLIER_A = 4.0
MULTIPLIER_B = 0.0


@dataclass(frozen=True)
class PathConfig:
    """Channel code and constellation for one stream."""

    ldpc: LdpcConfig
    scheme: ModulationScheme

    def describe(self) -> str:
        return f"LDPC {self.ldpc.name} ({self.ldpc.k},{self.ldpc.n}) + {self.scheme.name}"


@dataclass(frozen=True)
class TransmissionPlan:
    """Both paths plus the accounting mode; the channel is passed separately."""

    oar: PathConfig
    reference: PathConfig
    ref_codec: str = "raw"
    ref_quality: int = 30
    cbr_mode: str = "ideal"
    q_angle: int = 8

    def __post_init__(self):
        if self.cbr_mode not in CBR_MODES:
            raise ConfigurationError(f"Unknown CBR mode '{self.cbr_mode}'; choose ideal or block")
        QuantParams(self.q_angle)

    @property
    def quant(self) -> QuantParams:
        return QuantParams(self.q_angle)

    @classmethod
    def build(
        cls,
        oar_ldpc: str = "1/3",
        oar_modulation: str = "4qam",
        ref_ldpc: str = "1/2",
        ref_modulation: str = "16qam",
        ref_codec: str = "raw",
        ref_quality: int = 30,
        cbr_mode: str = "ideal",
        bp_iterations: int = 50,
        bp_algorithm: str = "sum-product",
        peg_seed: int = 2024,
        q_angle: int = 8
    ) -> "TransmissionPlan":
        decoder = dict(max_iter=bp_iterations, algorithm=bp_algorithm, peg_seed=peg_seed)
        return cls(
            oar=PathConfig(
                LdpcConfig.from_name(oar_ldpc, **decoder),
                ModulationScheme.from_name(oar_modulation),
            ),
            reference=PathConfig(
                LdpcConfig.from_name(ref_ldpc, **decoder),
                ModulationScheme.from_name(ref_modulation),
            ),
            ref_codec=ref_codec,
            ref_quality=ref_quality,
            cbr_mode=cbr_mode,
            q_angle=q_angle,
        )

    @classmethod
    def from_settings(cls, settings: Settings, **overrides) -> "TransmissionPlan":
        values = dict(
            oar_ldpc=settings.oar_ldpc,
            oar_modulation=settings.oar_modulation,
            ref_ldpc=settings.ref_ldpc,
            ref_modulation=settings.ref_modulation,
            ref_codec=settings.ref_codec,
            ref_quality=settings.ref_quality,
            cbr_mode=settings.cbr_mode,
            bp_iterations=settings.bp_iterations,
            bp_algorithm=settings.bp_algorithm,
            peg_seed=settings.peg_seed,
            q_angle=settings.q_angle,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.build(**values)


@dataclass(frozen=True)
class TransmissionOutcome:
    """Success flag of one path; failures carry a short reason."""

    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


SUCCESS = TransmissionOutcome(True)


@dataclass(frozen=True)
class PathReport:
    """What one stream cost and how it fared."""

    outcome: TransmissionOutcome
    info_bits: int
    symbols: int
    channel_symbols: int
    blocks: int
    failed_blocks: int = 0
    bit_errors: int = 0
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.outcome.ok

    @property
    def ber(self) -> float:
        """Information bit error rate before the CRC check."""
        return self.bit_errors / self.info_bits if self.info_bits else 0.0


@dataclass
class TransmissionResult:
    """One GoP after both paths and, when both succeed, reconstruction."""

    index: int
    oar: PathReport
    reference: PathReport
    gop: Optional[GopStream]
    reference_frame: Optional[RasterFrame]
    frames: Optional[List[RasterFrame]]
    kbps: float
    cbr_oar: float
    cbr_reference: float

    @property
    def ok(self) -> bool:
        return self.oar.ok and self.reference.ok

    @property
    def cbr_total(self) -> float:
        return self.cbr_oar + self.cbr_reference


def cbr(symbols: int, width: int, height: int, frames: int = 1) -> float:
    """
    Channel bandwidth ratio: symbols / (width * height * 3 * frames).

    Raises:
        ConfigurationError: empty source or negative symbol count
    """
    source = width * height * 3 * frames
    if source <= 0:
        raise ConfigurationError(f"Source size is zero ({width}x{height}x3 x {frames} frames)")
    if symbols < 0:
        raise ConfigurationError(f"Symbol count must be non-negative, got {symbols}")
    return symbols / source


def path_seed(seed: int, *keys: int) -> int:
    """Independent noise seed for a (GoP, path, ...) key under one run seed."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def send_bits(
    bits: np.ndarray,
    path: PathConfig,
    channel: Optional[ChannelConfig],
    cbr_mode: str = "ideal",
    trace: Optional[Union[str, Path]] = None
) -> Tuple[np.ndarray, PathReport]:
    """
    Carry a bit string over one path.

    Pads to LDPC blocks, encodes, modulates with unit power, adds noise,
    computes LLRs and decodes every block. channel=None delivers the bits
    untouched and only accounts for them.

    Args:
        bits: 0/1 information bits
        path: Code and constellation
        channel: AWGN settings, or None for lossless delivery
        cbr_mode: "ideal" or "block" symbol accounting
        trace: Optional file receiving the noisy symbols (see dump_trace)

    Returns:
        (received bits, report); failure iff some block did not converge
    """
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    cfg, scheme = path.ldpc, path.scheme
    symbols = coded_symbol_count(bits.size, cfg, scheme, cbr_mode)
    physical = coded_symbol_count(bits.size, cfg, scheme, "block")
    blocks = block_count(bits.size, cfg)

    if channel is None:
        return bits.copy(), PathReport(SUCCESS, int(bits.size), symbols, physical, blocks)

    codewords, _ = ldpc_encode(bits, cfg)
    tx = modulate(codewords.ravel(), scheme, {
        "ldpc": cfg.name,
        "scheme": scheme.name,
    })
    rx = awgn(tx, channel)
    if trace is not None:
        dump_trace(rx, trace)
    llrs = demodulate_llr(rx.symbols, scheme, channel.noise_var, tx.gain)
    llrs = llrs[:codewords.size].reshape(codewords.shape)

    info, converged, iterations = ldpc_decode_blocks(llrs, cfg)
    received = info.ravel()[:bits.size].astype(np.uint8)
    failed = int(np.count_nonzero(~converged))
    errors = int(np.count_nonzero(received != bits))

    outcome = SUCCESS if failed == 0 else TransmissionOutcome(
        False, f"{failed}/{blocks} LDPC blocks did not converge"
    )
    report = PathReport(
        outcome=outcome,
        info_bits=int(bits.size),
        symbols=symbols,
        channel_symbols=tx.size,
        blocks=blocks,
        failed_blocks=failed,
        bit_errors=errors,
        iterations=int(iterations.max()) if iterations.size else 0,
    )
    return received, report


def transmit_oar(
    bits: Bitstream,
    plan: TransmissionPlan,
    channel: Optional[ChannelConfig],
    trace: Optional[Union[str, Path]] = None
) -> Tuple[Optional[Bitstream], PathReport]:
    """
    Send an OAR bitstream over the OAR path.

    Returns:
        (received bitstream or None, report); failure iff an LDPC block
        fails or the CRC of the received stream does not match
    """
    received, report = send_bits(bits.to_bits(), plan.oar, channel, plan.cbr_mode, trace)
    if not report.ok:
        return None, report

    stream = Bitstream.from_bits(received)
    if not verify_stream(stream):
        report = replace(report, outcome=TransmissionOutcome(False, "CRC mismatch after decoding"))
        return None, report
    return stream, report


def transmit_reference(
    frame: RasterFrame,
    plan: TransmissionPlan,
    channel: Optional[ChannelConfig],
    codec: Optional[ImageCodec] = None,
    trace: Optional[Union[str, Path]] = None
) -> Tuple[Optional[RasterFrame], PathReport, bytes]:
    """
    Code a reference frame with the image codec and send it over the
    reference path. Any failed block fails the whole frame.

    Raises:
        ConfigurationError: the codec plug-in cannot be resolved

    Returns:
        (decoded frame or None, report, codec payload)
    """
    codec = codec or create_codec(plan.ref_codec)
    height, width = frame.shape[:2]

    payload = codec.encode(frame, plan.ref_quality)
    if payload is None:
        failure = TransmissionOutcome(False, f"{codec.name} encoder failed")
        return None, PathReport(failure, 0, 0, 0, 0), b""

    received, report = send_bits(
        bytes_to_bits(payload, len(payload) * 8), plan.reference, channel, plan.cbr_mode, trace
    )
    if not report.ok:
        return None, report, payload

    decoded = codec.decode(bits_to_bytes(received), width, height)
    if decoded is None:
        report = replace(
            report, outcome=TransmissionOutcome(False, f"{codec.name} decoder rejected the payload")
        )
    return decoded, report, payload


def foreground_multiplier(layout: np.ndarray, a: float = MULTIPLIER_A, b: float = MULTIPLIER_B) -> np.ndarray:
    """m = sigmoid(a * fg + b) as H' x W' x 1, fg = 1 where the layout is non-zero."""
    fg = np.any(np.asarray(layout) != 0, axis=-1).astype(np.float64)
    return expit(a * fg + b)[..., None]


def oar_modulate(feature_map: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    """
    Pointwise product of a feature map with a multiplier map.

    Raises:
        ContractViolation: multiplier outside (0, 1) or shapes that do not
        broadcast onto the feature map
    """
    features = np.asarray(feature_map, dtype=np.float64)
    m = np.asarray(multiplier, dtype=np.float64)
    if m.size and not np.all((m > 0.0) & (m < 1.0)):
        raise ContractViolation("Multiplier values must lie in the open interval (0, 1)")
    try:
        shape = np.broadcast_shapes(features.shape, m.shape)
    except ValueError as e:
        raise ContractViolation(f"Multiplier {m.shape} does not broadcast to {features.shape}") from e
    if shape != features.shape:
        raise ContractViolation(f"Multiplier {m.shape} would grow features {features.shape}")
    return features * m


def model_from_settings(settings: Settings) -> GraphModel:
    """Load the configured weights file or generate seeded weights."""
    if settings.weights_path:
        return load_weights(settings.weights_path)
    return GraphModel.generate(
        seed=settings.graph_seed,
        q_angle=settings.q_angle,
        d_c=settings.d_c,
        d_theta=settings.d_theta,
        d_r=settings.d_r,
        feature_dim=settings.feature_dim,
    )


def _reference_of(gop: GopStream, index: int, references: Optional[Sequence[RasterFrame]]) -> RasterFrame:
    if references is not None:
        return references[index]
    if len(gop.reference_payload) == gop.width * gop.height * 3:
        return raster_from_bytes(gop.reference_payload, gop.width, gop.height)
    raise PipelineError(f"GoP {index} carries no raw reference frame and none was given")


def run_gop(
    index: int,
    gop: GopStream,
    reference: RasterFrame,
    plan: TransmissionPlan,
    channel: Optional[ChannelConfig],
    model: Optional[GraphModel] = None,
    codec: Optional[ImageCodec] = None,
    fps: float = 25.0,
    downscale: int = 1,
    reconstruct: bool = True
) -> TransmissionResult:
    """Both paths for one GoP, then reconstruction when both succeed."""
    codec = codec or create_codec(plan.ref_codec)
    params = plan.quant
    bits = encode_gop(quantize_gop(gop, params), params)
    account = bit_account(bits, fps)

    def channel_for(path: int) -> Optional[ChannelConfig]:
        if channel is None:
            return None
        return ChannelConfig(channel.snr_db, path_seed(channel.seed, index, path))

    received, oar_report = transmit_oar(bits, plan, channel_for(OAR_PATH))
    ref_frame, ref_report, payload = transmit_reference(
        reference, plan, channel_for(REFERENCE_PATH), codec
    )

    decoded = None
    if received is not None:
        try:
            decoded = decode_gop(received, payload)
        except BitstreamDecodeError as e:
            logger.warning(f"GoP {index}: stream passed the CRC but did not decode: {e}")
            oar_report = replace(oar_report, outcome=TransmissionOutcome(False, f"decode error: {e}"))

    frames = None
    if reconstruct and decoded is not None and ref_frame is not None:
        frames = reconstruct_gop(decoded, ref_frame, model, downscale)

    T = gop.gop_length
    result = TransmissionResult(
        index=index,
        oar=oar_report,
        reference=ref_report,
        gop=decoded,
        reference_frame=ref_frame,
        frames=frames,
        kbps=account.kbps,
        cbr_oar=cbr(oar_report.symbols, gop.width, gop.height, T),
        cbr_reference=cbr(ref_report.symbols, gop.width, gop.height, T),
    )

    status = "ok" if result.ok else (oar_report.outcome.reason or ref_report.outcome.reason)
    logger.debug(
        f"GoP {index}: {bits.n_bits} OAR bits, CBR {result.cbr_total:.3e}, {status}"
    )
    return result


def run_end_to_end(
    gops: Sequence[GopStream],
    plan: TransmissionPlan,
    channel: Optional[ChannelConfig],
    references: Optional[Sequence[RasterFrame]] = None,
    model: Optional[GraphModel] = None,
    codec: Optional[ImageCodec] = None,
    fps: float = 25.0,
    downscale: int = 1,
    reconstruct: bool = True
) -> List[TransmissionResult]:
    """
    Transmit and reconstruct every GoP.

    Args:
        gops: OAR GoPs (unquantized; the plan's q_angle quantizes them)
        plan: Path configuration
        channel: AWGN channel, or None for lossless delivery (coding mode)
        references: Source reference frames, one per GoP; defaults to the
            raw reference payload carried by each GoP
        model: Graph model for layouts
        codec: Image codec instance overriding plan.ref_codec
        fps: Frame rate for kbps
        downscale: Layout downscale factor
        reconstruct: Skip reconstruction when only rates and failures matter

    Returns:
        One TransmissionResult per GoP; failed GoPs have frames=None
    """
    if references is not None and len(references) != len(gops):
        raise PipelineError(f"{len(references)} reference frames for {len(gops)} GoPs")

    codec = codec or create_codec(plan.ref_codec)
    where = "lossless" if channel is None else f"SNR {channel.snr_db:g} dB"
    logger.info(
        f"Running {len(gops)} GoPs over {where}: OAR {plan.oar.describe()}, "
        f"reference {codec.name} + {plan.reference.describe()}"
    )

    results = []
    for index, gop in enumerate(gops):
        reference = _reference_of(gop, index, references)
        results.append(run_gop(
            index, gop, reference, plan, channel, model, codec, fps, downscale, reconstruct
        ))

    failed = sum(1 for r in results if not r.ok)
    if failed:
        logger.warning(f"{failed}/{len(results)} GoPs failed")
    return results
