"""
Command-line interface.

    extract   tracks -> OAR jsonl
    encode    tracks or OAR jsonl -> .oars bitstreams
    decode    .oars -> OAR jsonl
    transmit  .oars or an image through LDPC/QAM/AWGN
    simulate  SNR sweeps -> CSV (+ JSON sidecar, optional plot)
    synth     synthetic scenes (OAR jsonl + rendered frames)
    report    CBR arithmetic or aggregation of run CSVs

Exit status: 0 success, 1 invalid input or configuration, 2 when the share
of failed transmissions exceeds the failure threshold.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .channel.awgn import ChannelConfig
from .channel.ldpc import LdpcConfig, STANDARD_CODES
from .channel.modulation import SCHEMES, ModulationScheme, coded_symbol_count
from .codec.oar_codec import (
    QuantParams, bit_account, decode_gop, encode_gop, quantize_gop, read_streams, write_streams
)
from .core.discovery import BinaryDiscovery
from .core.errors import OarcastError
from .core.pipeline import (
    CBR_MODES, OAR_PATH, TransmissionPlan, cbr, model_from_settings, path_seed,
    run_end_to_end, transmit_oar, transmit_reference
)
from .core.settings import Settings
from .core.sweep import PATHS, SweepManager, SweepSpec, failure_rate, parse_snr_range
from .engines.registry import CODECS, create_codec
from .ingest.oar_io import read_oar_jsonl, write_oar_jsonl
from .ingest.sequence import build_oar_sequence
from .ingest.synthetic import SyntheticSceneSpec, generate_synthetic
from .ingest.tracks import TRACK_FORMATS, parse_tracks, read_mask
from .reconstruct.raster import read_image, write_image
from .report.metrics import metric_psnr
from .report.report import aggregate_reports, write_report
from .report.visualize import plot_waterfall
from .utils.logging import setup_logging
from .utils.paths import get_config_dir
from .utils.progress import format_bits


logger = logging.getLogger(__name__)


EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CHANNEL = 2

# CLI flag -> Settings field
OVERRIDES = {
    "w": "width",
    "h": "height",
    "gop": "gop_length",
    "q": "q_angle",
    "fps": "fps",
    "threads": "max_threads",
    "cbr_mode": "cbr_mode",
    "iters": "bp_iterations",
    "bp": "bp_algorithm",
    "threshold": "failure_threshold",
}


class CliParser(argparse.ArgumentParser):
    """Usage errors exit with status 1; 2 is reserved for channel failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", help="Debug output on the console")
    common.add_argument("--log-file", type=Path, help="Log file (default: config dir)")
    common.add_argument("--save-settings", action="store_true",
                        help="Persist the effective settings as new defaults")
    common.add_argument("--w", type=int, help="Frame width")
    common.add_argument("--h", type=int, help="Frame height")
    common.add_argument("--gop", type=int, help="GoP length T")
    common.add_argument("--q", type=int, help="Angle quantization bits")
    common.add_argument("--fps", type=float, help="Frame rate for bit-rates")
    common.add_argument("--threads", type=int, help="Worker threads")
    common.add_argument("--cbr-mode", choices=CBR_MODES, help="Symbol accounting")
    common.add_argument("--iters", type=int, help="Maximum BP iterations")
    common.add_argument("--bp", choices=("sum-product", "min-sum"), help="BP update rule")
    common.add_argument("--threshold", type=float,
                        help="Failure rate above which the exit status is 2")
    return common


def _channel_args(p: argparse.ArgumentParser, seed_required: bool = True):
    p.add_argument("--ldpc", choices=sorted(STANDARD_CODES), help="LDPC rate of the path")
    p.add_argument("--mod", choices=sorted(SCHEMES), help="Modulation of the path")
    p.add_argument("--seed", type=int, required=seed_required, help="Noise/scene seed")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = CliParser(
        prog="oarcast",
        description="OAR semantic video coding and channel simulation",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    p = sub.add_parser("extract", parents=[common], help="Track file to OAR jsonl")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--format", choices=TRACK_FORMATS, default="jsonl")
    p.add_argument("--mask", type=Path, help="jsonl rectangles in front of the foreground")
    p.add_argument("--zero-angle", action="store_true", help="Force angle 0")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("encode", parents=[common], help="Tracks or OAR jsonl to bitstreams")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--format", choices=TRACK_FORMATS, default="jsonl")
    p.add_argument("--mask", type=Path)
    p.add_argument("--zero-angle", action="store_true")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("decode", parents=[common], help="Bitstreams to OAR jsonl")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("transmit", parents=[common], help="Send bitstreams or an image")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--snr", type=float, required=True, help="Symbol SNR in dB")
    p.add_argument("--codec", choices=CODECS, help="Image codec for image input")
    p.add_argument("--quality", type=int, help="Image codec quality")
    p.add_argument("--trace", type=Path, help="Dump noisy symbols (float32 re/im pairs)")
    _channel_args(p)

    p = sub.add_parser("simulate", parents=[common], help="SNR sweep over synthetic scenes")
    p.add_argument("--snr", default="0:20:5", help="start:stop:step or a comma list")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--path", choices=PATHS, default="oar")
    p.add_argument("--objects", type=int, default=4)
    p.add_argument("--ref-ldpc", choices=sorted(STANDARD_CODES))
    p.add_argument("--ref-mod", choices=sorted(SCHEMES))
    p.add_argument("--codec", choices=CODECS)
    p.add_argument("--experiment", default="simulate")
    p.add_argument("--out", type=Path, default=Path("simulate.csv"))
    p.add_argument("--plot", type=Path, help="Waterfall PNG")
    _channel_args(p)

    p = sub.add_parser("synth", parents=[common], help="Generate synthetic scenes")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--objects", type=int, default=4)
    p.add_argument("--gops", type=int, default=1)
    p.add_argument("--rotation", action="store_true")
    p.add_argument("--scaling", action="store_true")
    p.add_argument("--reconstruct", action="store_true",
                   help="Also write the lossless reconstruction and its PSNR")
    p.add_argument("--out", type=Path, required=True, help="Output directory")

    p = sub.add_parser("report", parents=[common], help="CBR arithmetic or run aggregation")
    p.add_argument("--mode", choices=("cbr", "aggregate"), required=True)
    p.add_argument("--bits", type=int, help="OAR bits per frame")
    p.add_argument("--kbps", type=float, help="OAR bit-rate (with --fps)")
    p.add_argument("--ldpc-rate", choices=sorted(STANDARD_CODES), default="1/3")
    p.add_argument("--mod", choices=sorted(SCHEMES), default="4qam")
    p.add_argument("--runs", type=Path, nargs="+", help="Run CSVs to merge")
    p.add_argument("--out", type=Path, help="Merged CSV")
    p.add_argument("--plot", type=Path)

    return parser


def _settings(args: argparse.Namespace) -> Settings:
    settings = Settings()
    settings.load()
    for flag, name in OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(settings, name, value)
    return settings


def _is_oar_jsonl(path: Path) -> bool:
    """OAR jsonl files start with a GoP header line."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    return "gop" in json.loads(line)
    except (OSError, ValueError):
        return False
    return False


def _load_gops(args: argparse.Namespace, settings: Settings):
    if _is_oar_jsonl(args.input):
        return read_oar_jsonl(args.input)
    records = parse_tracks(args.input, args.format)
    return build_oar_sequence(
        records,
        read_mask(args.mask),
        settings.gop_length,
        settings.width,
        settings.height,
        args.zero_angle,
    )


def cmd_extract(args: argparse.Namespace, settings: Settings) -> int:
    gops = _load_gops(args, settings)
    write_oar_jsonl(gops, args.out)
    print(f"{len(gops)} GoPs of {settings.gop_length} frames -> {args.out}")
    return EXIT_OK


def cmd_encode(args: argparse.Namespace, settings: Settings) -> int:
    gops = _load_gops(args, settings)
    params = QuantParams(settings.q_angle)
    streams = []
    for i, gop in enumerate(gops):
        stream = encode_gop(quantize_gop(gop, params), params)
        account = bit_account(stream, settings.fps)
        logger.info(
            f"GoP {i}: {format_bits(stream.n_bits)}, {account.bits_per_frame:.1f} bits/frame, "
            f"{account.kbps:.2f} kbps"
        )
        streams.append(stream)

    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_bytes(write_streams(streams))
    total = sum(s.n_bits for s in streams)
    print(f"{len(streams)} GoPs, {total} bits -> {args.out}")
    return EXIT_OK


def cmd_decode(args: argparse.Namespace, settings: Settings) -> int:
    streams = read_streams(args.input.read_bytes())
    gops = [decode_gop(s) for s in streams]
    write_oar_jsonl(gops, args.out)
    print(f"{len(gops)} GoPs -> {args.out}")
    return EXIT_OK


def _trace_path(base: Optional[Path], index: int, count: int) -> Optional[Path]:
    if base is None or count == 1:
        return base
    return base.with_name(f"{base.stem}_{index:03d}{base.suffix}")


def cmd_transmit(args: argparse.Namespace, settings: Settings) -> int:
    suffix = args.input.suffix.lower()

    if suffix == ".oars":
        plan = TransmissionPlan.from_settings(
            settings, oar_ldpc=args.ldpc, oar_modulation=args.mod
        )
        streams = read_streams(args.input.read_bytes())
        received, failed = [], 0
        for i, stream in enumerate(streams):
            channel = ChannelConfig(args.snr, path_seed(args.seed, i, OAR_PATH))
            out, report = transmit_oar(
                stream, plan, channel, _trace_path(args.trace, i, len(streams))
            )
            if out is None:
                failed += 1
                logger.warning(f"GoP {i} lost: {report.outcome.reason}")
                continue
            received.append(out)
            logger.info(f"GoP {i}: {report.blocks} blocks, BER {report.ber:.2e}")

        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_bytes(write_streams(received))
        rate = failed / len(streams) if streams else 0.0
        print(f"{len(received)}/{len(streams)} GoPs delivered -> {args.out}")
        return EXIT_CHANNEL if rate > settings.failure_threshold else EXIT_OK

    plan = TransmissionPlan.from_settings(
        settings,
        ref_ldpc=args.ldpc,
        ref_modulation=args.mod,
        ref_codec=args.codec,
        ref_quality=args.quality,
    )
    frame = read_image(args.input)
    codec = create_codec(plan.ref_codec, BinaryDiscovery())
    channel = ChannelConfig(args.snr, args.seed)
    decoded, report, payload = transmit_reference(frame, plan, channel, codec, args.trace)
    height, width = frame.shape[:2]
    ratio = cbr(report.symbols, width, height, 1)
    logger.info(
        f"{codec.name}: {len(payload)} bytes, {report.blocks} blocks, "
        f"{report.failed_blocks} failed, CBR {ratio:.3e}"
    )
    if decoded is None:
        print(f"Frame lost: {report.outcome.reason}")
        return EXIT_CHANNEL
    write_image(decoded, args.out)
    print(f"Frame delivered (PSNR {metric_psnr(decoded, frame):.2f} dB) -> {args.out}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, settings: Settings) -> int:
    overrides = dict(
        ref_ldpc=args.ref_ldpc,
        ref_modulation=args.ref_mod,
        ref_codec=args.codec,
    )
    if args.path == "reference":
        overrides.update(ref_ldpc=args.ldpc or args.ref_ldpc, ref_modulation=args.mod or args.ref_mod)
    else:
        overrides.update(oar_ldpc=args.ldpc, oar_modulation=args.mod)
    plan = TransmissionPlan.from_settings(settings, **overrides)

    spec = SweepSpec(
        experiment=args.experiment,
        snrs=tuple(parse_snr_range(args.snr)),
        trials=args.trials,
        seed=args.seed,
        path=args.path,
        width=settings.width,
        height=settings.height,
        gop_length=settings.gop_length,
        objects=args.objects,
    )
    model = model_from_settings(settings) if args.path == "both" else None
    codec = create_codec(plan.ref_codec, BinaryDiscovery()) if args.path != "oar" else None

    report = SweepManager(settings, plan, spec, model, codec).run()
    write_report(report, args.out)
    if args.plot:
        scheme = plan.reference.scheme if args.path == "reference" else plan.oar.scheme
        plot_waterfall(report.records, args.plot, scheme, title=args.experiment)

    for r in report.sorted_records():
        print(f"SNR {r['snr_db']:6.2f} dB  FER {r['fer']:.4f}  BER {r['ber']:.2e}  CBR {r['cbr']:.3e}")

    rate = failure_rate(report)
    if rate > settings.failure_threshold:
        logger.warning(f"Failure rate {rate:.3f} exceeds threshold {settings.failure_threshold}")
        return EXIT_CHANNEL
    return EXIT_OK


def cmd_synth(args: argparse.Namespace, settings: Settings) -> int:
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)

    gops, renders = [], []
    for i in range(args.gops):
        spec = SyntheticSceneSpec(
            seed=path_seed(args.seed, i) if args.gops > 1 else args.seed,
            object_count=args.objects,
            width=settings.width,
            height=settings.height,
            gop_length=settings.gop_length,
            rotation=args.rotation,
            scaling=args.scaling,
        )
        gop, frames = generate_synthetic(spec)
        gops.append(gop)
        renders.append(frames)
        for t, frame in enumerate(frames, start=1):
            write_image(frame, out / f"gop{i:03d}_frame{t:03d}.png")

    write_oar_jsonl(gops, out / "oar.jsonl")

    if args.reconstruct:
        plan = TransmissionPlan.from_settings(settings, ref_codec="raw")
        results = run_end_to_end(
            gops, plan, None,
            references=[frames[0] for frames in renders],
            model=model_from_settings(settings),
            fps=settings.fps,
            downscale=settings.layout_downscale,
        )
        for result, truth in zip(results, renders):
            for t, frame in enumerate(result.frames, start=1):
                write_image(frame, out / f"gop{result.index:03d}_recon{t:03d}.png")
            psnr = metric_psnr(np.stack(result.frames), np.stack(truth))
            print(f"GoP {result.index}: reconstruction PSNR {psnr:.2f} dB, "
                  f"CBR {result.cbr_total:.3e}")

    print(f"{args.gops} synthetic GoPs -> {out}")
    return EXIT_OK


def report_cbr(
    bits: Optional[int],
    kbps: Optional[float],
    fps: float,
    ldpc_rate: str,
    modulation: str,
    width: int,
    height: int,
    mode: str = "ideal"
) -> float:
    """CBR of one frame's OAR payload; kbps is turned into bits per frame at fps."""
    if (bits is None) == (kbps is None):
        raise OarcastError("Give exactly one of --bits and --kbps")
    if bits is None:
        if fps <= 0:
            raise OarcastError(f"fps must be positive, got {fps}")
        # 3.5 kbps at 25 fps is 140 bits per frame
        bits = math.ceil(kbps * 1000.0 / fps - 1e-9)
    symbols = coded_symbol_count(
        bits, LdpcConfig.from_name(ldpc_rate), ModulationScheme.from_name(modulation), mode
    )
    logger.debug(f"{bits} bits -> {symbols} symbols ({ldpc_rate}, {modulation}, {mode})")
    return cbr(symbols, width, height, 1)


def cmd_report(args: argparse.Namespace, settings: Settings) -> int:
    if args.mode == "cbr":
        value = report_cbr(
            args.bits, args.kbps, settings.fps, args.ldpc_rate, args.mod,
            settings.width, settings.height, settings.cbr_mode,
        )
        print(f"{value:.2e}")
        return EXIT_OK

    if not args.runs or not args.out:
        raise OarcastError("--mode aggregate needs --runs and --out")
    report = aggregate_reports(args.runs)
    write_report(report, args.out)
    if args.plot:
        plot_waterfall(report.records, args.plot, title="aggregate")
    print(f"{len(report.records)} records -> {args.out}")
    return EXIT_OK


COMMANDS = {
    "extract": cmd_extract,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "transmit": cmd_transmit,
    "simulate": cmd_simulate,
    "synth": cmd_synth,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, set up logging, run one subcommand."""
    parser = build_parser()
    args = parser.parse_args(argv)

    log_file = args.log_file or get_config_dir() / "oarcast.log"
    setup_logging(log_file, logging.DEBUG if args.verbose else logging.WARNING)

    try:
        settings = _settings(args)
        status = COMMANDS[args.command](args, settings)
        if args.save_settings:
            settings.save()
        return status
    except OarcastError as e:
        logger.error(str(e))
        return EXIT_INVALID
    except KeyboardInterrupt:
        logger.error("Interrupted")
        return EXIT_INVALID
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
