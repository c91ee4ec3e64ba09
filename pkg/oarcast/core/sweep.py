"""SNR sweeps and Monte Carlo trials on a worker pool."""

import logging
import math
from concurrent.futures import Future, ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..channel.awgn import ChannelConfig
from ..channel.modulation import theoretical_ber
from ..codec.oar_codec import decode_gop, encode_gop, quantize_gop, bit_account
from ..engines.base import ImageCodec
from ..engines.registry import create_codec
from ..graph.weights import GraphModel
from ..ingest.synthetic import SyntheticSceneSpec, generate_synthetic
from ..report.metrics import OarFidelity, metric_oar_fidelity, metric_ssim
from ..report.report import Report
from ..utils.progress import TimeEstimator, format_time
from .errors import BitstreamDecodeError, ConfigurationError, PipelineError
from .pipeline import (
    OAR_PATH, REFERENCE_PATH, TransmissionPlan, cbr, path_seed, run_gop,
    transmit_oar, transmit_reference
)
from .settings import Settings


logger = logging.getLogger(__name__)


PATHS = ("oar", "reference", "both")


def parse_snr_range(text: str) -> List[float]:
    """
    "0:20:5" -> [0, 5, 10, 15, 20]; "3" -> [3]; "0,4,9" -> [0, 4, 9].
    """
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1.0)
            start, stop, step = parts
            if step <= 0:
                raise ValueError("step must be positive")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [start + i * step for i in range(max(count, 0))]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as e:
        raise ConfigurationError(f"Invalid SNR range '{text}': {e}") from e


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep: SNR points, trials per point and the scene family."""

    experiment: str
    snrs: Sequence[float]
    trials: int
    seed: int
    path: str = "oar"
    width: int = 512
    height: int = 512
    gop_length: int = 15
    objects: int = 4

    def __post_init__(self):
        if self.path not in PATHS:
            raise ConfigurationError(f"Unknown path '{self.path}'; choose from {', '.join(PATHS)}")
        if self.trials < 1:
            raise ConfigurationError(f"Trials must be >= 1, got {self.trials}")
        if not self.snrs:
            raise ConfigurationError("Sweep needs at least one SNR point")


class SweepJob:
    """One SNR point."""

    def __init__(self, snr_db: float):
        self.snr_db = snr_db
        self.status = "pending"
        self.record: Optional[Dict[str, object]] = None
        self.error: Optional[str] = None


@dataclass
class _Tally:
    failures: int = 0
    bit_errors: int = 0
    info_bits: int = 0
    cbr: float = 0.0
    cbr_oar: float = 0.0
    cbr_reference: float = 0.0
    kbps: float = 0.0
    squared_error: float = 0.0
    compared: int = 0
    ssim: float = 0.0
    ssim_count: int = 0
    box_iou: float = 0.0
    category_accuracy: float = 0.0
    angle_mae: float = 0.0
    relation_f1: float = 0.0
    fidelity_count: int = 0

    def add_fidelity(self, fid: OarFidelity):
        self.box_iou += fid.box_iou
        self.category_accuracy += fid.category_accuracy
        self.angle_mae += fid.angle_mae
        self.relation_f1 += fid.relation_f1
        self.fidelity_count += 1

    def add_pixels(self, decoded: np.ndarray, truth: np.ndarray):
        diff = np.asarray(decoded, dtype=np.float64) - np.asarray(truth, dtype=np.float64)
        self.squared_error += float(np.sum(diff ** 2))
        self.compared += diff.size


class SweepManager:
    """Run every SNR point of a sweep on a thread pool."""

    def __init__(
        self,
        settings: Settings,
        plan: TransmissionPlan,
        spec: SweepSpec,
        model: Optional[GraphModel] = None,
        codec: Optional[ImageCodec] = None
    ):
        self.settings = settings
        self.plan = plan
        self.spec = spec
        self.model = model
        self.codec = codec
        if spec.path != "oar" and self.codec is None:
            self.codec = create_codec(plan.ref_codec)

        self.jobs: List[SweepJob] = [SweepJob(s) for s in spec.snrs]
        self.executor: Optional[ThreadPoolExecutor] = None
        self.should_cancel = False
        self.error_count = 0

    def run(self) -> Report:
        """Run all points; records come back sorted by SNR."""
        self.should_cancel = False
        total = len(self.jobs)
        estimator = TimeEstimator(total)
        estimator.start()

        logger.info(
            f"Sweep '{self.spec.experiment}': {total} SNR points x {self.spec.trials} trials "
            f"on the {self.spec.path} path"
        )

        max_workers = max(1, min(self.settings.max_threads, total))
        self.executor = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="sweep")
        try:
            futures: Dict[Future, SweepJob] = {
                self.executor.submit(self._process_job, job): job for job in self.jobs
            }
            done = 0
            for future in as_completed(futures):
                job = futures[future]
                try:
                    if future.cancelled():
                        job.status = "cancelled"
                    else:
                        future.result()
                except Exception as e:
                    logger.exception(f"SNR point {job.snr_db:g} dB failed: {e}")
                    job.status = "error"
                    job.error = str(e)
                    self.error_count += 1
                done += 1
                elapsed, remaining = estimator.step(done)
                logger.info(
                    f"[{done}/{total}] SNR {job.snr_db:g} dB {job.status}; "
                    f"elapsed {format_time(elapsed.total_seconds())}, "
                    f"ETA {format_time(remaining.total_seconds())}"
                )
        except KeyboardInterrupt:
            logger.warning("Sweep interrupted; waiting for running trials to stop")
            self.cancel()
            raise
        finally:
            self.executor.shutdown(wait=True)
            self.executor = None

        errors = [j for j in self.jobs if j.status == "error"]
        if errors:
            raise PipelineError(f"{len(errors)} SNR points failed; first: {errors[0].error}")

        cancelled = sum(j.status == "cancelled" for j in self.jobs)
        if cancelled:
            logger.warning(f"Sweep cancelled; {cancelled} of {total} SNR points left out of the report")

        report = Report(self.spec.experiment, self._config())
        for job in sorted(self.jobs, key=lambda j: j.snr_db):
            if job.record is not None:
                report.add(**job.record)
        return report

    def cancel(self):
        """Stop after the current trial of every running point; drop pending points."""
        self.should_cancel = True
        if self.codec:
            self.codec.cancel()
        if self.executor:
            self.executor.shutdown(wait=False, cancel_futures=True)

    def _config(self) -> Dict[str, object]:
        spec = asdict(self.spec)
        spec["snrs"] = list(self.spec.snrs)
        return {
            "sweep": spec,
            "settings": self.settings.to_dict(),
            "oar_path": self.plan.oar.describe(),
            "reference_path": self.plan.reference.describe(),
            "reference_codec": self.codec.name if self.codec else None,
        }

    def _scene(self, trial: int):
        spec = self.spec
        scene = SyntheticSceneSpec(
            seed=path_seed(spec.seed, trial),
            object_count=spec.objects,
            width=spec.width,
            height=spec.height,
            gop_length=spec.gop_length,
        )
        return generate_synthetic(scene)

    def _process_job(self, job: SweepJob):
        job.status = "processing"
        tally = _Tally()
        trials = 0

        for trial in range(self.spec.trials):
            if self.should_cancel:
                job.status = "cancelled"
                return
            self._run_trial(job.snr_db, trial, tally)
            trials += 1

        job.record = self._record(job.snr_db, trials, tally)
        job.status = "completed"

    def _run_trial(self, snr_db: float, trial: int, tally: _Tally):
        spec, plan = self.spec, self.plan
        gop, renders = self._scene(trial)

        if spec.path == "oar":
            channel = ChannelConfig(snr_db, path_seed(spec.seed, trial, OAR_PATH))
            params = plan.quant
            bits = encode_gop(quantize_gop(gop, params), params)
            received, report = transmit_oar(bits, plan, channel)
            decoded = None
            if received is not None:
                try:
                    decoded = decode_gop(received)
                except BitstreamDecodeError as e:
                    logger.warning(f"Trial {trial} at {snr_db:g} dB: {e}")
            tally.failures += decoded is None
            tally.bit_errors += report.bit_errors
            tally.info_bits += report.info_bits
            value = cbr(report.symbols, gop.width, gop.height, gop.gop_length)
            tally.cbr += value
            tally.cbr_oar += value
            tally.kbps += bit_account(bits, self.settings.fps).kbps
            tally.add_fidelity(metric_oar_fidelity(gop, decoded))
            return

        if spec.path == "reference":
            channel = ChannelConfig(snr_db, path_seed(spec.seed, trial, REFERENCE_PATH))
            frame, report, _ = transmit_reference(renders[0], plan, channel, self.codec)
            tally.failures += frame is None
            tally.bit_errors += report.bit_errors
            tally.info_bits += report.info_bits
            value = cbr(report.symbols, gop.width, gop.height, 1)
            tally.cbr += value
            tally.cbr_reference += value
            if frame is not None:
                tally.add_pixels(frame, renders[0])
                tally.ssim += metric_ssim(frame, renders[0])
                tally.ssim_count += 1
            return

        channel = ChannelConfig(snr_db, path_seed(spec.seed, trial))
        result = run_gop(
            trial, gop, renders[0], plan, channel, self.model, self.codec,
            self.settings.fps, self.settings.layout_downscale
        )
        tally.failures += not result.ok
        tally.bit_errors += result.oar.bit_errors + result.reference.bit_errors
        tally.info_bits += result.oar.info_bits + result.reference.info_bits
        tally.cbr += result.cbr_total
        tally.cbr_oar += result.cbr_oar
        tally.cbr_reference += result.cbr_reference
        tally.kbps += result.kbps
        tally.add_fidelity(metric_oar_fidelity(gop, result.gop))
        if result.frames is not None:
            tally.add_pixels(np.stack(result.frames), np.stack(renders))
            tally.ssim += float(np.mean([
                metric_ssim(a, b) for a, b in zip(result.frames, renders)
            ]))
            tally.ssim_count += 1

    def _record(self, snr_db: float, trials: int, tally: _Tally) -> Dict[str, object]:
        scheme = self.plan.reference.scheme if self.spec.path == "reference" else self.plan.oar.scheme

        psnr = None
        if tally.compared:
            mse = tally.squared_error / tally.compared
            psnr = math.inf if mse == 0 else 10.0 * math.log10(255.0 ** 2 / mse)

        record: Dict[str, object] = {
            "path": self.spec.path,
            "snr_db": float(snr_db),
            "seed": self.spec.seed,
            "trials": trials,
            "cbr": tally.cbr / trials,
            "cbr_oar": tally.cbr_oar / trials,
            "cbr_reference": tally.cbr_reference / trials,
            "kbps": tally.kbps / trials if self.spec.path != "reference" else None,
            "fer": tally.failures / trials,
            "ber": tally.bit_errors / tally.info_bits if tally.info_bits else 0.0,
            "psnr": psnr,
            "ssim": tally.ssim / tally.ssim_count if tally.ssim_count else None,
            "theoretical_ber": theoretical_ber(scheme, snr_db),
        }
        if tally.fidelity_count:
            n = tally.fidelity_count
            record.update(
                box_iou=tally.box_iou / n,
                category_accuracy=tally.category_accuracy / n,
                angle_mae=tally.angle_mae / n,
                relation_f1=tally.relation_f1 / n,
            )
        return record


def failure_rate(report: Report) -> float:
    """Failed trials over all trials of a report."""
    trials = sum(int(r["trials"] or 0) for r in report.records)
    if not trials:
        return 0.0
    failed = sum(float(r["fer"] or 0.0) * int(r["trials"] or 0) for r in report.records)
    return failed / trials
