"""Experiment reports: CSV rows plus a JSON sidecar with the configuration."""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Union

from ..core.errors import ConfigurationError
from ..utils.osdetect import get_runtime_info


logger = logging.getLogger(__name__)


FIELDS = (
    "experiment",
    "path",
    "snr_db",
    "seed",
    "trials",
    "cbr",
    "cbr_oar",
    "cbr_reference",
    "kbps",
    "fer",
    "ber",
    "psnr",
    "ssim",
    "box_iou",
    "category_accuracy",
    "angle_mae",
    "relation_f1",
    "theoretical_ber",
)

TEXT_FIELDS = ("experiment", "path")
INT_FIELDS = ("seed", "trials")


@dataclass
class Report:
    """One experiment: its configuration snapshot and per-point records."""

    experiment: str
    config: Dict[str, object] = field(default_factory=dict)
    records: List[Dict[str, object]] = field(default_factory=list)

    @property
    def seeds(self) -> List[int]:
        return sorted({int(r["seed"]) for r in self.records if r.get("seed") is not None})

    def add(self, **values):
        if values.get("seed") is None:
            raise ConfigurationError("Every report record must carry its seed")
        unknown = set(values) - set(FIELDS)
        if unknown:
            raise ConfigurationError(f"Unknown report fields: {', '.join(sorted(unknown))}")
        record = {"experiment": self.experiment}
        record.update(values)
        self.records.append(record)

    def sorted_records(self) -> List[Dict[str, object]]:
        return sorted(self.records, key=_sort_key)


def _sort_key(record: Dict[str, object]):
    snr = record.get("snr_db")
    snr = math.inf if snr is None or snr == "" else float(snr)
    return (str(record.get("experiment", "")), str(record.get("path", "")), snr)


def format_value(value: object) -> str:
    """CSV cell text: "inf" for infinities, repr-exact floats, "" for None."""
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def parse_value(name: str, text: str) -> object:
    if text == "":
        return None
    if name in TEXT_FIELDS:
        return text
    if name in INT_FIELDS:
        return int(text)
    return float(text)


def sidecar_path(path: Union[str, Path]) -> Path:
    return Path(path).with_suffix(".json")


def write_report(report: Report, path: Union[str, Path]) -> Path:
    """Write the CSV body sorted by (experiment, path, SNR) and its sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=FIELDS, lineterminator="\n")
        writer.writeheader()
        for record in report.sorted_records():
            writer.writerow({k: format_value(record.get(k)) for k in FIELDS})

    sidecar = {
        "experiment": report.experiment,
        "config": report.config,
        "seeds": report.seeds,
        "fields": list(FIELDS),
        "rows": len(report.records),
        "platform": get_runtime_info(),
    }
    with open(sidecar_path(path), "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True, default=str)

    logger.info(f"Saved {len(report.records)} records to {path}")
    return path


def read_records(path: Union[str, Path]) -> List[Dict[str, object]]:
    path = Path(path)
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            missing = set(FIELDS) - set(reader.fieldnames or ())
            if missing:
                raise ConfigurationError(f"{path} lacks columns {', '.join(sorted(missing))}")
            return [{k: parse_value(k, row.get(k, "")) for k in FIELDS} for row in reader]
    except OSError as e:
        raise ConfigurationError(f"Cannot read report {path}: {e}") from e
    except ValueError as e:
        raise ConfigurationError(f"Malformed report {path}: {e}") from e


def read_report(path: Union[str, Path]) -> Report:
    records = read_records(path)
    sidecar = sidecar_path(path)
    config: Dict[str, object] = {}
    experiment = str(records[0]["experiment"]) if records else Path(path).stem
    if sidecar.exists():
        with open(sidecar, "r", encoding="utf-8") as f:
            meta = json.load(f)
        config = meta.get("config", {})
        experiment = meta.get("experiment", experiment)
    return Report(experiment, config, records)


def aggregate_reports(
    paths: Sequence[Union[str, Path]],
    experiment: str = "aggregate"
) -> Report:
    """Merge run CSVs; configs of the inputs are kept under their experiment ids."""
    if not paths:
        raise ConfigurationError("No runs to aggregate")
    merged = Report(experiment, {"runs": {}})
    for path in paths:
        run = read_report(path)
        merged.config["runs"][run.experiment] = run.config
        merged.records.extend(run.records)
    logger.info(f"Aggregated {len(merged.records)} records from {len(paths)} runs")
    return merged
