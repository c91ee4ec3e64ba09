"""Waterfall plots (FER/BER against SNR) rendered off-screen."""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import matplotlib
matplotlib.use("Agg")
from matplotlib.figure import Figure
from matplotlib.backends.backend_agg import FigureCanvasAgg

from ..channel.modulation import ModulationScheme, theoretical_ber


logger = logging.getLogger(__name__)


# Log axes cannot show zero rates
RATE_FLOOR = 1e-7


def _series(records: Iterable[Dict[str, object]]) -> Dict[Tuple[str, str], List[Dict[str, object]]]:
    groups: Dict[Tuple[str, str], List[Dict[str, object]]] = {}
    for r in records:
        if r.get("snr_db") is None:
            continue
        groups.setdefault((str(r.get("experiment")), str(r.get("path") or "")), []).append(r)
    for rows in groups.values():
        rows.sort(key=lambda r: float(r["snr_db"]))
    return groups


def plot_waterfall(
    records: Iterable[Dict[str, object]],
    path: Union[str, Path],
    scheme: Optional[ModulationScheme] = None,
    title: str = "Waterfall"
) -> Path:
    """
    Draw FER and BER against SNR for every (experiment, path) series.

    Args:
        records: Report records with snr_db, fer and ber
        path: Output PNG
        scheme: Adds the uncoded BER of this constellation when given
        title: Figure title
    """
    figure = Figure(figsize=(8, 6), dpi=100)
    FigureCanvasAgg(figure)
    ax = figure.add_subplot(111)

    snr_all = []
    for (experiment, stream), rows in _series(records).items():
        snr = np.array([float(r["snr_db"]) for r in rows])
        snr_all.extend(snr)
        label = f"{experiment} {stream}".strip()
        for key, style in (("fer", "o-"), ("ber", "s--")):
            values = [r.get(key) for r in rows]
            if all(v is None for v in values):
                continue
            y = np.array([RATE_FLOOR if v is None else max(float(v), RATE_FLOOR) for v in values])
            ax.semilogy(snr, y, style, label=f"{label} {key.upper()}")

    if scheme is not None and snr_all:
        grid = np.linspace(min(snr_all), max(snr_all), 100)
        ber = [max(theoretical_ber(scheme, s), RATE_FLOOR) for s in grid]
        ax.semilogy(grid, ber, "k:", label=f"uncoded {scheme.name} BER")

    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("Error rate")
    ax.set_title(title)
    ax.set_ylim(RATE_FLOOR, 1.5)
    ax.grid(True, alpha=0.3, which="both")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=8)
    figure.tight_layout()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(path)
    logger.info(f"Waterfall plot saved to {path}")
    return path
