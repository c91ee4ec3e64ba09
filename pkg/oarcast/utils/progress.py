"""Progress tracking and time helpers."""

import time
from typing import Optional, Tuple
from datetime import timedelta


class TimeEstimator:
    """Estimate remaining time for a fixed number of work items."""

    def __init__(self, total: int):
        self.total = total
        self.start_time: Optional[float] = None
        self.completed = 0

    def start(self):
        """Start timing."""
        self.start_time = time.time()
        self.completed = 0

    def step(self, completed: int) -> Tuple[timedelta, timedelta]:
        """
        Record progress and estimate the remaining time.

        Args:
            completed: Items finished so far

        Returns:
            Tuple of (elapsed_time, estimated_remaining)
        """
        if self.start_time is None:
            self.start()

        self.completed = completed
        elapsed = time.time() - self.start_time

        if 0 < completed < self.total:
            remaining = elapsed / completed * (self.total - completed)
        else:
            remaining = 0

        return (
            timedelta(seconds=int(elapsed)),
            timedelta(seconds=int(remaining))
        )

def format_time(seconds: float) -> str:
    """
    Format seconds into human-readable time.

    Args:
        seconds: Time in seconds

    Returns:
        Formatted string (e.g., "1h 23m 45s")
    """
    if seconds < 0:
        return "Unknown"

    hours = int(seconds // 3600)
    minutes = int((seconds % 3600) // 60)
    secs = int(seconds % 60)

    parts = []
    if hours > 0:
        parts.append(f"{hours}h")
    if minutes > 0:
        parts.append(f"{minutes}m")
    if secs > 0 or not parts:
        parts.append(f"{secs}s")

    return " ".join(parts)


def format_bits(n_bits: int) -> str:
    """Bit count as text, e.g. "140 bits" or "1.5 kbit"."""
    if n_bits < 1000:
        return f"{n_bits} bits"
    value = float(n_bits)
    for unit in ("kbit", "Mbit", "Gbit"):
        value /= 1000.0
        if value < 1000.0:
            break
    return f"{value:.1f} {unit}"


def calculate_bitrate(n_bits: int, duration: float) -> float:
    """
    Bit-rate of a payload spread over a duration.

    Args:
        n_bits: Payload size in bits
        duration: Duration in seconds

    Returns:
        Bitrate in kbps
    """
    if duration <= 0:
        return 0.0
    return n_bits / duration / 1000.0
