"""Platform and runtime details: CPU budget, color support, report provenance."""

import os
import platform
import sys
from importlib import metadata


# Packages whose versions change numerical results
NUMERIC_PACKAGES = ("numpy", "scipy", "Pillow", "matplotlib")


def _package_version(name: str) -> str:
    try:
        return metadata.version(name)
    except metadata.PackageNotFoundError:
        return "missing"


def get_runtime_info() -> dict:
    """Platform, interpreter and numeric package versions for report sidecars."""
    return {
        'system': platform.system(),
        'release': platform.release(),
        'machine': platform.machine(),
        'python_version': platform.python_version(),
        'python_implementation': platform.python_implementation(),
        'packages': {name: _package_version(name) for name in NUMERIC_PACKAGES},
    }


def is_windows() -> bool:
    return platform.system() == 'Windows'


def get_cpu_count() -> int:
    """Cores this process may run on (affinity mask where the OS has one)."""
    if hasattr(os, "sched_getaffinity"):
        try:
            return max(1, len(os.sched_getaffinity(0)))
        except OSError:
            pass
    return os.cpu_count() or 4


def supports_color() -> bool:
    """Check if the terminal supports ANSI color output; NO_COLOR disables it."""
    if os.environ.get('NO_COLOR'):
        return False

    if is_windows():
        return (
            os.environ.get('ANSICON') is not None or
            os.environ.get('WT_SESSION') is not None or  # Windows Terminal
            'PYCHARM' in os.environ
        )

    return sys.stdout.isatty()


def get_default_threads() -> int:
    """
    Worker count for sweep points.

    Each point runs numpy kernels that release the GIL, so a quarter of the
    cores is left for them; at most 8 points run at once.
    """
    return max(1, min(int(get_cpu_count() * 0.75), 8))
