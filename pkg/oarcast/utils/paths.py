"""Path utilities and helpers."""

from pathlib import Path
import platform
import os


APP_NAME = "OarCast"
APP_SLUG = "oarcast"


def get_config_dir() -> Path:
    """Get the configuration directory (OARCAST_CONFIG_DIR wins)."""

    override = os.environ.get("OARCAST_CONFIG_DIR")
    system = platform.system()

    if override:
        config_dir = Path(override)

    elif system == "Windows":
        # Use AppData on Windows
        base = Path(os.environ.get('APPDATA', Path.home() / 'AppData' / 'Roaming'))
        config_dir = base / APP_NAME

    elif system == "Darwin":
        config_dir = Path.home() / 'Library' / 'Application Support' / APP_NAME

    else:
        # XDG config directory on Linux/Unix
        xdg_config = os.environ.get('XDG_CONFIG_HOME', Path.home() / '.config')
        config_dir = Path(xdg_config) / APP_SLUG

    config_dir.mkdir(parents=True, exist_ok=True)

    return config_dir


def get_cache_dir() -> Path:
    """Get the cache directory (OARCAST_CACHE_DIR wins)."""

    override = os.environ.get("OARCAST_CACHE_DIR")
    system = platform.system()

    if override:
        cache_dir = Path(override)

    elif system == "Windows":
        base = Path(os.environ.get('LOCALAPPDATA', Path.home() / 'AppData' / 'Local'))
        cache_dir = base / APP_NAME / 'Cache'

    elif system == "Darwin":
        cache_dir = Path.home() / 'Library' / 'Caches' / APP_NAME

    else:
        xdg_cache = os.environ.get('XDG_CACHE_HOME', Path.home() / '.cache')
        cache_dir = Path(xdg_cache) / APP_SLUG

    cache_dir.mkdir(parents=True, exist_ok=True)

    return cache_dir

