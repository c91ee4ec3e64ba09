#!/usr/bin/env python3
"""
OarCast - First Run Bootstrap

Creates .venv, installs requirements.txt, runs a CBR smoke check against the
reference value and reports which optional reference-frame codecs are on PATH.
"""

import platform
import shutil
import subprocess
import sys
from pathlib import Path

VENV_DIR = Path(".venv")

# 366 bits per frame, LDPC 1/3 + 4QAM, 512x512 at 25 fps
SMOKE_ARGS = ["main.py", "report", "--mode", "cbr", "--bits", "366"]
SMOKE_EXPECTED = "6.98e-04"

OPTIONAL_BINARIES = {
    "ffmpeg": "--codec ffmpeg (WebP/JPEG references)",
    "bpgenc": "--codec external (BPG references)",
    "bpgdec": "--codec external (BPG references)",
}


def venv_python() -> Path:
    if platform.system() == "Windows":
        return VENV_DIR / "Scripts" / "python.exe"
    return VENV_DIR / "bin" / "python"


def step(cmd: list, description: str) -> subprocess.CompletedProcess:
    """Run one setup step; exit on failure."""
    print(f"→ {description}...")
    try:
        result = subprocess.run(cmd, capture_output=True, text=True)
    except OSError as e:
        print(f"✗ Error: {e}")
        sys.exit(1)
    if result.returncode != 0:
        print(f"✗ Failed: {result.stderr.strip() or result.stdout.strip()}")
        sys.exit(1)
    print(f"✓ {description} complete")
    return result


def smoke_check(python: str) -> None:
    result = step([python, *SMOKE_ARGS], "Checking CBR arithmetic")
    lines = result.stdout.strip().splitlines()
    got = lines[-1] if lines else ""
    if got != SMOKE_EXPECTED:
        print(f"✗ Expected CBR {SMOKE_EXPECTED}, got {got!r}")
        sys.exit(1)


def report_optional_binaries() -> None:
    for name, used_by in OPTIONAL_BINARIES.items():
        found = shutil.which(name)
        mark = "✓" if found else "-"
        print(f"{mark} {name:<7} {found or 'not found'}  ({used_by})")


def main():
    print("=" * 60)
    print("OarCast - First Run Setup")
    print("=" * 60)

    if sys.prefix != sys.base_prefix:
        print("✓ Already running in virtual environment")
        smoke_check(sys.executable)
        report_optional_binaries()
        return

    if not VENV_DIR.exists():
        step([sys.executable, "-m", "venv", str(VENV_DIR)], "Creating virtual environment")
    else:
        print("✓ Virtual environment exists")

    vpy = venv_python()
    if not vpy.exists():
        print(f"✗ Virtual environment Python not found: {vpy}")
        sys.exit(1)

    step([str(vpy), "-m", "pip", "install", "--upgrade", "pip", "setuptools", "wheel"],
         "Upgrading pip, setuptools, and wheel")
    step([str(vpy), "-m", "pip", "install", "-r", "requirements.txt"], "Installing dependencies")
    step([str(vpy), "-c", "import numpy, scipy, PIL, matplotlib"], "Validating imports")
    smoke_check(str(vpy))

    print("\nOptional reference-frame codecs:")
    report_optional_binaries()

    print("\n" + "=" * 60)
    print("✓ Setup complete. Activate the environment and try a sweep:")
    if platform.system() == "Windows":
        print("  .venv\\Scripts\\activate")
    else:
        print("  source .venv/bin/activate")
    print("  python main.py simulate --seed 1 --snr 0:10:2 --plot waterfall.png")
    print("=" * 60)


if __name__ == "__main__":
    main()
