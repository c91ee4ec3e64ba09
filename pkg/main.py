#!/usr/bin/env python3
"""
OarCast - Main Entry Point
OAR semantic video coding over a simulated LDPC/QAM/AWGN channel
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from oarcast.cli import main


if __name__ == "__main__":
    sys.exit(main())
