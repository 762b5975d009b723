#!/usr/bin/env python3
"""Power allocation on the fixed 2x2 interference channel (both schemes)."""
import sys
from pathlib import Path

from gossipopt.cli import main

HERE = Path(__file__).resolve().parent.parent
code = 0
for config in ("power_fixed_2x2.json", "power_fixed_2x2_broadcast.json"):
    code |= main(["run", str(HERE / "configs" / config), *sys.argv[1:]])
sys.exit(code)
