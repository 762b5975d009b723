#!/usr/bin/env python3
"""Constrained least squares on the 10-node complete graph."""
import sys
from pathlib import Path

from gossipopt.cli import main

HERE = Path(__file__).resolve().parent.parent
sys.exit(main(["run", str(HERE / "configs" / "lsq_complete_n10.json"), *sys.argv[1:]]))
