#!/usr/bin/env python3
"""Constrained least squares on the 50-node cycle, pairwise and broadcast.

Produces the aggregate deviation curves used by the convergence plot.
Extra CLI flags (e.g. --workers 4, --seed 7) pass straight through.
"""
import sys
from pathlib import Path

from gossipopt.cli import main

HERE = Path(__file__).resolve().parent.parent
code = 0
for config in ("lsq_cycle_n50.json", "lsq_cycle_n50_broadcast.json"):
    code |= main(["run", str(HERE / "configs" / config), *sys.argv[1:]])
sys.exit(code)
