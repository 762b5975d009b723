#!/usr/bin/env python3
"""Power allocation under Rician fading, averaged over 50 Monte Carlo runs.

The deviation reference is located by the flow search on the quadrature
gradient of the faded objective, which takes a few extra seconds up front.
"""
import sys
from pathlib import Path

from gossipopt.cli import main

HERE = Path(__file__).resolve().parent.parent
sys.exit(main(["run", str(HERE / "configs" / "power_rician_2x2.json"), *sys.argv[1:]]))
