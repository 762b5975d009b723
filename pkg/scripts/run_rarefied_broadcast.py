#!/usr/bin/env python3
"""Broadcast gossip with communication thinning P(talk at n) = n**-0.2."""
import sys
from pathlib import Path

from gossipopt.cli import main

HERE = Path(__file__).resolve().parent.parent
sys.exit(main(["run", str(HERE / "configs" / "lsq_rarefied_broadcast.json"), *sys.argv[1:]]))
