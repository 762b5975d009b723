#!/usr/bin/env python3
"""Export the weighted error-probability surface of the 2x2 channel as CSV."""
import sys
from pathlib import Path

from gossipopt.cli import main

HERE = Path(__file__).resolve().parent.parent
sys.exit(
    main(
        [
            "landscape",
            str(HERE / "configs" / "power_fixed_2x2.json"),
            "--out",
            "results/landscape_2x2.csv",
            "--resolution",
            "100",
            *sys.argv[1:],
        ]
    )
)
