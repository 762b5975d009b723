"""Command line interface.

    plot convergence --config <figure.json> [--out PATH]
    plot trajectory  --config <figure.json> [--out PATH]
    plot landscape   --config <experiment-or-channel.json> --out PATH [--resolution R]

Figure configs hold a FigureSpec (inputs/labels/scales); the landscape reads
the channel parameters straight from an experiment config.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from gossipplots.figures import FigureSpec, plot_convergence, plot_landscape, plot_trajectory
from gossipplots.io import load_channel


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plot", description="Render figures from gossipopt outputs")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("convergence", "trajectory"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=True, help="figure spec JSON")
        p.add_argument("--out", type=Path, default=None)
    p_land = sub.add_parser("landscape")
    p_land.add_argument("--config", type=Path, required=True, help="experiment or channel JSON")
    p_land.add_argument("--out", type=Path, default=Path("landscape.png"))
    p_land.add_argument("--resolution", type=int, default=200)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "landscape":
            channel = load_channel(args.config)
            target = plot_landscape(channel, args.resolution, args.out)
        else:
            with open(args.config) as fh:
                spec = FigureSpec.from_dict(json.load(fh), base_dir=args.config.parent)
            render = plot_convergence if args.command == "convergence" else plot_trajectory
            target = render(spec, out=args.out)
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
