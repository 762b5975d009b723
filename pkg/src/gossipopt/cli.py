"""Command line interface.

Subcommands:

    gossipopt run <config.json> [--out DIR] [--seed S] [--workers K]
    gossipopt validate <config.json>
    gossipopt kkt <config.json> [--starts M] [--step H] [--seed S]
    gossipopt rho <config.json>
    gossipopt landscape <config.json> [--out FILE] [--resolution R]

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from gossipopt.config import build_problem, load_config, validate_config
from gossipopt.flow import find_kkt, suggest_flow_step
from gossipopt.gossip import ConfigurationError, expected_matrix, rho_n, spectral_rho, validate_rarefaction
from gossipopt.problems import InterferenceChannel, weighted_error_sum
from gossipopt.runner import RunFailure, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gossipopt",
        description="Distributed projected stochastic gradient descent over gossip networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a Monte Carlo experiment")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--out", type=Path, default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the master seed")
    p_run.add_argument("--workers", type=int, default=1, help="parallel run workers")

    p_val = sub.add_parser("validate", help="check a config and print diagnostics")
    p_val.add_argument("config", type=Path)

    p_kkt = sub.add_parser("kkt", help="multistart flow search for stationary points")
    p_kkt.add_argument("config", type=Path)
    p_kkt.add_argument("--starts", type=int, default=8)
    p_kkt.add_argument("--step", type=float, default=None)
    p_kkt.add_argument("--seed", type=int, default=None)

    p_rho = sub.add_parser("rho", help="print gossip spectral statistics")
    p_rho.add_argument("config", type=Path)

    p_land = sub.add_parser("landscape", help="export the power-allocation objective grid as CSV")
    p_land.add_argument("config", type=Path)
    p_land.add_argument("--out", type=Path, default=Path("landscape.csv"))
    p_land.add_argument("--resolution", type=int, default=50)
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        raw = dict(config.raw)
        raw["master_seed"] = args.seed
        config = load_config(raw, base_dir=config.base_dir)
    out = args.out if args.out is not None else Path(config.output_dir or "results")
    result = run_experiment(config, output_dir=out, workers=args.workers)
    print(f"runs: {len(result.run_summaries)}  iterations: {int(result.iterations[-1])}")
    print(f"mean final deviation:    {result.deviation_mean[-1]:.6g}")
    print(f"mean final disagreement: {result.disagreement_mean[-1]:.6g}")
    print(f"mean final objective:    {result.objective_mean[-1]:.6g}")
    print(f"outputs written to {out}")
    return 0


def _cmd_validate(args) -> int:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: {err}")
        return 1
    diagnostics = validate_config(raw, base_dir=args.config.parent)
    for diag in diagnostics:
        print(diag)
    if any(d.severity == "error" for d in diagnostics):
        return 1
    print("config ok" + (" (with warnings)" if diagnostics else ""))
    return 0


def _cmd_kkt(args) -> int:
    config = load_config(args.config)
    seed = config.master_seed if args.seed is None else args.seed
    problem = build_problem(config, np.random.default_rng(seed))
    step = args.step
    if step is None:
        step = suggest_flow_step(problem.constraint_set, problem.mean_gradient, seed=seed)
    candidates = find_kkt(
        problem.constraint_set,
        problem.mean_gradient,
        problem.objective,
        n_starts=args.starts,
        rng=np.random.default_rng(np.random.SeedSequence([seed, 1])),
        step=step,
    )
    if not candidates:
        print("no stationary point found within the step budget")
        return 0
    print(f"{len(candidates)} candidate stationary point(s), step {step:.3g}:")
    for cand in candidates:
        point = ", ".join(f"{v:.8g}" for v in cand.point)
        print(f"  f = {cand.value:.10g}  residual = {cand.residual:.3g}  at ({point})")
    return 0


def _cmd_rho(args) -> int:
    config = load_config(args.config)
    rho = spectral_rho(config.scheme, config.topology)
    expected = expected_matrix(config.scheme, config.topology, n=1)
    column_gap = float(np.max(np.abs(expected.sum(axis=0) - 1.0)))
    print(f"agents: {config.topology.n_agents}  edges: {len(config.topology.edges)}")
    print(f"connected: {config.topology.is_connected}")
    print(f"spectral rho (base event): {rho:.12g}   gap 1-rho: {1.0 - rho:.12g}")
    print(f"max |column sum of E[W] - 1|: {column_gap:.3g}")
    if config.scheme.rarefaction is not None:
        validate_rarefaction(config.scheme, config.schedule)
        for n in (1, 10, 100, 1000, 10000):
            print(f"  rho_n at n={n}: {rho_n(config.scheme, config.topology, n):.12g}")
        print("thinning/stepsize exponent check: ok")
    return 0


def _cmd_landscape(args) -> int:
    config = load_config(args.config)
    scenario = config.scenario
    if scenario.get("type") != "scenario2":
        raise ConfigurationError("landscape export needs a scenario2 config")
    from gossipopt.config import _channel_dict  # shared channel resolution

    channel = InterferenceChannel.from_dict(_channel_dict(scenario, config.base_dir))
    if channel.n_pairs != 2:
        raise ConfigurationError("landscape export is defined for 2-pair channels")
    floor = float(scenario.get("power_floor", 1e-3))
    resolution = args.resolution
    grids = [
        np.logspace(np.log10(floor), np.log10(pmax), resolution)
        for pmax in channel.max_powers
    ]
    lines = ["p1,p2,objective"]
    for p1 in grids[0]:
        for p2 in grids[1]:
            value = weighted_error_sum(channel, np.array([p1, p2]))
            lines.append(
                f"{format(p1, '.17g')},{format(p2, '.17g')},{format(value, '.17g')}"
            )
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text("\n".join(lines) + "\n")
    print(f"wrote {resolution * resolution} grid cells to {args.out}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "validate": _cmd_validate,
    "kkt": _cmd_kkt,
    "rho": _cmd_rho,
    "landscape": _cmd_landscape,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigurationError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except (RunFailure, Exception) as err:  # noqa: BLE001 - CLI boundary
        if isinstance(err, SystemExit):
            raise
        print(f"runtime failure: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
