"""Experiment configuration: JSON schema, parsing and validation.

A config file is one JSON object:

    {
      "scenario":   {"type": "scenario1", "n_agents": 50}
                  | {"type": "scenario2", "channel": {...} | "channel_file": "...",
                     "fading": {"means": [[...]], "variance": v} (optional),
                     "log_scale": true, "power_floor": 1e-3,
                     "theta_star": [...] (optional)}
                  | {"type": "custom", "file": "problem.json"},
      "topology":  {"type": "complete" | "cycle"}
                  | {"type": "edge_list", "edges": [[i, j], ...]},
      "gossip":    {"scheme": "pairwise" | "broadcast", "beta": 0.5,
                    "rarefaction": {"a": 1.0, "eta": 0.2} (optional)},
      "schedule":  {"gamma0": 0.1, "xi": 0.9,
                    "changes": [[after_iteration, new_gamma0], ...] (optional)},
      "iterations": 10000,
      "monte_carlo_runs": 50,
      "master_seed": 2024,
      "trace_stride": 1 (optional),
      "initial_state": {"type": "uniform"}
                     | {"type": "point", "value": [...]}
                     | {"type": "stacked", "values": [[...], ...]} (optional),
      "output_dir": "results/my-experiment" (optional)
    }

A custom problem file holds {"targets": [[...], ...], "noise_std": s,
"constraint_set": {...}} with the constraint-set forms documented in
``gossipopt.constraints.build_constraint_set``.

``validate_config`` returns a list of diagnostics (never raises);
``load_config`` raises ``ConfigurationError`` when any diagnostic is an
error.  Relative file references resolve against the config file directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gossipopt.constraints import build_constraint_set
from gossipopt.gossip import (
    BroadcastGossip,
    ConfigurationError,
    GossipScheme,
    PairwiseGossip,
    Rarefaction,
    Topology,
    spectral_rho,
    validate_rarefaction,
)
from gossipopt.optimizer import StepSchedule
from gossipopt.problems import (
    InterferenceChannel,
    ProblemInstance,
    RicianFading,
    constrained_least_squares,
    least_squares_targets,
    power_allocation,
)

__all__ = ["Diagnostic", "ExperimentConfig", "load_config", "validate_config", "build_problem"]

_SCENARIO_TYPES = ("scenario1", "scenario2", "custom")


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.message}"


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully parsed experiment description."""

    raw: dict
    base_dir: Path
    scenario: dict
    topology: Topology
    scheme: GossipScheme
    schedule: StepSchedule
    iterations: int
    monte_carlo_runs: int
    master_seed: int
    trace_stride: int
    output_dir: str | None
    n_agents: int
    dimension: int
    initial_state: dict = field(default_factory=dict)


def _scenario_shape(scenario: dict, base_dir: Path) -> tuple[int, int]:
    """(n_agents, dimension) implied by the scenario block."""
    kind = scenario.get("type")
    if kind == "scenario1":
        n = int(scenario["n_agents"])
        return n, 2
    if kind == "scenario2":
        channel = _channel_dict(scenario, base_dir)
        n = len(channel["gains"])
        return n, n
    if kind == "custom":
        problem = _custom_dict(scenario, base_dir)
        targets = np.asarray(problem["targets"], dtype=float)
        return targets.shape[0], targets.shape[1]
    raise ConfigurationError(f"unknown scenario type {kind!r}")


def _channel_dict(scenario: dict, base_dir: Path) -> dict:
    if "channel" in scenario:
        return scenario["channel"]
    if "channel_file" in scenario:
        path = base_dir / scenario["channel_file"]
        with open(path) as fh:
            return json.load(fh)
    raise ConfigurationError("scenario2 needs an inline 'channel' or a 'channel_file'")


def _custom_dict(scenario: dict, base_dir: Path) -> dict:
    if "file" in scenario:
        path = base_dir / scenario["file"]
        with open(path) as fh:
            return json.load(fh)
    return scenario


def _build_topology(raw: dict, n_agents: int) -> Topology:
    spec = raw.get("topology", {"type": "complete"})
    kind = spec.get("type", "complete")
    declared = spec.get("n_agents")
    if declared is not None and int(declared) != n_agents:
        raise ConfigurationError(
            f"topology declares {declared} agents but the scenario implies {n_agents}"
        )
    if kind == "complete":
        return Topology.complete(n_agents)
    if kind == "cycle":
        return Topology.cycle(n_agents)
    if kind == "edge_list":
        return Topology.from_edge_list(n_agents, spec["edges"])
    raise ConfigurationError(f"unknown topology type {kind!r}")


def _build_scheme(raw: dict) -> GossipScheme:
    spec = raw.get("gossip", {})
    kind = spec.get("scheme", "pairwise")
    beta = float(spec.get("beta", 0.5))
    rarefaction = None
    if spec.get("rarefaction"):
        r = spec["rarefaction"]
        rarefaction = Rarefaction(a=float(r["a"]), eta=float(r["eta"]))
    if kind == "pairwise":
        return PairwiseGossip(beta=beta, rarefaction=rarefaction)
    if kind == "broadcast":
        return BroadcastGossip(beta=beta, rarefaction=rarefaction)
    raise ConfigurationError(f"unknown gossip scheme {kind!r}")


def _build_schedule(raw: dict) -> StepSchedule:
    spec = raw["schedule"]
    changes = tuple((int(n), float(g)) for n, g in spec.get("changes", ()))
    try:
        return StepSchedule(gamma0=float(spec["gamma0"]), xi=float(spec["xi"]), changes=changes)
    except ValueError as err:
        raise ConfigurationError(str(err)) from err


def validate_config(raw: dict, base_dir: str | Path = ".") -> list[Diagnostic]:
    """Collect all problems with a raw config dict; empty list means valid.

    Errors make the config unusable; warnings flag runs that are legal but
    unlikely to behave (e.g. a disconnected topology, for which the mixing
    spectral norm is 1 and consensus is not guaranteed).
    """
    base_dir = Path(base_dir)
    diagnostics: list[Diagnostic] = []

    def error(msg: str) -> None:
        diagnostics.append(Diagnostic("error", msg))

    def warning(msg: str) -> None:
        diagnostics.append(Diagnostic("warning", msg))

    for key in ("scenario", "schedule", "iterations", "monte_carlo_runs", "master_seed"):
        if key not in raw:
            error(f"missing required config key '{key}'")
    if diagnostics:
        return diagnostics

    if int(raw["iterations"]) < 0:
        error("iterations must be non-negative")
    if int(raw["monte_carlo_runs"]) < 1:
        error("monte_carlo_runs must be at least 1")
    if int(raw.get("trace_stride", 1)) < 1:
        error("trace_stride must be at least 1")

    # Stepsize schedule.
    schedule = None
    spec = raw["schedule"]
    xi = float(spec.get("xi", 0.0))
    if not 0.5 < xi <= 1.0:
        error(
            f"stepsize decay exponent xi={xi} outside (1/2, 1]: the decreasing-stepsize "
            "iteration needs divergent stepsize sum with square-summable tail"
        )
    else:
        try:
            schedule = _build_schedule(raw)
        except ConfigurationError as err:
            error(str(err))

    # Gossip scheme, including thinning compatibility.
    scheme = None
    try:
        scheme = _build_scheme(raw)
    except (ConfigurationError, KeyError) as err:
        error(f"gossip block: {err}")
    if scheme is not None and schedule is not None:
        try:
            validate_rarefaction(scheme, schedule)
        except ConfigurationError as err:
            error(str(err))

    # Scenario block and implied sizes.
    scenario = raw["scenario"]
    n_agents = None
    try:
        n_agents, _ = _scenario_shape(scenario, base_dir)
    except (ConfigurationError, KeyError, OSError, json.JSONDecodeError) as err:
        error(f"scenario block: {err}")

    if scenario.get("type") == "scenario2" and n_agents is not None:
        try:
            channel = InterferenceChannel.from_dict(_channel_dict(scenario, base_dir))
            floor = float(scenario.get("power_floor", 1e-3))
            if not 0.0 < floor < float(np.min(channel.max_powers)):
                error("power_floor must be positive and below every max power")
            if scenario.get("fading"):
                RicianFading(
                    means=np.asarray(scenario["fading"]["means"], dtype=float),
                    variance=float(scenario["fading"]["variance"]),
                )
            if scenario.get("theta_star") is not None:
                if len(scenario["theta_star"]) != n_agents:
                    error("theta_star length must equal the number of pairs")
        except (ValueError, KeyError) as err:
            error(f"scenario2 parameters: {err}")

    if scenario.get("type") == "custom" and n_agents is not None:
        try:
            problem = _custom_dict(scenario, base_dir)
            build_constraint_set(problem["constraint_set"])
            if float(problem.get("noise_std", 0.0)) < 0:
                error("noise_std must be non-negative")
        except (ValueError, KeyError, OSError, json.JSONDecodeError) as err:
            error(f"custom problem: {err}")

    # Topology and connectivity.
    if n_agents is not None and scheme is not None:
        if n_agents < 2:
            warning("fewer than 2 agents: the gossip step degenerates to the identity")
        try:
            topology = _build_topology(raw, n_agents)
        except (ConfigurationError, KeyError) as err:
            error(f"topology block: {err}")
        else:
            if n_agents >= 2 and spectral_rho(scheme, topology) >= 1.0 - 1e-10:
                warning("rho=1: consensus not guaranteed (topology is disconnected)")

    return diagnostics


def load_config(source: str | Path | dict, base_dir: str | Path | None = None) -> ExperimentConfig:
    """Parse and validate a config from a file path or an already-loaded dict."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        if base_dir is None:
            base_dir = path.parent
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as err:
            raise ConfigurationError(f"cannot read config file: {err}") from err
        except json.JSONDecodeError as err:
            raise ConfigurationError(f"config is not valid JSON: {err}") from err
    else:
        raw = source
        if base_dir is None:
            base_dir = "."
    base_dir = Path(base_dir)

    diagnostics = validate_config(raw, base_dir)
    errors = [d for d in diagnostics if d.severity == "error"]
    if errors:
        raise ConfigurationError("\n".join(d.message for d in errors))

    n_agents, dimension = _scenario_shape(raw["scenario"], base_dir)
    return ExperimentConfig(
        raw=raw,
        base_dir=base_dir,
        scenario=raw["scenario"],
        topology=_build_topology(raw, n_agents),
        scheme=_build_scheme(raw),
        schedule=_build_schedule(raw),
        iterations=int(raw["iterations"]),
        monte_carlo_runs=int(raw["monte_carlo_runs"]),
        master_seed=int(raw["master_seed"]),
        trace_stride=int(raw.get("trace_stride", 1)),
        output_dir=raw.get("output_dir"),
        n_agents=n_agents,
        dimension=dimension,
        initial_state=raw.get("initial_state", {"type": "uniform"}),
    )


def build_problem(config: ExperimentConfig, rng: np.random.Generator) -> ProblemInstance:
    """Instantiate the configured problem; scenario1 draws its directions from rng."""
    scenario = config.scenario
    kind = scenario["type"]
    if kind == "scenario1":
        return constrained_least_squares(config.n_agents, rng)
    if kind == "scenario2":
        channel = InterferenceChannel.from_dict(_channel_dict(scenario, config.base_dir))
        fading = None
        if scenario.get("fading"):
            fading = RicianFading(
                means=np.asarray(scenario["fading"]["means"], dtype=float),
                variance=float(scenario["fading"]["variance"]),
            )
        return power_allocation(
            channel,
            fading=fading,
            log_scale=bool(scenario.get("log_scale", True)),
            power_floor=float(scenario.get("power_floor", 1e-3)),
            theta_star=scenario.get("theta_star"),
        )
    if kind == "custom":
        problem = _custom_dict(scenario, config.base_dir)
        return least_squares_targets(
            targets=np.asarray(problem["targets"], dtype=float),
            noise_std=float(problem.get("noise_std", 0.0)),
            constraint_set=build_constraint_set(problem["constraint_set"]),
        )
    raise ConfigurationError(f"unknown scenario type {kind!r}")


def initial_state_vector(config: ExperimentConfig) -> np.ndarray | None:
    """The configured fixed start, or None for uniform random initialization."""
    spec = config.initial_state
    kind = spec.get("type", "uniform")
    if kind == "uniform":
        return None
    if kind == "point":
        return np.asarray(spec["value"], dtype=float)
    if kind == "stacked":
        return np.asarray(spec["values"], dtype=float).reshape(-1)
    raise ConfigurationError(f"unknown initial_state type {kind!r}")
