"""Shared fixtures: build real simulator outputs through its CLI.

The plotting package talks to the simulator only through files, so the
fixtures shell out to the installed `gossipopt` command to generate small
but genuine CSV outputs.
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest

CHANNEL = {
    "gains": [[2, 1], [1, 2]],
    "noise_vars": [0.1, 0.1],
    "max_powers": [10, 10],
    "weights": [0.6666666666666666, 0.3333333333333333],
}


def run_simulator(args: list[str]) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "gossipopt", *args],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, f"simulator call failed: {proc.stdout}\n{proc.stderr}"


@pytest.fixture(scope="session")
def experiment_config(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("configs")
    config = {
        "scenario": {
            "type": "scenario2",
            "channel": CHANNEL,
            "log_scale": True,
            "power_floor": 0.001,
        },
        "topology": {"type": "complete"},
        "gossip": {"scheme": "pairwise", "beta": 0.5},
        "schedule": {"gamma0": 200.0, "xi": 0.7, "changes": [[3000, 30.0]]},
        "iterations": 300,
        "monte_carlo_runs": 2,
        "master_seed": 3,
        "trace_stride": 10,
    }
    path = root / "experiment.json"
    path.write_text(json.dumps(config, indent=2))
    return path


@pytest.fixture(scope="session")
def simulator_outputs(experiment_config, tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("outputs")
    run_simulator(["run", str(experiment_config), "--out", str(out)])
    return out


@pytest.fixture(scope="session")
def landscape_csv(experiment_config, tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("landscape") / "landscape.csv"
    run_simulator(["landscape", str(experiment_config), "--out", str(out), "--resolution", "15"])
    return out
