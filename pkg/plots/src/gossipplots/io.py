"""Readers for the harness's CSV outputs and figure/channel configs."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class MissingColumnError(KeyError):
    """A required CSV column is absent; the message names it."""


def read_csv_columns(path: str | Path) -> dict[str, np.ndarray]:
    """Parse a comma-separated file with a header line into float columns."""
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    out = {}
    for k, name in enumerate(header):
        out[name] = np.array([float(r[k]) for r in rows])
    return out


def column(table: dict[str, np.ndarray], name: str, path) -> np.ndarray:
    if name not in table:
        raise MissingColumnError(f"column '{name}' not found in {path}")
    return table[name]


def average_columns(table: dict[str, np.ndarray]) -> list[str]:
    """The avg_0..avg_{d-1} columns of a run trace, in coordinate order."""
    names = [n for n in table if n.startswith("avg_")]
    return sorted(names, key=lambda n: int(n.split("_")[1]))


def load_channel(path: str | Path) -> dict:
    """Extract an interference-channel description from a config file.

    Accepts a full experiment config (channel under scenario.channel or in a
    scenario.channel_file next to the config), a {"channel": {...}} wrapper,
    or a bare channel object with a "gains" key.
    """
    path = Path(path)
    with open(path) as fh:
        raw = json.load(fh)
    scenario = raw.get("scenario", raw)
    if "channel" in scenario:
        channel = scenario["channel"]
    elif "channel_file" in scenario:
        with open(path.parent / scenario["channel_file"]) as fh:
            channel = json.load(fh)
    elif "gains" in scenario:
        channel = scenario
    else:
        raise ValueError(f"no channel description found in {path}")
    floor = float(scenario.get("power_floor", 1e-3)) if scenario is not channel else 1e-3
    return {
        "gains": [[float(g) for g in row] for row in channel["gains"]],
        "noise_vars": [float(v) for v in channel["noise_vars"]],
        "max_powers": [float(v) for v in channel["max_powers"]],
        "weights": [float(v) for v in channel["weights"]],
        "power_floor": floor,
    }
