"""Figure rendering: convergence curves, coordinate trajectories, landscapes."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from gossipplots.channel import weighted_error_sum
from gossipplots.io import average_columns, column, read_csv_columns

_SCALES = ("linear", "log", "db")


def _decibel(values: np.ndarray) -> np.ndarray:
    return 10.0 * np.log10(values)


@dataclass
class FigureSpec:
    """What to draw: input curves, labels, axis scales, output path.

    ``inputs`` is a list of {"path": ..., "label": ...} entries; every path
    must exist and carry the CSV header contract of the harness.  Scales are
    "linear", "log" or "db" (10 log10 of the plotted quantity).
    """

    inputs: list
    output: str
    column: str = "deviation_mean"
    x_scale: str = "linear"
    y_scale: str = "log"
    title: str = ""
    references: list = field(default_factory=list)

    def __post_init__(self):
        if self.x_scale not in _SCALES or self.y_scale not in _SCALES:
            raise ValueError(f"axis scales must be one of {_SCALES}")
        for entry in self.inputs:
            if not Path(entry["path"]).exists():
                raise FileNotFoundError(f"input file {entry['path']} does not exist")

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path = ".") -> "FigureSpec":
        base = Path(base_dir)
        inputs = [
            {"path": str(base / e["path"]), "label": e.get("label", Path(e["path"]).stem)}
            for e in raw["inputs"]
        ]
        return cls(
            inputs=inputs,
            output=str(base / raw.get("output", "figure.png")),
            column=raw.get("column", "deviation_mean"),
            x_scale=raw.get("x_scale", "linear"),
            y_scale=raw.get("y_scale", "log"),
            title=raw.get("title", ""),
            references=list(raw.get("references", [])),
        )


def _apply_scale(axis, which: str, scale: str) -> None:
    if scale == "log":
        (axis.set_xscale if which == "x" else axis.set_yscale)("log")


def _maybe_db(values: np.ndarray, scale: str) -> np.ndarray:
    return _decibel(values) if scale == "db" else values


def plot_convergence(spec: FigureSpec, out: str | Path | None = None) -> Path:
    """One curve per input aggregate file, shared axes, legend per label."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for entry in spec.inputs:
        table = read_csv_columns(entry["path"])
        x = _maybe_db(column(table, "iteration", entry["path"]), spec.x_scale)
        y = _maybe_db(column(table, spec.column, entry["path"]), spec.y_scale)
        ax.plot(x, y, label=entry["label"])
    _apply_scale(ax, "x", spec.x_scale)
    _apply_scale(ax, "y", spec.y_scale)
    ax.set_xlabel("iteration" + (" [dB]" if spec.x_scale == "db" else ""))
    ax.set_ylabel(spec.column + (" [dB]" if spec.y_scale == "db" else ""))
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    target = Path(out if out is not None else spec.output)
    target.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(target, dpi=130)
    plt.close(fig)
    return target


def plot_trajectory(spec: FigureSpec, out: str | Path | None = None) -> Path:
    """Coordinate trajectories of the network average from run traces.

    Draws every avg_* column of every input against iteration; entries in
    ``spec.references`` are drawn as dashed horizontal target lines.
    """
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for entry in spec.inputs:
        table = read_csv_columns(entry["path"])
        x = column(table, "iteration", entry["path"])
        for name in average_columns(table):
            coord = name.split("_")[1]
            ax.plot(x, table[name], label=f"{entry['label']} p{int(coord) + 1}")
    for value in spec.references:
        ax.axhline(value, linestyle="--", color="gray", linewidth=0.8)
    _apply_scale(ax, "x", spec.x_scale)
    if spec.y_scale == "log":
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("network-average estimate")
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    target = Path(out if out is not None else spec.output)
    target.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(target, dpi=130)
    plt.close(fig)
    return target


def landscape_grid(channel: dict, resolution: int, floor: float | None = None):
    """Evaluate the weighted error-probability surface on a dB-spaced grid.

    Returns (p1 grid, p2 grid, value matrix) with values[i, j] at
    (p1[i], p2[j]).  Powers span [floor, max_power] per coordinate with
    ``resolution`` points spaced uniformly in 10 log10 p.
    """
    if len(channel["gains"]) != 2:
        raise ValueError("the landscape figure is defined for 2-pair channels")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if floor is None:
        floor = channel.get("power_floor", 1e-3)
    grids = [
        np.logspace(np.log10(floor), np.log10(pmax), resolution)
        for pmax in channel["max_powers"]
    ]
    values = np.empty((resolution, resolution))
    for a, p1 in enumerate(grids[0]):
        for b, p2 in enumerate(grids[1]):
            values[a, b] = weighted_error_sum(channel, [float(p1), float(p2)])
    return grids[0], grids[1], values


def grid_minimizer(p1: np.ndarray, p2: np.ndarray, values: np.ndarray):
    """The grid point with the smallest surface value."""
    a, b = np.unravel_index(int(np.argmin(values)), values.shape)
    return float(p1[a]), float(p2[b])


def plot_landscape(
    channel: dict,
    resolution: int,
    out: str | Path,
    floor: float | None = None,
) -> Path:
    """Filled-contour map of the surface over dB axes, minimizer marked."""
    p1, p2, values = landscape_grid(channel, resolution, floor)
    best = grid_minimizer(p1, p2, values)
    fig, ax = plt.subplots(figsize=(6.5, 5))
    mesh = ax.contourf(_decibel(p1), _decibel(p2), values.T, levels=30)
    fig.colorbar(mesh, ax=ax, label="weighted error probability")
    ax.plot([10 * np.log10(best[0])], [10 * np.log10(best[1])], "r*", markersize=12)
    ax.set_xlabel("10 log10 p1 [dB]")
    ax.set_ylabel("10 log10 p2 [dB]")
    ax.set_title(f"grid minimizer at ({best[0]:.3g}, {best[1]:.3g})")
    target = Path(out)
    target.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(target, dpi=130)
    plt.close(fig)
    return target
