"""Projected gradient flow integration and stationary-point search.

The limiting dynamics of the distributed iteration is the projected flow
dx/dt = P_T(x)(-grad f(x)), where P_T(x) projects onto the tangent cone of
the feasible set at x.  This module discretizes that flow with projected
Euler steps x_{k+1} = P_G(x_k - h grad f(x_k)) (consistent with the flow as
h -> 0 on convex sets, and sharing its fixed points for every h > 0), and
uses it as a verification oracle:

* ``integrate_flow`` produces a feasible trajectory along which the
  objective is non-increasing up to integrator tolerance;
* ``find_kkt`` runs multistart flows to collect candidate stationary points
  (points whose negative gradient lies in the normal cone);
* ``lyapunov_check`` validates the descent identity
  df/dt = -|P_T(-grad f)|^2 against the discrete trajectory.

All computations are pure; multistarts may run concurrently with independent
generator streams.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from gossipopt.constraints import ConstraintSet

__all__ = [
    "FlowTrajectory",
    "KKTCandidate",
    "LyapunovReport",
    "default_step_size",
    "suggest_flow_step",
    "integrate_flow",
    "find_kkt",
    "lyapunov_check",
]


@dataclass(frozen=True)
class FlowTrajectory:
    """Time grid, feasible states and objective values of one integrated flow."""

    times: np.ndarray
    states: np.ndarray
    values: np.ndarray
    step: float

    def __len__(self) -> int:
        return self.times.size

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class KKTCandidate:
    point: np.ndarray
    value: float
    residual: float


@dataclass(frozen=True)
class LyapunovReport:
    """Outcome of the descent checks along one trajectory."""

    n_steps: int
    monotone: bool
    n_monotone_violations: int
    monotone_tolerance: float
    rate_match_fraction: float
    rate_tolerance: float

    @property
    def passed(self) -> bool:
        return self.monotone


def default_step_size(
    constraint_set: ConstraintSet,
    grad_f,
    n_samples: int = 128,
    seed: int = 0,
) -> float:
    """Conservative default: 1e-3 * diameter / max |grad f| over sampled points."""
    rng = np.random.default_rng(seed)
    largest = 0.0
    for _ in range(n_samples):
        point = constraint_set.sample(rng)
        largest = max(largest, float(np.linalg.norm(grad_f(point))))
    return 1e-3 * constraint_set.diameter() / max(largest, 1e-12)


def suggest_flow_step(
    constraint_set: ConstraintSet,
    grad_f,
    n_pairs: int = 256,
    quantile: float = 0.9,
    seed: int = 0,
) -> float:
    """Heuristic step for the stationary-point search: one over an empirical
    gradient Lipschitz quantile.

    Samples feasible point pairs and takes the given quantile of the
    difference quotients |grad(x) - grad(y)| / |x - y|; the quantile (rather
    than the max) keeps rare stiff regions from collapsing the step, and the
    result is capped at the set diameter.  Fixed points of the projected
    Euler map are stationary points for any positive step, so this only
    affects speed and stability of the search, not what it converges to.
    """
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(n_pairs):
        x = constraint_set.sample(rng)
        y = constraint_set.sample(rng)
        gap = float(np.linalg.norm(x - y))
        if gap < 1e-12:
            continue
        ratios.append(float(np.linalg.norm(np.asarray(grad_f(x)) - np.asarray(grad_f(y)))) / gap)
    if not ratios:
        return constraint_set.diameter()
    scale = float(np.quantile(ratios, quantile))
    return min(1.0 / max(scale, 1e-12), constraint_set.diameter())


def integrate_flow(
    constraint_set: ConstraintSet,
    grad_f,
    x0: np.ndarray,
    horizon: float,
    step: float | None = None,
) -> FlowTrajectory:
    """Projected Euler integration from a feasible start over [0, horizon]."""
    x0 = np.asarray(x0, dtype=float)
    if not constraint_set.contains(x0):
        raise ValueError("flow must start inside the feasible set")
    if step is None:
        step = default_step_size(constraint_set, grad_f)
    if step <= 0 or horizon <= 0:
        raise ValueError("horizon and step must be positive")
    n_steps = int(np.ceil(horizon / step))
    states = np.empty((n_steps + 1, x0.size))
    states[0] = x0
    x = x0
    for k in range(n_steps):
        grad = np.asarray(grad_f(x), dtype=float)
        if not np.all(np.isfinite(grad)):
            raise ValueError(f"non-finite gradient at flow step {k}")
        x = constraint_set.project(x - step * grad)
        states[k + 1] = x
    times = step * np.arange(n_steps + 1)
    return FlowTrajectory(times=times, states=states, values=np.empty(0), step=step)


def _with_values(trajectory: FlowTrajectory, f) -> FlowTrajectory:
    values = np.array([f(x) for x in trajectory.states])
    return FlowTrajectory(trajectory.times, trajectory.states, values, trajectory.step)


def find_kkt(
    constraint_set: ConstraintSet,
    grad_f,
    f,
    n_starts: int,
    rng: np.random.Generator,
    step: float | None = None,
    max_steps: int = 200_000,
    residual_tol: float = 1e-8,
    dedup_radius: float = 1e-4,
    check_every: int = 10,
) -> list[KKTCandidate]:
    """Multistart flow search for stationary points.

    Each start integrates the projected Euler map until the stationarity
    residual |P_T(-grad f)| drops below ``residual_tol`` or the step budget
    runs out; converged endpoints within ``dedup_radius`` of each other are
    merged.  Returns candidates sorted by objective value (possibly empty,
    with a warning, when no start converged).
    """
    if n_starts < 1:
        raise ValueError("need at least one start")
    if step is None:
        step = default_step_size(constraint_set, grad_f)
    endpoints: list[np.ndarray] = []
    for _ in range(n_starts):
        x = constraint_set.sample(rng)
        converged = False
        for k in range(max_steps):
            grad = np.asarray(grad_f(x), dtype=float)
            if not np.all(np.isfinite(grad)):
                raise ValueError("non-finite gradient during stationary-point search")
            if k % check_every == 0:
                if constraint_set.kkt_residual(grad, x) < residual_tol:
                    converged = True
                    break
            x = constraint_set.project(x - step * grad)
        else:
            converged = constraint_set.kkt_residual(grad_f(x), x) < residual_tol
        if converged:
            endpoints.append(x)

    if not endpoints:
        warnings.warn(
            "no flow start reached the stationarity tolerance within its budget",
            RuntimeWarning,
        )
        return []

    unique: list[np.ndarray] = []
    for point in endpoints:
        if all(float(np.linalg.norm(point - kept)) > dedup_radius for kept in unique):
            unique.append(point)
    candidates = [
        KKTCandidate(
            point=p,
            value=float(f(p)),
            residual=constraint_set.kkt_residual(np.asarray(grad_f(p), dtype=float), p),
        )
        for p in unique
    ]
    return sorted(candidates, key=lambda c: c.value)


def lyapunov_check(
    trajectory: FlowTrajectory,
    constraint_set: ConstraintSet,
    grad_f,
    f,
    safety: float = 10.0,
) -> LyapunovReport:
    """Check descent along a trajectory produced by ``integrate_flow``.

    Two tests, both first-order in the step h:

    * monotonicity: f may increase by at most ``safety * h^2 * L`` per step,
      with L the empirical gradient Lipschitz constant along the trajectory;
    * descent rate: (f_{k+1} - f_k)/h should equal -|P_T(-grad f_k)|^2 up to
      ``safety * h * (L G^2 / 2 + 3 G^3 / diameter)`` where G bounds the
      gradient norm (the second term covers curved boundary sliding).
    """
    h = trajectory.step
    states = trajectory.states
    values = np.array([f(x) for x in states])
    grads = np.array([np.asarray(grad_f(x), dtype=float) for x in states])

    step_lengths = np.linalg.norm(np.diff(states, axis=0), axis=1)
    grad_changes = np.linalg.norm(np.diff(grads, axis=0), axis=1)
    moved = step_lengths > 1e-14
    lipschitz = float(np.max(grad_changes[moved] / step_lengths[moved])) if moved.any() else 0.0
    grad_bound = float(np.max(np.linalg.norm(grads, axis=1)))

    monotone_tol = safety * h * h * lipschitz + 1e-14
    increments = np.diff(values)
    n_violations = int(np.sum(increments > monotone_tol))

    rate_tol = safety * h * (
        0.5 * lipschitz * grad_bound**2 + 3.0 * grad_bound**3 / constraint_set.diameter()
    ) + 1e-12
    n_steps = len(states) - 1
    matches = 0
    for k in range(n_steps):
        residual = constraint_set.kkt_residual(grads[k], states[k])
        defect = abs(increments[k] / h + residual**2)
        if defect <= rate_tol:
            matches += 1

    return LyapunovReport(
        n_steps=n_steps,
        monotone=n_violations == 0,
        n_monotone_violations=n_violations,
        monotone_tolerance=monotone_tol,
        rate_match_fraction=matches / max(n_steps, 1),
        rate_tolerance=rate_tol,
    )
