"""The two-step distributed iteration: local projected gradient, then gossip.

Each agent holds a d-dimensional estimate; the network state stacks all N of
them into one vector of length d*N.  One tick consists of

1. a local step: every agent moves along its own stochastic observation with
   the current stepsize and projects back onto the feasible set, and
2. a gossip step: estimates are linearly combined through a sampled
   row-stochastic mixing matrix (applied blockwise, never materializing the
   Kronecker product).

Feasibility of every block is preserved because the gossip step is a convex
combination of projected points and the set is convex.

A single trajectory is inherently sequential; independent Monte Carlo runs
may execute concurrently as long as each owns its generators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gossipopt.constraints import ConstraintSet
from gossipopt.gossip import GossipScheme, Topology, sample_matrix

__all__ = [
    "NetworkState",
    "StepSchedule",
    "RunTrace",
    "ObservationError",
    "local_step",
    "gossip_step",
    "iterate",
    "disagreement",
    "network_average",
    "deviation",
    "initial_state",
    "run",
]


class ObservationError(RuntimeError):
    """A non-finite local observation; carries the offending agent and tick."""

    def __init__(self, agent: int, iteration: int):
        super().__init__(f"non-finite observation for agent {agent} at iteration {iteration}")
        self.agent = agent
        self.iteration = iteration
        self.partial_trace: "RunTrace | None" = None


@dataclass(frozen=True)
class NetworkState:
    """Stacked estimates (theta_1^T, ..., theta_N^T)^T at a given iteration."""

    theta: np.ndarray
    n_agents: int
    dimension: int
    iteration: int = 0

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (self.n_agents * self.dimension,):
            raise ValueError(
                f"stacked state must have length {self.n_agents * self.dimension}, "
                f"got shape {theta.shape}"
            )
        object.__setattr__(self, "theta", theta)

    @property
    def blocks(self) -> np.ndarray:
        """(N, d) view of the stacked vector, one row per agent."""
        return self.theta.reshape(self.n_agents, self.dimension)


@dataclass(frozen=True)
class StepSchedule:
    """Decaying stepsize gamma_n = gamma0(n) / n**xi with xi in (1/2, 1].

    ``changes`` lists (after_iteration, new_gamma0) pairs: the new numerator
    applies to all ticks strictly greater than ``after_iteration``.  Divergent
    sum and square-summability hold automatically for xi in (1/2, 1].
    """

    gamma0: float
    xi: float
    changes: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if not 0.5 < self.xi <= 1.0:
            raise ValueError(f"xi must lie in (1/2, 1], got {self.xi}")
        changes = tuple((int(n), float(g)) for n, g in self.changes)
        if any(g <= 0 for _, g in changes):
            raise ValueError("piecewise gamma0 values must be positive")
        if list(changes) != sorted(changes):
            raise ValueError("piecewise changes must be sorted by iteration")
        object.__setattr__(self, "changes", changes)

    def gamma(self, n: int) -> float:
        if n < 1:
            raise ValueError("stepsize is defined for iterations n >= 1")
        numerator = self.gamma0
        for after, value in self.changes:
            if n > after:
                numerator = value
        return numerator / float(n) ** self.xi


@dataclass
class RunTrace:
    """Strided per-iteration metrics of one trajectory.

    Iterations 0, 1 and the final one are always recorded; ``averages`` holds
    the network-average estimate row-per-record.
    """

    iterations: np.ndarray
    disagreements: np.ndarray
    objectives: np.ndarray
    kkt_residuals: np.ndarray
    deviations: np.ndarray
    averages: np.ndarray

    def __len__(self) -> int:
        return self.iterations.size

    def row_at(self, iteration: int) -> int:
        idx = np.flatnonzero(self.iterations == iteration)
        if idx.size == 0:
            raise KeyError(f"iteration {iteration} was not recorded")
        return int(idx[0])


def local_step(
    state: NetworkState,
    observations: np.ndarray,
    gamma: float,
    constraint_set: ConstraintSet,
) -> np.ndarray:
    """Blockwise projected step: block i becomes P_G[theta_i + gamma * Y_i]."""
    observations = np.asarray(observations, dtype=float)
    if observations.shape != state.theta.shape:
        raise ValueError("observation vector must match the stacked state shape")
    finite = np.isfinite(observations).reshape(state.n_agents, state.dimension).all(axis=1)
    if not finite.all():
        raise ObservationError(int(np.flatnonzero(~finite)[0]), state.iteration + 1)
    moved = state.blocks + gamma * observations.reshape(state.n_agents, state.dimension)
    return constraint_set.project_blocks(moved).reshape(-1)


def gossip_step(temp: np.ndarray, weight_matrix: np.ndarray) -> np.ndarray:
    """Apply the mixing matrix blockwise: output block i = sum_j w(i,j) temp_j."""
    temp = np.asarray(temp, dtype=float)
    n = weight_matrix.shape[0]
    if weight_matrix.shape != (n, n) or temp.size % n != 0:
        raise ValueError(
            f"cannot mix a state of size {temp.size} with a {weight_matrix.shape} matrix"
        )
    d = temp.size // n
    return (weight_matrix @ temp.reshape(n, d)).reshape(-1)


def iterate(
    state: NetworkState,
    problem,
    scheme: GossipScheme,
    topology: Topology,
    schedule,
    rng_observations: np.random.Generator,
    rng_gossip: np.random.Generator | None = None,
    counters: dict | None = None,
) -> NetworkState:
    """One tick: draw observations at the current state, draw an independent
    mixing matrix, apply the local step then the gossip step.

    Observations and mixing matrices are drawn from separate streams when
    ``rng_gossip`` is given, so problems whose oracle consumes a different
    amount of randomness stay comparable under a shared gossip stream.
    """
    if rng_gossip is None:
        rng_gossip = rng_observations
    n = state.iteration + 1
    observations = problem.observe(state.theta, rng_observations)
    weight_matrix = sample_matrix(scheme, topology, n, rng_gossip, counters)
    temp = local_step(state, observations, schedule.gamma(n), problem.constraint_set)
    theta = gossip_step(temp, weight_matrix)
    return NetworkState(theta, state.n_agents, state.dimension, iteration=n)


def disagreement(state: NetworkState) -> float:
    """Norm of the component orthogonal to the consensus subspace."""
    centered = state.blocks - state.blocks.mean(axis=0)
    return float(np.linalg.norm(centered))


def network_average(state: NetworkState) -> np.ndarray:
    """Arithmetic mean of the agents' blocks."""
    return state.blocks.mean(axis=0)


def deviation(state: NetworkState, theta_star: np.ndarray) -> float:
    """Root mean square distance of the agents' estimates to a reference point."""
    theta_star = np.asarray(theta_star, dtype=float)
    diffs = state.blocks - theta_star
    return float(np.sqrt(np.mean(np.sum(diffs * diffs, axis=1))))


def initial_state(problem, rng: np.random.Generator, theta0: np.ndarray | None = None) -> NetworkState:
    """Independent uniform draws from the feasible set, or a supplied start.

    ``theta0`` may be a single d-vector (replicated to all agents) or a full
    stacked vector of length d*N.
    """
    n, d = problem.n_agents, problem.dimension
    if theta0 is not None:
        theta0 = np.asarray(theta0, dtype=float)
        if theta0.shape == (d,):
            theta0 = np.tile(theta0, n)
        return NetworkState(theta0.copy(), n, d, iteration=0)
    blocks = np.stack([problem.constraint_set.sample(rng) for _ in range(n)])
    return NetworkState(blocks.reshape(-1), n, d, iteration=0)


def _record_mask(n_iterations: int, stride: int) -> np.ndarray:
    mask = np.zeros(n_iterations + 1, dtype=bool)
    mask[::stride] = True
    mask[0] = True
    mask[-1] = True
    if n_iterations >= 1:
        mask[1] = True
    return mask


def run(
    problem,
    scheme: GossipScheme,
    topology: Topology,
    schedule,
    n_iterations: int,
    *,
    rng_init: np.random.Generator,
    rng_observations: np.random.Generator,
    rng_gossip: np.random.Generator | None = None,
    stride: int = 1,
    theta_star: np.ndarray | None = None,
    theta0: np.ndarray | None = None,
    counters: dict | None = None,
) -> tuple[NetworkState, RunTrace]:
    """Run one seeded trajectory for a fixed iteration budget and trace it.

    Metrics are evaluated at the network average with the problem's exact
    gradient (a monitoring statistic, not part of the iteration).  The
    deviation column uses ``theta_star`` when given, falling back to the
    problem's reference minimizer, else NaN.

    On a non-finite observation the run aborts with ``ObservationError``
    carrying the partial trace for debugging.
    """
    if n_iterations < 0:
        raise ValueError("iteration budget must be non-negative")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if theta_star is None:
        theta_star = problem.theta_star

    state = initial_state(problem, rng_init, theta0)
    mask = _record_mask(n_iterations, stride)
    n_records = int(mask.sum())
    trace = RunTrace(
        iterations=np.zeros(n_records, dtype=np.int64),
        disagreements=np.zeros(n_records),
        objectives=np.zeros(n_records),
        kkt_residuals=np.zeros(n_records),
        deviations=np.zeros(n_records),
        averages=np.zeros((n_records, problem.dimension)),
    )

    row = 0

    def record(current: NetworkState) -> None:
        nonlocal row
        avg = network_average(current)
        trace.iterations[row] = current.iteration
        trace.disagreements[row] = disagreement(current)
        trace.objectives[row] = problem.objective(avg)
        trace.kkt_residuals[row] = problem.constraint_set.kkt_residual(
            problem.mean_gradient(avg), avg
        )
        trace.deviations[row] = deviation(current, theta_star) if theta_star is not None else np.nan
        trace.averages[row] = avg
        row += 1

    record(state)
    for n in range(1, n_iterations + 1):
        try:
            state = iterate(
                state, problem, scheme, topology, schedule,
                rng_observations, rng_gossip, counters,
            )
        except ObservationError as err:
            err.partial_trace = RunTrace(
                iterations=trace.iterations[:row].copy(),
                disagreements=trace.disagreements[:row].copy(),
                objectives=trace.objectives[:row].copy(),
                kkt_residuals=trace.kkt_residuals[:row].copy(),
                deviations=trace.deviations[:row].copy(),
                averages=trace.averages[:row].copy(),
            )
            raise
        if mask[n]:
            record(state)
    return state, trace
