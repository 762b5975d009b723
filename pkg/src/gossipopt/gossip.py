"""Random gossip matrix schemes over an undirected communication graph.

Two standard one-wake-up-per-tick schemes are provided:

* pairwise: the woken node and one uniformly chosen neighbour symmetrically
  average their states; every sampled matrix is doubly stochastic.
* broadcast: the woken node pushes its state to all neighbours with no
  feedback link; sampled matrices are row stochastic only, but their
  expectation is column stochastic.

Either scheme can be thinned so that communication happens at tick n only
with probability min(1, a / n**eta) and the matrix is the identity otherwise.

Expectation-level statistics (expected matrix, spectral norm of
E[W^T (I - 11^T/N) W]) are computed by exact enumeration of the wake-up
events rather than by Monte Carlo.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "ConfigurationError",
    "Topology",
    "Rarefaction",
    "PairwiseGossip",
    "BroadcastGossip",
    "pairwise_matrix",
    "broadcast_matrix",
    "sample_matrix",
    "expected_matrix",
    "spectral_rho",
    "rho_n",
    "validate_rarefaction",
]


class ConfigurationError(ValueError):
    """Raised for parameter combinations that break the method's requirements."""


@dataclass(frozen=True, eq=True)
class Topology:
    """Undirected graph on agents 0..n_agents-1 with no self-loops."""

    n_agents: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("n_agents must be positive")
        canonical = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < self.n_agents and 0 <= j < self.n_agents):
                raise ValueError(f"edge ({i}, {j}) out of range")
            canonical.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(canonical)))

    @classmethod
    def complete(cls, n_agents: int) -> "Topology":
        edges = tuple((i, j) for i in range(n_agents) for j in range(i + 1, n_agents))
        return cls(n_agents, edges)

    @classmethod
    def cycle(cls, n_agents: int) -> "Topology":
        if n_agents < 3:
            return cls.complete(n_agents)
        edges = tuple((i, (i + 1) % n_agents) for i in range(n_agents))
        return cls(n_agents, edges)

    @classmethod
    def from_edge_list(cls, n_agents: int, edges) -> "Topology":
        return cls(n_agents, tuple((int(i), int(j)) for i, j in edges))

    @cached_property
    def neighbors(self) -> tuple[np.ndarray, ...]:
        lists: list[list[int]] = [[] for _ in range(self.n_agents)]
        for i, j in self.edges:
            lists[i].append(j)
            lists[j].append(i)
        return tuple(np.array(sorted(nb), dtype=int) for nb in lists)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([nb.size for nb in self.neighbors], dtype=int)

    @cached_property
    def is_connected(self) -> bool:
        if self.n_agents == 1:
            return True
        seen = np.zeros(self.n_agents, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            node = stack.pop()
            for nb in self.neighbors[node]:
                if not seen[nb]:
                    seen[nb] = True
                    stack.append(int(nb))
        return bool(seen.all())


@dataclass(frozen=True)
class Rarefaction:
    """Communication thinning: P(communicate at tick n) = min(1, a / n**eta)."""

    a: float
    eta: float

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigurationError(f"rarefaction scale a must be positive, got {self.a}")
        if not 0.0 <= self.eta < 0.5:
            raise ConfigurationError(f"rarefaction exponent eta must lie in [0, 0.5), got {self.eta}")

    def communication_probability(self, n: int) -> float:
        if n < 1:
            raise ValueError("tick index must be >= 1 for thinned schemes")
        return min(1.0, self.a / float(n) ** self.eta)


@dataclass(frozen=True)
class PairwiseGossip:
    """Symmetric pairwise averaging; mixing weight beta in (0, 1)."""

    beta: float = 0.5
    rarefaction: Rarefaction | None = None

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ConfigurationError(f"beta must lie in (0, 1), got {self.beta}")


@dataclass(frozen=True)
class BroadcastGossip:
    """One-way broadcast averaging; receivers weight the sender by beta."""

    beta: float = 0.5
    rarefaction: Rarefaction | None = None

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ConfigurationError(f"beta must lie in (0, 1), got {self.beta}")


GossipScheme = PairwiseGossip | BroadcastGossip


def pairwise_matrix(n_agents: int, i: int, j: int, beta: float = 0.5) -> np.ndarray:
    """Mixing matrix for the pair (i, j): rows i and j average symmetrically.

    w(i,i) = w(j,j) = beta and w(i,j) = w(j,i) = 1 - beta, all other rows
    identity, so the matrix is doubly stochastic for every beta.
    """
    if i == j:
        raise ValueError("pairwise event needs two distinct nodes")
    w = np.eye(n_agents)
    w[i, i] = beta
    w[i, j] = 1.0 - beta
    w[j, j] = beta
    w[j, i] = 1.0 - beta
    return w


def broadcast_matrix(topology: Topology, i: int, beta: float = 0.5) -> np.ndarray:
    """Mixing matrix when node i broadcasts to all its neighbours.

    Each neighbour k averages w(k,i) = beta against w(k,k) = 1 - beta; every
    other row (including the broadcaster's) stays identity.  Row stochastic,
    but not column stochastic whenever i has at least one neighbour.
    """
    w = np.eye(topology.n_agents)
    for k in topology.neighbors[i]:
        w[k, k] = 1.0 - beta
        w[k, i] = beta
    return w


def sample_matrix(
    scheme: GossipScheme,
    topology: Topology,
    n: int,
    rng: np.random.Generator,
    counters: dict | None = None,
) -> np.ndarray:
    """Draw one mixing matrix for tick n.

    Deterministic given the generator state.  If the woken node has no
    neighbours the identity matrix is returned (no resampling) and the
    ``isolated_wakeups`` counter is bumped when ``counters`` is supplied.
    """
    if scheme.rarefaction is not None:
        if rng.random() >= scheme.rarefaction.communication_probability(n):
            return np.eye(topology.n_agents)
    i = int(rng.integers(topology.n_agents))
    neighbors = topology.neighbors[i]
    if neighbors.size == 0:
        if counters is not None:
            counters["isolated_wakeups"] = counters.get("isolated_wakeups", 0) + 1
        return np.eye(topology.n_agents)
    if isinstance(scheme, PairwiseGossip):
        j = int(neighbors[rng.integers(neighbors.size)])
        return pairwise_matrix(topology.n_agents, i, j, scheme.beta)
    return broadcast_matrix(topology, i, scheme.beta)


def _event_probabilities(scheme: GossipScheme, topology: Topology):
    """Yield (probability, matrix) over all wake-up events of the base scheme."""
    n = topology.n_agents
    wake_p = 1.0 / n
    for i in range(n):
        neighbors = topology.neighbors[i]
        if neighbors.size == 0:
            yield wake_p, np.eye(n)
            continue
        if isinstance(scheme, PairwiseGossip):
            pick_p = wake_p / neighbors.size
            for j in neighbors:
                yield pick_p, pairwise_matrix(n, i, int(j), scheme.beta)
        else:
            yield wake_p, broadcast_matrix(topology, i, scheme.beta)


def expected_matrix(scheme: GossipScheme, topology: Topology, n: int | None = None) -> np.ndarray:
    """Exact E[W] by enumeration of wake-up events.

    For thinned schemes the tick index ``n`` must be given so the silence
    probability can be folded in; without thinning ``n`` is ignored.
    """
    base = np.zeros((topology.n_agents, topology.n_agents))
    for p, w in _event_probabilities(scheme, topology):
        base += p * w
    if scheme.rarefaction is None:
        return base
    if n is None:
        raise ValueError("thinned scheme: pass the tick index n to evaluate E[W_n]")
    p_comm = scheme.rarefaction.communication_probability(n)
    return (1.0 - p_comm) * np.eye(topology.n_agents) + p_comm * base


def spectral_rho(scheme: GossipScheme, topology: Topology) -> float:
    """Spectral norm of E[W^T (I - 11^T/N) W] for the base communication event.

    Built by exact event enumeration and a symmetric eigendecomposition.
    Strictly below 1 exactly when the graph is connected; any thinning on the
    scheme is ignored here (see ``rho_n`` for the per-tick value).
    """
    n = topology.n_agents
    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    accum = np.zeros((n, n))
    for p, w in _event_probabilities(scheme, topology):
        accum += p * (w.T @ centering @ w)
    eigenvalues = np.linalg.eigvalsh(accum)
    return float(eigenvalues[-1])


def rho_n(scheme: GossipScheme, topology: Topology, n: int) -> float:
    """Per-tick spectral norm for a thinned scheme.

    Thinning mixes the base event with the identity, and both matrices act as
    the identity on the consensus direction, so the gap scales exactly:
    1 - rho_n = P(communicate at n) * (1 - rho_base).
    """
    if scheme.rarefaction is None:
        raise ConfigurationError("rho_n requires a scheme with rarefaction configured")
    p_comm = scheme.rarefaction.communication_probability(n)
    return 1.0 - p_comm * (1.0 - spectral_rho(scheme, topology))


def validate_rarefaction(scheme: GossipScheme, schedule) -> None:
    """Check the thinning exponent against the stepsize decay exponent.

    For 1 - rho_n ~ a / n**eta and gamma_n ~ gamma0 / n**xi the iteration's
    stepsize/connectivity requirements hold when 0 <= eta < xi - 1/2 <= 1/2.
    Raises ``ConfigurationError`` when violated; no-op without thinning.
    """
    if scheme.rarefaction is None:
        return
    eta = scheme.rarefaction.eta
    xi = schedule.xi
    if not eta < xi - 0.5:
        raise ConfigurationError(
            "incompatible thinning/stepsize exponents: need 0 <= eta < xi - 1/2 <= 1/2, "
            f"got eta={eta} and xi - 1/2 = {xi - 0.5}"
        )
