"""Concrete problem instances and their stochastic observation oracles.

A ``ProblemInstance`` bundles the feasible set, the exact per-agent gradients,
the exact network objective f = (1/N) sum_i f_i, and an observation oracle
that returns, for the full stacked state, one noisy negative-gradient block
per agent: E[Y_i | theta] = -grad f_i(theta_i) with bounded second moment on
the feasible set.

Two benchmark families are provided, plus a configurable synthetic one:

* ``constrained_least_squares`` -- each agent tracks a noisy linear
  measurement; the network minimizes the average squared error over the unit
  disk.  The reference minimizer is solved to high precision by projected
  gradient descent with exact gradients.
* ``power_allocation`` -- transmission powers on an N-pair interference
  channel, minimizing a weighted sum of Gaussian tail error probabilities
  Q(sqrt(SINR)).  Channels are fixed, or drawn per tick from a moment-matched
  Rician fading law.
* ``least_squares_targets`` -- agents pull toward private target points under
  Gaussian observation noise; the minimizer is the projected target mean.

Instances are immutable after construction; oracle calls take an explicit
generator and are otherwise pure.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erfc
from scipy.stats import ncx2

from gossipopt.constraints import Ball, Box, ConstraintSet

__all__ = [
    "ProblemInstance",
    "InterferenceChannel",
    "RicianFading",
    "constrained_least_squares",
    "solve_least_squares_minimizer",
    "least_squares_targets",
    "power_allocation",
    "gaussian_tail",
    "sinr",
    "error_probability",
    "error_probability_gradient",
    "weighted_error_sum",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A distributed optimization problem with a stochastic gradient oracle.

    ``observe`` maps the stacked state and a generator to the stacked
    observation vector; block i depends on agent i's own estimate only.
    ``mean_gradient`` is the exact gradient of the network objective, used
    for monitoring and by the flow solver, never by the iteration itself.
    """

    dimension: int
    n_agents: int
    constraint_set: ConstraintSet
    objective: Callable[[np.ndarray], float]
    gradient_i: Callable[[int, np.ndarray], np.ndarray]
    mean_gradient: Callable[[np.ndarray], np.ndarray]
    observe: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    theta_star: np.ndarray | None = None
    description: str = ""


# ---------------------------------------------------------------------------
# Constrained least squares on the unit disk
# ---------------------------------------------------------------------------


def solve_least_squares_minimizer(
    directions: np.ndarray,
    constraint_set: ConstraintSet,
    tol: float = 1e-12,
    max_iterations: int = 1_000_000,
) -> np.ndarray:
    """Minimizer of sum_i (0.5 - s_i^T theta)^2 over the feasible set.

    Exact projected gradient descent with stepsize 1/L, L = 2 lambda_max of
    sum_i s_i s_i^T, iterated until the update norm drops below ``tol``.
    """
    s = np.asarray(directions, dtype=float)
    gram = s.T @ s
    lipschitz = 2.0 * float(np.linalg.eigvalsh(gram)[-1])
    theta = constraint_set.project(np.zeros(s.shape[1]))
    if lipschitz == 0.0:
        return theta
    step = 1.0 / lipschitz
    for _ in range(max_iterations):
        grad = 2.0 * s.T @ (s @ theta - 0.5)
        new = constraint_set.project(theta - step * grad)
        if float(np.linalg.norm(new - theta)) < tol:
            return new
        theta = new
    raise RuntimeError("least-squares reference solve did not reach tolerance")


def constrained_least_squares(n_agents: int, rng: np.random.Generator) -> ProblemInstance:
    """Average of per-agent squared linear measurement errors on the unit disk.

    Agent i owns f_i(theta) = E[(R_i - s_i^T theta)^2] with R_i ~ N(0.5, 1)
    and a direction s_i drawn once, uniformly from the disk.  The observation
    oracle redraws R_i on every call, so its mean is the exact negative
    gradient 2 s_i (0.5 - s_i^T theta_i).
    """
    constraint_set = Ball(center=np.zeros(2), radius=1.0)
    s = np.stack([constraint_set.sample(rng) for _ in range(n_agents)])
    theta_star = solve_least_squares_minimizer(s, constraint_set)

    def objective(theta: np.ndarray) -> float:
        residual = 0.5 - s @ theta
        return 1.0 + float(np.mean(residual**2))

    def gradient_i(i: int, theta: np.ndarray) -> np.ndarray:
        return 2.0 * s[i] * (float(s[i] @ theta) - 0.5)

    def mean_gradient(theta: np.ndarray) -> np.ndarray:
        return (2.0 / n_agents) * (s.T @ (s @ theta - 0.5))

    def observe(theta_stacked: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        blocks = theta_stacked.reshape(n_agents, 2)
        rewards = rng.normal(0.5, 1.0, n_agents)
        residual = rewards - np.sum(s * blocks, axis=1)
        return (2.0 * s * residual[:, None]).reshape(-1)

    return ProblemInstance(
        dimension=2,
        n_agents=n_agents,
        constraint_set=constraint_set,
        objective=objective,
        gradient_i=gradient_i,
        mean_gradient=mean_gradient,
        observe=observe,
        theta_star=theta_star,
        description=f"constrained least squares, N={n_agents}",
    )


# ---------------------------------------------------------------------------
# Synthetic target-tracking family (configurable constraint set)
# ---------------------------------------------------------------------------


def least_squares_targets(
    targets: np.ndarray,
    noise_std: float,
    constraint_set: ConstraintSet,
) -> ProblemInstance:
    """Agents pull toward private targets: f_i(theta) = 0.5 |theta - t_i|^2.

    The network minimizer is the projection of the target mean onto the set.
    """
    targets = np.asarray(targets, dtype=float)
    n_agents, dimension = targets.shape
    if dimension != constraint_set.dimension:
        raise ValueError("target dimension does not match the constraint set")
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    mean_target = targets.mean(axis=0)

    def objective(theta: np.ndarray) -> float:
        diffs = theta - targets
        return 0.5 * float(np.mean(np.sum(diffs * diffs, axis=1)))

    def gradient_i(i: int, theta: np.ndarray) -> np.ndarray:
        return theta - targets[i]

    def mean_gradient(theta: np.ndarray) -> np.ndarray:
        return theta - mean_target

    def observe(theta_stacked: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        blocks = theta_stacked.reshape(n_agents, dimension)
        noise = rng.normal(0.0, noise_std, blocks.shape) if noise_std > 0 else 0.0
        return (targets - blocks + noise).reshape(-1)

    return ProblemInstance(
        dimension=dimension,
        n_agents=n_agents,
        constraint_set=constraint_set,
        objective=objective,
        gradient_i=gradient_i,
        mean_gradient=mean_gradient,
        observe=observe,
        theta_star=constraint_set.project(mean_target),
        description=f"target tracking, N={n_agents}, d={dimension}",
    )


# ---------------------------------------------------------------------------
# Power allocation on the interference channel
# ---------------------------------------------------------------------------


def gaussian_tail(x: float | np.ndarray):
    """Q(x) = P(Z > x) for standard normal Z, via the complementary error function."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


@dataclass(frozen=True, eq=False)
class InterferenceChannel:
    """An N-pair interference channel.

    ``gains[j, i]`` is the (positive) channel gain from source j to
    destination i; destination i sees useful power gains[i, i] * p_i and
    interference sum_{j != i} gains[j, i] * p_j on top of noise.
    """

    gains: np.ndarray
    noise_vars: np.ndarray
    max_powers: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float)
        n = gains.shape[0]
        if gains.shape != (n, n):
            raise ValueError("gains must be a square matrix")
        noise = np.broadcast_to(np.asarray(self.noise_vars, dtype=float), (n,)).copy()
        powers = np.broadcast_to(np.asarray(self.max_powers, dtype=float), (n,)).copy()
        weights = np.broadcast_to(np.asarray(self.weights, dtype=float), (n,)).copy()
        for name, arr in (("gains", gains), ("noise_vars", noise),
                          ("max_powers", powers), ("weights", weights)):
            if not np.all(arr > 0):
                raise ValueError(f"{name} must be strictly positive")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "noise_vars", noise)
        object.__setattr__(self, "max_powers", powers)
        object.__setattr__(self, "weights", weights)

    @property
    def n_pairs(self) -> int:
        return self.gains.shape[0]

    @classmethod
    def from_dict(cls, spec: dict) -> "InterferenceChannel":
        return cls(
            gains=np.asarray(spec["gains"], dtype=float),
            noise_vars=np.asarray(spec["noise_vars"], dtype=float),
            max_powers=np.asarray(spec["max_powers"], dtype=float),
            weights=np.asarray(spec["weights"], dtype=float),
        )


def _sinr_core(powers: np.ndarray, gains_col: np.ndarray, noise_var: float, i: int):
    """Signal and interference-plus-noise terms; gains_col[..., j] feeds pair i."""
    signal = gains_col[..., i] * powers[i]
    denom = noise_var + gains_col @ powers - signal
    return signal, denom


def sinr(channel: InterferenceChannel, powers: np.ndarray, i: int) -> float:
    """Signal to interference-plus-noise ratio at destination i."""
    powers = np.asarray(powers, dtype=float)
    signal, denom = _sinr_core(powers, channel.gains[:, i], channel.noise_vars[i], i)
    return float(signal / denom)


def error_probability(channel: InterferenceChannel, powers: np.ndarray, i: int) -> float:
    """Q(sqrt(SINR_i)); equals 0.5 at zero own power and decreases with it."""
    powers = np.asarray(powers, dtype=float)
    if np.any(powers < 0) or np.any(powers > channel.max_powers):
        raise ValueError("powers must lie in the feasible box")
    return float(gaussian_tail(math.sqrt(sinr(channel, powers, i))))


def _error_gradient_core(powers: np.ndarray, gains_col: np.ndarray, noise_var: float, i: int):
    """Gradient of Q(sqrt(SINR_i)) w.r.t. all powers, vectorized over gains.

    ``gains_col`` has shape (..., N); the result matches that shape.  Requires
    positive own power (the tail derivative is singular at zero SINR).
    """
    signal, denom = _sinr_core(powers, gains_col, noise_var, i)
    ratio = signal / denom
    x = np.sqrt(ratio)
    density = np.exp(-0.5 * ratio) / _SQRT_2PI
    common = density / (2.0 * x * denom)
    grad = (common * ratio)[..., None] * gains_col
    grad[..., i] = -common * gains_col[..., i]
    return grad


def error_probability_gradient(
    channel: InterferenceChannel,
    powers: np.ndarray,
    i: int,
    log_scale: bool = False,
) -> np.ndarray:
    """Exact gradient of the error probability of pair i w.r.t. all powers.

    With ``log_scale`` the chain-rule factor p_k multiplies coordinate k,
    giving the gradient in the log-power parametrization; this requires all
    powers strictly positive.
    """
    powers = np.asarray(powers, dtype=float)
    if powers[i] <= 0.0:
        raise ValueError("gradient undefined at zero own power (zero SINR)")
    if log_scale and np.any(powers <= 0.0):
        raise ValueError("log-power parametrization undefined at zero power")
    grad = _error_gradient_core(powers, channel.gains[:, i], channel.noise_vars[i], i)
    if log_scale:
        grad = grad * powers
    return grad


def weighted_error_sum(channel: InterferenceChannel, powers: np.ndarray) -> float:
    """sum_i weights_i * Q(sqrt(SINR_i)): the landscape quantity."""
    return float(
        sum(channel.weights[i] * error_probability(channel, powers, i)
            for i in range(channel.n_pairs))
    )


@dataclass(frozen=True, eq=False)
class RicianFading:
    """Random channel gains with fixed per-entry mean and common variance.

    Each gain is the squared magnitude of a complex Gaussian with a
    deterministic line-of-sight component: A = (nu + s X)^2 + (s Y)^2 with
    X, Y standard normal.  Matching E[A] = m and Var[A] = v gives
    s^2 = (m - sqrt(m^2 - v)) / 2 and nu^2 = sqrt(m^2 - v), which requires
    v <= m^2 entrywise.
    """

    means: np.ndarray
    variance: float

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        if np.any(means <= 0):
            raise ValueError("gain means must be strictly positive")
        if self.variance < 0:
            raise ValueError("variance must be non-negative")
        if np.any(self.variance > means**2):
            raise ValueError(
                "infeasible moment pair: variance exceeds squared mean for some entry"
            )
        root = np.sqrt(means**2 - self.variance)
        scatter_var = (means - root) / 2.0
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "_los", np.sqrt(root))
        object.__setattr__(self, "_scatter_std", np.sqrt(scatter_var))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """One matrix of independent gains.

        The degenerate law (zero variance) returns the means exactly, so it
        reproduces a fixed-channel run bit for bit.
        """
        if self.variance == 0.0:
            return self.means.copy()
        shape = self.means.shape
        x = rng.standard_normal(shape)
        y = rng.standard_normal(shape)
        return (self._los + self._scatter_std * x) ** 2 + (self._scatter_std * y) ** 2


class _FadingQuadrature:
    """Deterministic quadrature for means over the fading law.

    Each gain, rescaled by its scatter variance, follows a noncentral
    chi-square with two degrees of freedom; per-entry Gauss-Legendre nodes on
    a high-coverage interval are combined tensorially over the gains feeding
    one destination.  Intended for small channels (the grid is nodes**N).
    """

    def __init__(self, channel: InterferenceChannel, fading: RicianFading, n_nodes: int = 80):
        if channel.n_pairs > 3:
            raise NotImplementedError(
                "tensor quadrature over the fading law is limited to N <= 3 pairs"
            )
        self.channel = channel
        n = channel.n_pairs
        self._nodes = np.empty((n, n), dtype=object)
        self._weights = np.empty((n, n), dtype=object)
        for j in range(n):
            for i in range(n):
                std = float(fading._scatter_std[j, i])
                mean = float(fading.means[j, i])
                if std == 0.0:
                    self._nodes[j, i] = np.array([mean])
                    self._weights[j, i] = np.array([1.0])
                    continue
                scale = std**2
                noncentrality = float(fading._los[j, i]) ** 2 / scale
                lo = scale * float(ncx2.ppf(1e-12, 2, noncentrality))
                hi = scale * float(ncx2.ppf(1.0 - 1e-12, 2, noncentrality))
                points, base_weights = np.polynomial.legendre.leggauss(n_nodes)
                nodes = 0.5 * (hi - lo) * points + 0.5 * (hi + lo)
                density = ncx2.pdf(nodes / scale, 2, noncentrality) / scale
                weights = 0.5 * (hi - lo) * base_weights * density
                self._nodes[j, i] = nodes
                self._weights[j, i] = weights / weights.sum()
        self._grids: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _column_grid(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        if i not in self._grids:
            n = self.channel.n_pairs
            node_lists = [self._nodes[j, i] for j in range(n)]
            weight_lists = [self._weights[j, i] for j in range(n)]
            gains = np.array(list(itertools.product(*node_lists)))
            weights = np.prod(
                np.array(list(itertools.product(*weight_lists))), axis=1
            )
            self._grids[i] = (gains, weights)
        return self._grids[i]

    def expected_probability(self, powers: np.ndarray, i: int) -> float:
        gains, weights = self._column_grid(i)
        signal, denom = _sinr_core(powers, gains, float(self.channel.noise_vars[i]), i)
        return float(weights @ gaussian_tail(np.sqrt(signal / denom)))

    def expected_gradient(self, powers: np.ndarray, i: int) -> np.ndarray:
        gains, weights = self._column_grid(i)
        grads = _error_gradient_core(powers, gains, float(self.channel.noise_vars[i]), i)
        return weights @ grads


def power_allocation(
    channel: InterferenceChannel,
    fading: RicianFading | None = None,
    log_scale: bool = True,
    power_floor: float = 1e-3,
    theta_star: np.ndarray | None = None,
    quadrature_nodes: int = 80,
) -> ProblemInstance:
    """Cooperative power selection minimizing the weighted mean error probability.

    Every agent estimates the whole power vector (d = N); agent i's
    observation block is the negative weighted gradient of its own error
    probability, evaluated at its own estimate against either the fixed gains
    or a fresh fading draw.  With ``log_scale`` the blocks carry the
    log-power chain-rule factor while projection stays in power space, on the
    box [power_floor, max_power] (the floor also keeps the gradient away from
    its zero-power singularity).
    """
    n = channel.n_pairs
    if not 0.0 < power_floor < float(np.min(channel.max_powers)):
        raise ValueError("power_floor must be positive and below every max power")
    if fading is not None and fading.means.shape != (n, n):
        raise ValueError("fading means must match the channel size")
    constraint_set = Box(lower=np.full(n, power_floor), upper=channel.max_powers.copy())
    quadrature = _FadingQuadrature(channel, fading, quadrature_nodes) if fading is not None else None

    if quadrature is None:
        def objective(theta: np.ndarray) -> float:
            return weighted_error_sum(channel, theta) / n

        def gradient_i(i: int, theta: np.ndarray) -> np.ndarray:
            return channel.weights[i] * error_probability_gradient(channel, theta, i)
    else:
        def objective(theta: np.ndarray) -> float:
            return float(
                sum(channel.weights[i] * quadrature.expected_probability(theta, i)
                    for i in range(n))
            ) / n

        def gradient_i(i: int, theta: np.ndarray) -> np.ndarray:
            return channel.weights[i] * quadrature.expected_gradient(theta, i)

    def mean_gradient(theta: np.ndarray) -> np.ndarray:
        total = np.zeros(n)
        for i in range(n):
            total += gradient_i(i, theta)
        return total / n

    if fading is None:
        def observe(theta_stacked: np.ndarray, rng: np.random.Generator) -> np.ndarray:
            blocks = theta_stacked.reshape(n, n)
            out = np.empty_like(blocks)
            for i in range(n):
                grad = _error_gradient_core(
                    blocks[i], channel.gains[:, i], float(channel.noise_vars[i]), i
                )
                out[i] = -channel.weights[i] * grad
                if log_scale:
                    out[i] *= blocks[i]
            return out.reshape(-1)
    else:
        def observe(theta_stacked: np.ndarray, rng: np.random.Generator) -> np.ndarray:
            blocks = theta_stacked.reshape(n, n)
            draw = fading.sample(rng)
            out = np.empty_like(blocks)
            for i in range(n):
                grad = _error_gradient_core(
                    blocks[i], draw[:, i], float(channel.noise_vars[i]), i
                )
                out[i] = -channel.weights[i] * grad
                if log_scale:
                    out[i] *= blocks[i]
            return out.reshape(-1)

    mode = "fading" if fading is not None else "fixed"
    return ProblemInstance(
        dimension=n,
        n_agents=n,
        constraint_set=constraint_set,
        objective=objective,
        gradient_i=gradient_i,
        mean_gradient=mean_gradient,
        observe=observe,
        theta_star=None if theta_star is None else np.asarray(theta_star, dtype=float),
        description=f"power allocation, {mode} channel, N={n}",
    )
