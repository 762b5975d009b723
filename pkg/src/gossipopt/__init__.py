"""Distributed constrained stochastic optimization over random gossip networks.

Agents hold local estimates of a shared decision vector, take projected
stochastic gradient steps on their private utilities, and mix estimates
through randomly sampled row-stochastic matrices.  The package provides the
iteration, the gossip matrix schemes and their spectral statistics, the
constraint-set geometry, a projected-gradient-flow verification oracle, and
a seeded Monte Carlo experiment harness with a CLI.
"""

__version__ = "0.1.0"

from gossipopt.constraints import Ball, Box, ConstraintSet, HalfspaceIntersection
from gossipopt.gossip import (
    BroadcastGossip,
    ConfigurationError,
    PairwiseGossip,
    Rarefaction,
    Topology,
)
from gossipopt.optimizer import NetworkState, RunTrace, StepSchedule
from gossipopt.problems import (
    InterferenceChannel,
    ProblemInstance,
    RicianFading,
    constrained_least_squares,
    least_squares_targets,
    power_allocation,
)

__all__ = [
    "__version__",
    "Ball",
    "Box",
    "ConstraintSet",
    "HalfspaceIntersection",
    "BroadcastGossip",
    "ConfigurationError",
    "PairwiseGossip",
    "Rarefaction",
    "Topology",
    "NetworkState",
    "RunTrace",
    "StepSchedule",
    "InterferenceChannel",
    "ProblemInstance",
    "RicianFading",
    "constrained_least_squares",
    "least_squares_targets",
    "power_allocation",
]
