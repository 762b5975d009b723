"""Scalar interference-channel arithmetic for the landscape figure.

Kept to the two formulas the figure needs (Gaussian tail of the root SINR,
and its weighted sum over links), implemented with the standard library so
the plotting package stays independent of the simulator.  The test suite
cross-checks these values against the simulator's own `landscape` CSV export.
"""

from __future__ import annotations

import math


def gaussian_tail(x: float) -> float:
    """Q(x): upper tail probability of the standard normal."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def error_probability(channel: dict, powers: list[float], link: int) -> float:
    """Q(sqrt(SINR)) at the given destination for a power vector."""
    gains = channel["gains"]
    signal = gains[link][link] * powers[link]
    interference = channel["noise_vars"][link]
    for j, p in enumerate(powers):
        if j != link:
            interference += gains[j][link] * p
    return gaussian_tail(math.sqrt(signal / interference))


def weighted_error_sum(channel: dict, powers: list[float]) -> float:
    """The landscape objective: weighted sum of link error probabilities."""
    return sum(
        channel["weights"][i] * error_probability(channel, powers, i)
        for i in range(len(powers))
    )
