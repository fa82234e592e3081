"""Closed-form constants and published threshold tables."""

from __future__ import annotations

import math

from scipy.special import ndtr
from scipy.stats import norm

from .exceptions import InvalidArgumentError

# Monte Carlo values at M = 10^7 Wiener trajectories
PUBLISHED_B = {0.01: 1.814, 0.02: 1.636, 0.03: 1.524, 0.04: 1.440, 0.05: 1.373, 0.1: 1.144}
PUBLISHED_C = {0.01: 13.692, 0.02: 11.224, 0.03: 9.803, 0.04: 8.806, 0.05: 8.042, 0.1: 5.719}
PUBLISHED_E = {0.05: 0.056}


def check_epsilon(epsilon: float) -> float:
    if not 0.0 < epsilon < 1.0:
        raise InvalidArgumentError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    return float(epsilon)


def z_upper(a: float) -> float:
    """z_a with P(zeta > z_a) = a for standard normal zeta."""
    if not 0.0 < a < 1.0:
        raise InvalidArgumentError("tail probability must lie in (0, 1)")
    return float(norm.isf(a))


def a_epsilon(epsilon: float) -> float:
    """Score-test threshold (1 - z^2) / 2 with z = z_{(1 - epsilon) / 2}."""
    z = z_upper((1.0 - check_epsilon(epsilon)) / 2.0)
    return (1.0 - z * z) / 2.0


def h_of_u(u: float) -> float:
    """sqrt(2u / (1 - e^{-2u})), equal to 1 at u = 0."""
    if not u >= 0:
        raise InvalidArgumentError("u must be >= 0")
    if u == 0:
        return 1.0
    return math.sqrt(2.0 * u / -math.expm1(-2.0 * u))


def limit_power_score(u: float, epsilon: float) -> float:
    """Limit power of the score test, 2 Phi(h(u) z) - 1."""
    z = z_upper((1.0 - check_epsilon(epsilon)) / 2.0)
    return float(2.0 * ndtr(h_of_u(u) * z) - 1.0)
