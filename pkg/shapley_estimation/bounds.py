"""
Non-asymptotic sample-complexity calculators.

Group testing (both variants) is bounded with Bennett's inequality applied to the unscaled
statistic zeta = (beta_i - beta_j) U(S), which lies in [-1, 1] and has second moment at most
1 - q_tot, followed by a union bound over the estimated differences. Permutation sampling is
bounded with Hoeffding's inequality; see docs/Development.md for the constants.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

from scipy.optimize import brentq

from shapley_estimation.constants import (
    AUGMENTED,
    BENNETT_SERIES_CUTOFF,
    GT_IMPROVED,
    GT_ORIGINAL,
    METHODS,
    ORIGINAL,
    PERMUTATION,
)
from shapley_estimation.model import InvalidParameter
from shapley_estimation.sampling import build_distribution, q_tot


@dataclass(frozen=True)
class BoundQuery:
    n_players: int
    epsilon: float
    delta: float
    variant: str

    def __post_init__(self):
        if self.variant not in METHODS:
            raise InvalidParameter(f"Unknown bound variant '{self.variant}'; expected one of {', '.join(METHODS)}")
        if self.n_players < 2:
            raise InvalidParameter(f"Bounds need at least 2 players, got {self.n_players}")
        if not self.epsilon > 0:
            raise InvalidParameter(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise InvalidParameter(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class BoundResult:
    """
    T is the smallest integer meeting the bound: samples for group testing, permutations for
    permutation sampling. `utility_evals` is the nominal number of utility evaluations at T.
    """
    query: BoundQuery
    T: int
    raw_bound: float
    utility_evals: int
    Z: Optional[float] = None
    q_tot: Optional[float] = None
    h_argument: Optional[float] = None


def bennett_h(u):
    """h(u) = (1 + u) log(1 + u) - u, switching to u^2/2 - u^3/6 near zero."""
    if u < 0:
        raise InvalidParameter(f"bennett_h is defined for u >= 0, got {u}")
    if u < BENNETT_SERIES_CUTOFF:
        return u * u / 2.0 - u ** 3 / 6.0
    return (1.0 + u) * math.log1p(u) - u


def _bennett_parts(n_players, variant):
    """(distribution, q_tot, union-bound count, h argument per unit epsilon) for a gt variant."""
    if variant == GT_ORIGINAL:
        dist = build_distribution(n_players, ORIGINAL)
        qt = q_tot(dist)
        scale = 1.0 / (2.0 * dist.Z * math.sqrt(n_players) * (1.0 - qt))
        count = n_players * (n_players - 1)
    elif variant == GT_IMPROVED:
        dist = build_distribution(n_players, AUGMENTED)
        qt = q_tot(dist)
        scale = 1.0 / (dist.Z * math.sqrt(n_players + 1) * (1.0 - qt))
        count = n_players
    else:
        raise InvalidParameter(f"Bennett bounds cover the group-testing variants only, not '{variant}'")

    if abs(dist.Z * (1.0 - qt) - 2.0) > 1e-9:
        logging.getLogger(__name__).warning(
            "Z(1 - q_tot) = %r for N=%d (%s); expected 2", dist.Z * (1.0 - qt), n_players, variant
        )
    return dist, qt, count, scale


def required_T(query):
    """Smallest number of group-testing samples giving an (epsilon, delta)-approximation."""
    dist, qt, count, scale = _bennett_parts(query.n_players, query.variant)
    argument = query.epsilon * scale
    raw = math.log(count / query.delta) / ((1.0 - qt) * bennett_h(argument))
    T = max(1, math.ceil(raw))
    return BoundResult(
        query=query, T=T, raw_bound=raw, utility_evals=T, Z=dist.Z, q_tot=qt, h_argument=argument
    )


def required_permutations(query):
    """
    m = ceil((2N / epsilon^2) log(2N / delta)) permutations.

    Each marginal contribution lies in [-1, 1]; Hoeffding with per-player target epsilon/sqrt(N)
    and a union bound over the N players gives m. Each permutation costs N + 1 evaluations.
    """
    if query.variant != PERMUTATION:
        raise InvalidParameter(f"required_permutations covers the permutation variant only, not '{query.variant}'")

    n = query.n_players
    raw = (2.0 * n / query.epsilon ** 2) * math.log(2.0 * n / query.delta)
    m = max(1, math.ceil(raw))
    return BoundResult(query=query, T=m, raw_bound=raw, utility_evals=m * (n + 1))


def bound_for(query):
    """required_T or required_permutations, whichever matches the query's variant."""
    if query.variant == PERMUTATION:
        return required_permutations(query)
    return required_T(query)


def _log_failure(n_players, epsilon, T, variant):
    """Natural log of the union-bounded tail before it is capped at 1."""
    if variant == PERMUTATION:
        return math.log(2.0 * n_players) - T * epsilon ** 2 / (2.0 * n_players)

    _, qt, count, scale = _bennett_parts(n_players, variant)
    return math.log(count) - T * (1.0 - qt) * bennett_h(epsilon * scale)


def failure_probability(n_players, epsilon, T, variant):
    """The probability bound of missing epsilon in l2 after T samples (or permutations)."""
    if not epsilon > 0:
        raise InvalidParameter(f"epsilon must be positive, got {epsilon}")
    if T < 1:
        raise InvalidParameter(f"T must be at least 1, got {T}")

    exponent = _log_failure(n_players, epsilon, T, variant)
    return 1.0 if exponent >= 0 else math.exp(exponent)


def achievable_epsilon(n_players, delta, T, variant, upper=1e6):
    """
    Smallest epsilon guaranteed with probability 1 - delta after T samples (or permutations).

    :return: (float) - math.inf when no epsilon up to `upper` reaches delta
    """
    if not 0 < delta < 1:
        raise InvalidParameter(f"delta must lie in (0, 1), got {delta}")
    if T < 1:
        raise InvalidParameter(f"T must be at least 1, got {T}")

    if variant == PERMUTATION:
        return math.sqrt(2.0 * n_players * math.log(2.0 * n_players / delta) / T)

    def excess(epsilon):
        return _log_failure(n_players, epsilon, T, variant) - math.log(delta)

    low, high = 1e-12, 1.0
    while excess(high) > 0:
        high *= 2.0
        if high > upper:
            return math.inf
    return brentq(excess, low, high, xtol=1e-14, rtol=1e-12)
