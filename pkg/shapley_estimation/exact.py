"""
Brute-force ground truth by full enumeration: Shapley values, pairwise differences, and the
exact moments of the group-testing single-sample statistic.

Sums run over subsets in bitmask order. Subsets are grouped by size, each group is summed with
math.fsum, and each group total is divided once by its exact integer weight.
"""
import itertools
import logging
import math

import numpy as np

from shapley_estimation.constants import (
    PERMUTATION_ORACLE_MAX_PLAYERS,
    STATISTIC_ORACLE_MAX_PLAYERS,
)
from shapley_estimation.model import (
    EvalCache,
    InvalidParameter,
    ShapleyVector,
    require_players_at_most,
)
from shapley_estimation.model_helpers import tabulate
from shapley_estimation.util import popcount_table


def _check_player(player, n_players):
    if not 0 <= player < n_players:
        raise InvalidParameter(f"Player {player} is outside 0..{n_players - 1}")


def _check_pair(i, j, n_players):
    _check_player(i, n_players)
    _check_player(j, n_players)
    if i == j:
        raise InvalidParameter(f"A pair difference needs two distinct players, got {i} twice")


def _by_size(values, sizes, weight):
    """fsum each size group of `values`, divide by weight(size), and fsum the group results."""
    terms = []
    for size in np.unique(sizes):
        terms.append(math.fsum(values[sizes == size]) / weight(int(size)))
    return math.fsum(terms)


def exact_shapley(u, cache=None):
    """
    phi_i = (1/N) sum_{S without i} C(N-1, |S|)^-1 [U(S + i) - U(S)].

    Each of the 2^N coalitions is evaluated once, through `cache` when given.
    """
    n = u.n_players
    table = tabulate(u, cache if cache is not None else EvalCache())
    sizes = popcount_table(n)
    masks = np.arange(1 << n)

    phi = []
    for i in range(n):
        without = masks[(masks >> i) & 1 == 0]
        gains = table[without | (1 << i)] - table[without]
        phi.append(_by_size(gains, sizes[without], lambda s: n * math.comb(n - 1, s)))

    logging.getLogger(__name__).debug("Exact Shapley values of %s over %d coalitions", u.label, len(table))
    return ShapleyVector(phi)


def exact_shapley_by_permutations(u, cache=None):
    """Average marginal contribution over all N! orderings of the players."""
    n = u.n_players
    require_players_at_most(n, PERMUTATION_ORACLE_MAX_PLAYERS, "Permutation enumeration")
    table = tabulate(u, cache if cache is not None else EvalCache())

    contributions = [[] for _ in range(n)]
    for ordering in itertools.permutations(range(n)):
        bits = 0
        previous = table[0]
        for player in ordering:
            bits |= 1 << player
            current = table[bits]
            contributions[player].append(current - previous)
            previous = current

    orderings = math.factorial(n)
    return ShapleyVector([math.fsum(c) / orderings for c in contributions])


def exact_pair_difference(u, i, j, cache=None):
    """
    Delta_ij = (1/(N-1)) sum_{S without i, j} C(N-2, |S|)^-1 [U(S + i) - U(S + j)].
    """
    n = u.n_players
    _check_pair(i, j, n)
    table = tabulate(u, cache if cache is not None else EvalCache())
    sizes = popcount_table(n)

    masks = np.arange(1 << n)
    rest = masks[((masks >> i) & 1 == 0) & ((masks >> j) & 1 == 0)]
    gaps = table[rest | (1 << i)] - table[rest | (1 << j)]
    return _by_size(gaps, sizes[rest], lambda s: (n - 1) * math.comb(n - 2, s))


def _statistic_terms(dist, u, i, j, cache):
    if u.n_players != dist.n_effective:
        raise InvalidParameter(
            f"A {dist.variant} distribution over {dist.n_effective} players cannot sample a "
            f"{u.n_players}-player game"
        )
    _check_pair(i, j, u.n_players)

    table = tabulate(u, cache if cache is not None else EvalCache(), limit=STATISTIC_ORACLE_MAX_PLAYERS)
    sizes = popcount_table(u.n_players)
    masks = np.arange(len(table))
    sign = (((masks >> i) & 1) - ((masks >> j) & 1)).astype(np.float64)

    # Sizes 0 and n_effective are never drawn.
    support = (sizes >= 1) & (sizes <= dist.K)
    return table[support], sign[support], sizes[support], table[0]


def _expect(dist, values, sizes):
    """sum_k q_k / C(n_effective, k) * sum_{|S| = k} values(S)."""
    n = dist.n_effective
    terms = []
    for k in range(1, dist.K + 1):
        group = values[sizes == k]
        terms.append(dist.q_k(k) * math.fsum(group) / math.comb(n, k))
    return math.fsum(terms)


def exact_statistic_expectation(dist, u, i, j, cache=None):
    """
    E[(beta_i - beta_j) U(S)] for S drawn from `dist`, by enumerating every coalition.

    Multiply by dist.Z to get Delta_ij. With the augmented distribution, an augmented game and j
    the pivot, Z times the result is phi_i of the original game.
    """
    values, sign, sizes, _ = _statistic_terms(dist, u, i, j, cache)
    return _expect(dist, sign * values, sizes)


def exact_statistic_moments(dist, u, i, j, cache=None):
    """
    Exact (E[zeta], E[zeta^2]) for zeta = (beta_i - beta_j) (U(S) - U(empty)).

    The second moment never exceeds 1 - q_tot(dist).
    """
    values, sign, sizes, baseline = _statistic_terms(dist, u, i, j, cache)
    zeta = sign * (values - baseline)
    return _expect(dist, zeta, sizes), _expect(dist, zeta * zeta, sizes)

