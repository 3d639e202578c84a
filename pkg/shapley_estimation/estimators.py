"""
The three Monte Carlo Shapley estimators: permutation sampling, group testing with a
feasibility solve over all pairwise differences, and group testing against a dummy pivot.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from shapley_estimation.bounds import achievable_epsilon
from shapley_estimation.constants import (
    AUGMENTED,
    FEASIBILITY_LP_MAX_PLAYERS,
    GT_IMPROVED,
    GT_ORIGINAL,
    ORIGINAL,
    PERMUTATION,
    SAMPLE_BLOCK_SIZE,
)
from shapley_estimation.model import (
    Coalition,
    EvalCache,
    InvalidParameter,
    ShapleyVector,
    UtilitySpec,
)
from shapley_estimation.model_helpers import cached_evaluate
from shapley_estimation.sampling import (
    SamplingDistribution,
    build_distribution,
    draw_memberships,
    effective_fraction,
    q_tot,
)
from shapley_estimation.util import pack_rows, stream_generator


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """
    T sampled coalitions and their utilities.

    `memberships[t, i]` is True when player i was in coalition t. `utilities` are raw values of
    the sampled game; `baseline` is its U(empty), subtracted when differences are estimated.
    """
    memberships: np.ndarray
    utilities: np.ndarray
    dist: SamplingDistribution
    seed: int
    baseline: float = 0.0

    @property
    def T(self):
        return len(self.utilities)

    @property
    def shifted_utilities(self):
        return self.utilities - self.baseline


@dataclass(frozen=True, eq=False)
class DifferenceMatrix:
    """
    Estimated Shapley differences.

    For all pairs, `values` is the full antisymmetric N x N matrix with values[i, j] =
    Delta_ij. Against a pivot, `values` lists Delta_{i,pivot} for the other players in index order.
    """
    values: np.ndarray
    variant: str
    Z: float
    T: int
    pivot: Optional[int] = None

    @property
    def is_all_pairs(self):
        return self.pivot is None

    def get(self, i, j):
        if self.is_all_pairs:
            return float(self.values[i, j])
        if j == self.pivot:
            return 0.0 if i == j else float(self.values[self._position(i)])
        if i == self.pivot:
            return -float(self.values[self._position(j)])
        raise InvalidParameter(f"Only differences against the pivot {self.pivot} were estimated, not ({i}, {j})")

    def _position(self, player):
        return player if player < self.pivot else player - 1


class FeasibilitySolution(NamedTuple):
    phi_hat: np.ndarray
    residual: float
    feasible: bool
    solver: str


@dataclass(frozen=True)
class EstimationReport:
    phi_hat: ShapleyVector
    method: str
    T: int
    utility_evals: int
    seed: int
    n_players: int
    label: str = ""
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    feasibility_residual: Optional[float] = None
    feasible: Optional[bool] = None
    epsilon_guarantee: Optional[float] = None
    elapsed: float = field(default=0.0, compare=False)

    @property
    def metadata(self):
        """The fields written to an estimate's sidecar file."""
        return {
            "method": self.method,
            "game": self.label,
            "n_players": self.n_players,
            "T": self.T,
            "seed": self.seed,
            "utility_evals": self.utility_evals,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "residual": self.feasibility_residual,
            "feasible": self.feasible,
            "epsilon_guarantee": self.epsilon_guarantee,
            "elapsed": self.elapsed,
        }


def _check_budget(T, what="T"):
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise InvalidParameter(f"{what} must be a positive integer, got {T!r}")


def _guarantee(n_players, delta, T, method):
    if delta is None:
        return None
    return achievable_epsilon(n_players, delta, T, method)


def permutation_sampling_estimate(u, n_permutations, seed, cache=None, delta=None):
    """
    Average marginal contributions along `n_permutations` random orderings.

    Orderings come from stream_generator(seed, 0). Each ordering walks from the empty coalition to
    the grand coalition, so the estimate always sums to U(I) - U(empty) up to rounding.
    """
    _check_budget(n_permutations, "n_permutations")
    cache = cache if cache is not None else EvalCache()
    start, misses = time.perf_counter(), cache.misses

    n = u.n_players
    rng = stream_generator(seed, 0)
    baseline = cached_evaluate(cache, u, Coalition.empty(n))
    totals = [[] for _ in range(n)]
    for _ in range(n_permutations):
        bits = 0
        previous = baseline
        for player in rng.permutation(n):
            player = int(player)
            bits |= 1 << player
            current = cached_evaluate(cache, u, Coalition(bits, n))
            totals[player].append(current - previous)
            previous = current

    phi_hat = [math.fsum(t) / n_permutations for t in totals]
    report = EstimationReport(
        phi_hat=ShapleyVector(phi_hat),
        method=PERMUTATION,
        T=int(n_permutations),
        utility_evals=cache.misses - misses,
        seed=seed,
        n_players=n,
        label=u.label,
        delta=delta,
        epsilon_guarantee=_guarantee(n, delta, n_permutations, PERMUTATION),
        elapsed=time.perf_counter() - start,
    )
    _log_report(report)
    return report


def collect_samples(u_effective, dist, T, seed, cache=None):
    """
    Draw T coalitions from `dist` and evaluate the game on each.

    Each distinct coalition in the batch is looked up in the cache once; the empty coalition is
    evaluated for the baseline.
    """
    _check_budget(T)
    if u_effective.n_players != dist.n_effective:
        raise InvalidParameter(
            f"A distribution over {dist.n_effective} players cannot sample a {u_effective.n_players}-player game"
        )
    cache = cache if cache is not None else EvalCache()
    n = dist.n_effective

    memberships = draw_memberships(dist, T, seed)
    keys, inverse = pack_rows(memberships)
    values = np.array([cached_evaluate(cache, u_effective, Coalition(bits, n)) for bits in keys])
    baseline = cached_evaluate(cache, u_effective, Coalition.empty(n))

    memberships.setflags(write=False)
    utilities = values[inverse]
    utilities.setflags(write=False)
    return SampleBatch(memberships=memberships, utilities=utilities, dist=dist, seed=seed, baseline=baseline)


def _membership_sums(batch):
    """s_i = sum_t (u_t - U(empty)) B_ti, accumulated block by block in a fixed order."""
    sums = np.zeros(batch.dist.n_effective)
    shifted = batch.shifted_utilities
    for start in range(0, batch.T, SAMPLE_BLOCK_SIZE):
        rows = slice(start, start + SAMPLE_BLOCK_SIZE)
        sums += np.where(batch.memberships[rows], shifted[rows, np.newaxis], 0.0).sum(axis=0)
    return sums


def estimate_pair_differences(batch, pivot=None):
    """
    Delta_ij = (Z/T) sum_t (u_t - U(empty)) (B_ti - B_tj).

    :param pivot: when given, estimate Delta_{i,pivot} for every other player only
    """
    n = batch.dist.n_effective
    if pivot is not None and not 0 <= pivot < n:
        raise InvalidParameter(f"Pivot {pivot} is outside 0..{n - 1}")

    sums = _membership_sums(batch)
    scale = batch.dist.Z / batch.T
    if pivot is None:
        values = scale * (sums[:, np.newaxis] - sums[np.newaxis, :])
    else:
        others = np.delete(np.arange(n), pivot)
        values = scale * (sums[others] - sums[pivot])

    values.setflags(write=False)
    return DifferenceMatrix(values=values, variant=batch.dist.variant, Z=batch.dist.Z, T=batch.T, pivot=pivot)


def _max_residual(phi_hat, deltas):
    gaps = (phi_hat[:, np.newaxis] - phi_hat[np.newaxis, :]) - deltas
    return float(np.max(np.abs(np.triu(gaps, k=1)))) if len(phi_hat) > 1 else 0.0


def _minimax_point(deltas, net_total):
    """
    Minimize t subject to |(phi_i - phi_j) - Delta_ij| <= t over all pairs and sum(phi) = net_total.
    """
    n = len(deltas)
    upper_i, upper_j = np.triu_indices(n, k=1)
    n_pairs = len(upper_i)
    rows = np.arange(n_pairs)

    # Variables are phi_0..phi_{n-1} then t; each pair gives one row per side of the absolute value.
    def side(sign):
        return sparse.coo_matrix(
            (
                np.concatenate([np.full(n_pairs, sign), np.full(n_pairs, -sign), -np.ones(n_pairs)]),
                (np.tile(rows, 3), np.concatenate([upper_i, upper_j, np.full(n_pairs, n)])),
            ),
            shape=(n_pairs, n + 1),
        )

    A_ub = sparse.vstack([side(1.0), side(-1.0)]).tocsr()
    target = deltas[upper_i, upper_j]
    b_ub = np.concatenate([target, -target])

    A_eq = np.append(np.ones(n), 0.0)[np.newaxis, :]
    cost = np.zeros(n + 1)
    cost[n] = 1.0
    bounds = [(None, None)] * n + [(0, None)]

    result = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[net_total], bounds=bounds, method="highs")
    if not result.success:
        logging.getLogger(__name__).warning("Minimax feasibility LP failed: %s", result.message)
        return None

    phi = np.array(result.x[:n])
    return phi + (net_total - math.fsum(phi)) / n


def solve_feasibility(deltas, net_total, tolerance):
    """
    Recover Shapley values from all-pairs differences under sum(phi) = net_total.

    The closed-form point phi_i = net_total/N + (1/N) sum_j Delta_ij is returned when it meets
    every pairwise constraint within `tolerance`. Otherwise, for N up to 128, the point
    minimizing the largest pairwise residual is computed by linear programming. If neither
    meets the tolerance the closed-form point comes back with feasible=False.
    """
    if not deltas.is_all_pairs:
        raise InvalidParameter("The feasibility solve needs differences for all pairs")
    if not tolerance > 0:
        raise InvalidParameter(f"tolerance must be positive, got {tolerance}")

    matrix = np.asarray(deltas.values, dtype=np.float64)
    n = len(matrix)
    closed_form = net_total / n + matrix.sum(axis=1) / n
    residual = _max_residual(closed_form, matrix)
    if residual <= tolerance:
        return FeasibilitySolution(closed_form, residual, True, "closed_form")

    if n <= FEASIBILITY_LP_MAX_PLAYERS:
        minimax = _minimax_point(matrix, net_total)
        if minimax is not None:
            minimax_residual = _max_residual(minimax, matrix)
            if minimax_residual <= tolerance:
                return FeasibilitySolution(minimax, minimax_residual, True, "minimax")

    logging.getLogger(__name__).warning(
        "No feasible point: residual %.6g exceeds tolerance %.6g for %d players", residual, tolerance, n
    )
    return FeasibilitySolution(closed_form, residual, False, "closed_form")


def group_testing_original_estimate(u, T, epsilon, seed, cache=None, delta=None):
    """
    Estimate all pairwise differences from T shared samples, then solve for phi.

    The feasibility tolerance is epsilon / (2 sqrt(N)).
    """
    _check_budget(T)
    if not epsilon > 0:
        raise InvalidParameter(f"epsilon must be positive, got {epsilon}")
    n = u.n_players
    if n < 2:
        raise InvalidParameter(f"Group testing over all pairs needs at least 2 players, got {n}")

    cache = cache if cache is not None else EvalCache()
    start, misses = time.perf_counter(), cache.misses

    dist = build_distribution(n, ORIGINAL)
    batch = collect_samples(u, dist, T, seed, cache)
    deltas = estimate_pair_differences(batch)
    net_total = cached_evaluate(cache, u, Coalition.grand(n)) - batch.baseline
    solution = solve_feasibility(deltas, net_total, epsilon / (2.0 * math.sqrt(n)))

    report = EstimationReport(
        phi_hat=ShapleyVector(solution.phi_hat),
        method=GT_ORIGINAL,
        T=int(T),
        utility_evals=cache.misses - misses,
        seed=seed,
        n_players=n,
        label=u.label,
        epsilon=epsilon,
        delta=delta,
        feasibility_residual=solution.residual,
        feasible=solution.feasible,
        epsilon_guarantee=_guarantee(n, delta, T, GT_ORIGINAL),
        elapsed=time.perf_counter() - start,
    )
    _log_report(report)
    return report


def augment_with_dummy(u):
    """
    U'(S) = U(S without the dummy), over N + 1 players with the dummy at index N.

    Evaluations of U' are cached under U's coalitions.
    """
    n = u.n_players

    def evaluate(coalition):
        return u.evaluate(coalition.restrict(n))

    known = None if u.known_shapley is None else u.known_shapley + (0.0,)
    return UtilitySpec(
        n_players=n + 1,
        evaluate=evaluate,
        label=f"{u.label}+dummy",
        known_shapley=known,
        parent=u,
    )


def group_testing_improved_estimate(u, T, seed, cache=None, delta=None, epsilon=None):
    """phi_i = Delta_{i,*} estimated from T samples of the game augmented with a dummy pivot *."""
    _check_budget(T)
    cache = cache if cache is not None else EvalCache()
    start, misses = time.perf_counter(), cache.misses

    n = u.n_players
    augmented = augment_with_dummy(u)
    dist = build_distribution(n, AUGMENTED)
    batch = collect_samples(augmented, dist, T, seed, cache)
    deltas = estimate_pair_differences(batch, pivot=dist.pivot)

    report = EstimationReport(
        phi_hat=ShapleyVector(deltas.values),
        method=GT_IMPROVED,
        T=int(T),
        utility_evals=cache.misses - misses,
        seed=seed,
        n_players=n,
        label=u.label,
        epsilon=epsilon,
        delta=delta,
        epsilon_guarantee=_guarantee(n, delta, T, GT_IMPROVED),
        elapsed=time.perf_counter() - start,
    )
    _log_report(report)
    return report


def sample_reuse_diagnostics(batch, i, j) -> Tuple[float, float]:
    """
    (observed, expected) fraction of samples holding exactly one of i and j.

    Only those samples move the estimate of Delta_ij; the expected fraction is 1 - q_tot = 2/Z.
    """
    n = batch.dist.n_effective
    for player in (i, j):
        if not 0 <= player < n:
            raise InvalidParameter(f"Player {player} is outside 0..{n - 1}")
    return effective_fraction(batch.memberships, i, j), 1.0 - q_tot(batch.dist)


def _log_report(report):
    logging.getLogger(__name__).info(
        "%s on %s: T=%d, %d utility evaluations, %.3fs",
        report.method, report.label or "game", report.T, report.utility_evals, report.elapsed,
    )
