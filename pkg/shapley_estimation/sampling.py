"""
The size-biased coalition sampler shared by both group-testing estimators.

A coalition is drawn by first picking its size k with probability q_k, then a uniformly random
size-k subset of the n_effective players. For the original variant n_effective = N and sizes run
over 1..N-1; for the augmented variant the dummy pivot sits at index N, n_effective = N + 1, and
sizes run over 1..N.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from shapley_estimation.constants import AUGMENTED, ORIGINAL, SAMPLE_BLOCK_SIZE, VARIANTS
from shapley_estimation.model import Coalition, InvalidParameter
from shapley_estimation.util import harmonic_number, stream_generator


@dataclass(frozen=True, eq=False)
class SamplingDistribution:
    """
    Weights (Z, q_1..q_K) over coalition sizes.

    `q[k - 1]` holds q_k. `cumulative` is the running sum of q with its last entry pinned to 1.
    """
    n_effective: int
    Z: float
    q: np.ndarray
    variant: str
    cumulative: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

        cumulative = np.cumsum(q)
        cumulative[-1] = 1.0
        cumulative.setflags(write=False)
        object.__setattr__(self, "cumulative", cumulative)

    def __eq__(self, other):
        if not isinstance(other, SamplingDistribution):
            return NotImplemented
        return (
            (self.n_effective, self.variant, self.Z) == (other.n_effective, other.variant, other.Z)
            and np.array_equal(self.q, other.q)
        )

    __hash__ = None

    @property
    def K(self):
        return len(self.q)

    @property
    def n_players(self):
        """The number of real players; the augmented variant adds one dummy on top."""
        return self.n_effective - 1 if self.variant == AUGMENTED else self.n_effective

    @property
    def pivot(self):
        """Index of the dummy pivot, or None for the original variant."""
        return self.n_effective - 1 if self.variant == AUGMENTED else None

    def q_k(self, k):
        return float(self.q[k - 1])


def build_distribution(n_players, variant):
    """
    Build the size distribution of the original or augmented group-testing sampler.

    original:  Z = 2 H_{N-1},  q_k = (1/Z)(1/k + 1/(N-k)),   k = 1..N-1
    augmented: Z = 2 H_N,      q_k = (1/Z)(1/k + 1/(N+1-k)), k = 1..N

    The augmented variant is defined for a single player (one real player plus the pivot); the
    original one needs at least two.
    """
    if variant not in VARIANTS:
        raise InvalidParameter(f"Unknown sampling variant '{variant}'; expected one of {', '.join(VARIANTS)}")

    minimum = 2 if variant == ORIGINAL else 1
    if not isinstance(n_players, (int, np.integer)) or n_players < minimum:
        raise InvalidParameter(f"The {variant} sampler needs at least {minimum} players, got {n_players}")

    n_effective = int(n_players) if variant == ORIGINAL else int(n_players) + 1
    K = n_effective - 1
    Z = 2.0 * harmonic_number(K)
    q = [(1.0 / k + 1.0 / (n_effective - k)) / Z for k in range(1, K + 1)]
    return SamplingDistribution(n_effective=n_effective, Z=Z, q=q, variant=variant)


def q_tot(dist):
    """
    Probability that a drawn coalition holds both or neither of a fixed pair of players.

    With M = n_effective: ((M-2)/M) q_1 + sum_{k=2}^{M-1} q_k (1 + 2k(k-M)/(M(M-1))). This equals
    1 - 2/Z.
    """
    M = dist.n_effective
    terms = [(M - 2) / M * dist.q_k(1)]
    for k in range(2, M):
        terms.append(dist.q_k(k) * (1.0 + 2.0 * k * (k - M) / (M * (M - 1))))
    return math.fsum(terms)


def draw_size(dist, x):
    """Inverse CDF: the size k whose cumulative band holds x in [0, 1)."""
    k = np.searchsorted(dist.cumulative, x, side="right") + 1
    return np.minimum(k, dist.K)


def draw_coalition(dist, rng):
    """
    Draw one coalition over dist.n_effective players.

    :param rng: (np.random.Generator) - consumed in a fixed order (one uniform for the size, then
        k bounded integers for the partial shuffle), so a seed fixes the whole draw sequence
    """
    n = dist.n_effective
    k = int(draw_size(dist, rng.random()))

    players = list(range(n))
    for p in range(k):
        swap = int(rng.integers(p, n))
        players[p], players[swap] = players[swap], players[p]

    bits = 0
    for player in players[:k]:
        bits |= 1 << player
    return Coalition(bits, n)


def _draw_block(dist, rows, rng):
    n = dist.n_effective
    sizes = draw_size(dist, rng.random(rows))

    # Partial Fisher-Yates on every row at once; only the first k columns of a row matter.
    order = np.tile(np.arange(n, dtype=np.int64), (rows, 1))
    index = np.arange(rows)
    for p in range(int(sizes.max())):
        swap = rng.integers(p, n, size=rows)
        held = order[index, p].copy()
        order[index, p] = order[index, swap]
        order[index, swap] = held

    memberships = np.zeros((rows, n), dtype=bool)
    chosen = np.arange(n)[np.newaxis, :] < sizes[:, np.newaxis]
    np.put_along_axis(memberships, order, chosen, axis=1)
    return memberships


def draw_memberships(dist, T, seed):
    """
    Draw T coalitions as a T x n_effective boolean matrix.

    Rows are drawn in blocks of SAMPLE_BLOCK_SIZE; block b uses stream_generator(seed, b), so the
    matrix depends only on (dist, T, seed).
    """
    if T < 1:
        raise InvalidParameter(f"T must be at least 1, got {T}")

    blocks = []
    for b, start in enumerate(range(0, T, SAMPLE_BLOCK_SIZE)):
        rows = min(SAMPLE_BLOCK_SIZE, T - start)
        blocks.append(_draw_block(dist, rows, stream_generator(seed, b)))

    logging.getLogger(__name__).debug(
        "Drew %d coalitions over %d players in %d block(s)", T, dist.n_effective, len(blocks)
    )
    return np.concatenate(blocks, axis=0)


def effective_fraction(memberships, i, j):
    """Fraction of rows holding exactly one of players i and j."""
    if i == j:
        raise InvalidParameter(f"An effective fraction needs two distinct players, got {i} twice")

    memberships = np.asarray(memberships, dtype=bool)
    return float(np.count_nonzero(memberships[:, i] != memberships[:, j])) / len(memberships)
