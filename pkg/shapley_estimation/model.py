"""
Shared vocabulary: players, coalitions, bounded utility functions, evaluation caching.

Players are 0-based indices. A coalition is a bit vector held in a Python int, bit i set when
player i belongs to it.
"""
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np

from shapley_estimation.config import Configuration
from shapley_estimation.constants import DUMMY_PIVOT_SLOTS, EXHAUSTIVE_VALIDATION_MAX_PLAYERS
from shapley_estimation.problem_details import (
    GAME_FILE_NOT_FOUND,
    INVALID_PARAMETER,
    SIZE_LIMIT_EXCEEDED,
    UTILITY_CONTRACT_VIOLATION,
)


class ShapleyError(Exception):
    """Base class for the errors this package raises on purpose."""
    problem_detail = INVALID_PARAMETER

    @property
    def problem(self):
        return self.problem_detail.detailed(str(self))


class InvalidParameter(ShapleyError, ValueError):
    problem_detail = INVALID_PARAMETER


class ContractViolation(ShapleyError):
    problem_detail = UTILITY_CONTRACT_VIOLATION


class SizeLimitExceeded(ShapleyError):
    problem_detail = SIZE_LIMIT_EXCEEDED


class GameFileNotFound(ShapleyError):
    problem_detail = GAME_FILE_NOT_FOUND


def require_players_at_most(n_players, limit, operation):
    if n_players > limit:
        raise SizeLimitExceeded(
            f"{operation} supports at most {limit} players, game has {n_players}"
        )


def popcount(bits):
    return bin(bits).count("1")


@dataclass(frozen=True)
class Coalition:
    """A subset of the players 0..n_players-1."""
    bits: int
    n_players: int

    def __post_init__(self):
        if not isinstance(self.n_players, (int, np.integer)) or self.n_players < 1:
            raise InvalidParameter(f"n_players must be a positive integer, got {self.n_players!r}")

        limit = Configuration.max_players() + DUMMY_PIVOT_SLOTS
        if self.n_players > limit:
            raise SizeLimitExceeded(
                f"Coalitions support at most {limit} players, got {self.n_players}"
            )

        if self.bits < 0 or self.bits >> self.n_players:
            raise InvalidParameter(
                f"Coalition bits {self.bits:x} reference players outside 0..{self.n_players - 1}"
            )

    def __len__(self):
        return self.size

    def __contains__(self, player):
        return 0 <= player < self.n_players and bool((self.bits >> player) & 1)

    def __repr__(self):
        return "<Coalition %s of %d>" % (sorted(self.indices()), self.n_players)

    @property
    def size(self):
        return popcount(self.bits)

    @property
    def hex(self):
        return format(self.bits, "x")

    def indices(self):
        """Members in increasing order."""
        bits = self.bits
        player = 0
        members = []
        while bits:
            if bits & 1:
                members.append(player)
            bits >>= 1
            player += 1
        return members

    def with_player(self, player):
        return Coalition(self.bits | (1 << player), self.n_players)

    def without_player(self, player):
        return Coalition(self.bits & ~(1 << player), self.n_players)

    def restrict(self, n_players):
        """The same members among the first `n_players` players; later players are dropped."""
        return Coalition(self.bits & ((1 << n_players) - 1), n_players)

    @classmethod
    def empty(cls, n_players):
        return cls(0, n_players)

    @classmethod
    def grand(cls, n_players):
        return cls((1 << n_players) - 1, n_players)

    @classmethod
    def from_hex(cls, text, n_players):
        try:
            bits = int(text, 16)
        except ValueError:
            raise InvalidParameter(f"Not a hexadecimal coalition: {text!r}")
        return cls(bits, n_players)


@dataclass(frozen=True)
class UtilitySpec:
    """
    A bounded set function U: 2^I -> [0, 1].

    `parent` is set on derived games (see estimators.augment_with_dummy) whose value on a
    coalition is the parent's value on the coalition restricted to the parent's players. Caches
    follow the chain so derived games share entries with the game they came from.
    """
    n_players: int
    evaluate: Callable[[Coalition], float] = field(compare=False)
    label: str = ""
    known_shapley: Optional[Tuple[float, ...]] = None
    parent: Optional["UtilitySpec"] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.n_players < 1:
            raise InvalidParameter(f"A game needs at least one player, got {self.n_players}")

        # Derived games may add the dummy pivot on top of a game at the limit.
        limit = Configuration.max_players()
        if self.parent is not None:
            limit += DUMMY_PIVOT_SLOTS
        if self.n_players > limit:
            raise SizeLimitExceeded(f"Games support at most {limit} players, got {self.n_players}")

        if self.known_shapley is not None:
            known = tuple(float(x) for x in self.known_shapley)
            if len(known) != self.n_players:
                raise InvalidParameter(
                    f"known_shapley has {len(known)} entries for {self.n_players} players"
                )
            object.__setattr__(self, "known_shapley", known)

    def __call__(self, coalition):
        return self.evaluate(coalition)

    @property
    def empty_value(self):
        """U(empty set), the baseline every net total is taken against."""
        return self.evaluate(Coalition.empty(self.n_players))

    @property
    def grand_value(self):
        return self.evaluate(Coalition.grand(self.n_players))

    @property
    def net_total(self):
        return self.grand_value - self.empty_value


def check_utility_value(value, coalition):
    """Raise ContractViolation unless `value` is a finite real in [0, 1]."""
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ContractViolation(f"U({coalition.hex}) returned a non-numeric value {value!r}")

    if not math.isfinite(value) or value < 0.0 or value > 1.0:
        raise ContractViolation(f"U({coalition.hex}) = {value!r} lies outside [0, 1]")

    return value


class EvalCache:
    """
    Memoizes utility evaluations by coalition.

    Concurrent lookups and inserts of the same key are allowed; the stored values are equal by
    the determinism of the utility, so the last write wins.
    """
    ##### Public Interface / Magic Methods ###################################  # noqa: E266

    def __init__(self, entries: Optional[Dict[Coalition, float]] = None):
        self.entries = dict(entries or {})
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def __len__(self):
        return len(self.entries)

    def __contains__(self, coalition):
        return coalition in self.entries

    def __getstate__(self):
        state = dict(self.__dict__)
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def __repr__(self):
        return "<EvalCache %d entries, %d hits, %d misses>" % (len(self.entries), self.hits, self.misses)

    def lookup(self, coalition):
        """Return the cached value or None, counting the lookup as a hit or a miss."""
        value = self.entries.get(coalition)
        with self._lock:
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
        return value

    def store(self, coalition, value):
        self.entries[coalition] = value

    def fork(self):
        """A private copy of the entries with fresh counters, for one parallel worker."""
        return EvalCache(self.entries)

    def merge(self, other):
        """Adopt entries computed by a forked copy. Counters are not merged."""
        self.entries.update(other.entries)

    ##### Properties and Getters/Setters #####################################  # noqa: E266

    @property
    def lookups(self):
        return self.hits + self.misses


@dataclass(frozen=True, eq=False)
class ShapleyVector:
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise InvalidParameter("A Shapley vector is one-dimensional")
        if not np.all(np.isfinite(values)):
            raise InvalidParameter("A Shapley vector must have finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, ShapleyVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None

    def __len__(self):
        return len(self.values)

    def __getitem__(self, player):
        return self.values[player]

    def __iter__(self):
        return iter(self.values)

    @property
    def total(self):
        return math.fsum(self.values)


def validate_utility(u: UtilitySpec, n_samples=4096, seed=0, coalitions: Optional[Iterable[Coalition]] = None):
    """
    Check that `u` maps into [0, 1] and is deterministic.

    Every coalition is checked when the game has at most 12 players; otherwise `n_samples`
    coalitions drawn uniformly from the seeded generator, plus the empty and grand coalitions.

    :raises ContractViolation: on the first offending coalition
    """
    n = u.n_players
    if coalitions is None:
        if n <= EXHAUSTIVE_VALIDATION_MAX_PLAYERS:
            coalitions = (Coalition(bits, n) for bits in range(1 << n))
        else:
            rng = np.random.default_rng(seed)
            draws = rng.integers(0, 2, size=(n_samples, n), dtype=np.uint8)
            weights = [1 << p for p in range(n)]
            sampled = [Coalition(sum(w for w, b in zip(weights, row) if b), n) for row in draws]
            coalitions = [Coalition.empty(n), Coalition.grand(n)] + sampled

    checked = 0
    for coalition in coalitions:
        first = check_utility_value(u.evaluate(coalition), coalition)
        second = check_utility_value(u.evaluate(coalition), coalition)
        if first != second:
            raise ContractViolation(
                f"U({coalition.hex}) is not deterministic: {first!r} then {second!r}"
            )
        checked += 1

    logging.getLogger(__name__).debug("Validated %s on %d coalitions", u.label or "utility", checked)
