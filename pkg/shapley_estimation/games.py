"""
Synthetic cooperative games whose Shapley values are known in closed form or checkable by brute force.

Every game maps into [0, 1] and, apart from random_bounded and tabled games, has U(empty) = 0.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from shapley_estimation.constants import (
    ADDITIVE,
    GAME_FAMILIES,
    GLOVE,
    RANDOM_BOUNDED,
    TABLE_MAX_PLAYERS,
    THRESHOLD,
    UNANIMITY,
)
from shapley_estimation.model import (
    InvalidParameter,
    UtilitySpec,
    popcount,
    require_players_at_most,
)
from shapley_estimation.model_helpers import tabulate


def _mask(players):
    bits = 0
    for player in players:
        bits |= 1 << player
    return bits


def make_additive_game(weights, label=None):
    """U(S) = sum of the weights of the members of S; phi_i = w_i."""
    weights = tuple(float(w) for w in weights)
    if not weights:
        raise InvalidParameter("An additive game needs at least one weight")

    negative = [i for i, w in enumerate(weights) if not w >= 0.0]
    if negative:
        raise InvalidParameter(f"Additive weights must be nonnegative; player {negative[0]} has {weights[negative[0]]}")

    if math.fsum(weights) > 1.0:
        raise InvalidParameter(f"Additive weights must sum to at most 1, got {math.fsum(weights)}")

    def evaluate(coalition):
        return math.fsum(weights[i] for i in coalition.indices())

    return UtilitySpec(
        n_players=len(weights),
        evaluate=evaluate,
        label=label or "additive%s" % (weights,),
        known_shapley=weights,
    )


def make_threshold_game(n_players, quota, label=None):
    """U(S) = 1 once S has at least `quota` members."""
    if not 1 <= quota <= n_players:
        raise InvalidParameter(f"Quota must lie in 1..{n_players}, got {quota}")

    def evaluate(coalition):
        return 1.0 if coalition.size >= quota else 0.0

    return UtilitySpec(
        n_players=n_players,
        evaluate=evaluate,
        label=label or f"threshold(n={n_players}, quota={quota})",
        known_shapley=(1.0 / n_players,) * n_players,
    )


def make_glove_game(left, right, label=None):
    """
    Left and right gloves are worth something only in pairs.

    U(S) = min(|S & left|, |S & right|) / min(|left|, |right|), normalized into [0, 1].
    """
    left, right = set(left), set(right)
    if not left or not right:
        raise InvalidParameter("Both sides of a glove game need at least one player")

    overlap = left & right
    if overlap:
        raise InvalidParameter(f"Players {sorted(overlap)} hold both a left and a right glove")

    n_players = len(left) + len(right)
    if left | right != set(range(n_players)):
        raise InvalidParameter(f"Glove sides must cover exactly the players 0..{n_players - 1}")

    left_mask, right_mask = _mask(left), _mask(right)
    scale = float(min(len(left), len(right)))

    def evaluate(coalition):
        return min(popcount(coalition.bits & left_mask), popcount(coalition.bits & right_mask)) / scale

    return UtilitySpec(
        n_players=n_players,
        evaluate=evaluate,
        label=label or f"glove(left={sorted(left)}, right={sorted(right)})",
    )


def make_unanimity_game(n_players, carrier, label=None):
    """U(S) = 1 when S contains the whole carrier; players outside it are dummies."""
    carrier = set(carrier)
    if not carrier:
        raise InvalidParameter("A unanimity game needs a nonempty carrier")

    outside = [p for p in carrier if not 0 <= p < n_players]
    if outside:
        raise InvalidParameter(f"Carrier player {outside[0]} is outside 0..{n_players - 1}")

    carrier_mask = _mask(carrier)
    share = 1.0 / len(carrier)

    def evaluate(coalition):
        return 1.0 if coalition.bits & carrier_mask == carrier_mask else 0.0

    return UtilitySpec(
        n_players=n_players,
        evaluate=evaluate,
        label=label or f"unanimity(n={n_players}, carrier={sorted(carrier)})",
        known_shapley=tuple(share if p in carrier else 0.0 for p in range(n_players)),
    )


def make_table_game(values, label=None, known_shapley=None):
    """
    A game given by its full table, values[bits] = U(coalition with those bits).

    :param values: sequence of length 2^N with entries in [0, 1]
    """
    table = np.array(values, dtype=np.float64)
    n_players = int(round(math.log2(len(table)))) if len(table) else 0
    if n_players < 1 or len(table) != 1 << n_players:
        raise InvalidParameter(f"A game table needs 2^N entries for some N >= 1, got {len(table)}")

    require_players_at_most(n_players, TABLE_MAX_PLAYERS, "A tabled game")

    if not np.all(np.isfinite(table)) or table.min() < 0.0 or table.max() > 1.0:
        raise InvalidParameter("Game table entries must lie in [0, 1]")

    table.setflags(write=False)

    def evaluate(coalition):
        return float(table[coalition.bits])

    return UtilitySpec(
        n_players=n_players,
        evaluate=evaluate,
        label=label or f"table(n={n_players})",
        known_shapley=known_shapley,
    )


def make_random_bounded_game(n_players, seed, label=None):
    """
    Independent uniform [0, 1) utilities for every subset, drawn once from PCG64 seeded with `seed`.

    The whole table is drawn eagerly so values do not depend on evaluation order. U(empty) is
    generally nonzero.
    """
    require_players_at_most(n_players, TABLE_MAX_PLAYERS, "A random bounded game")
    if n_players < 1:
        raise InvalidParameter(f"A game needs at least one player, got {n_players}")

    table = np.random.default_rng(int(seed)).random(1 << n_players)
    return make_table_game(table, label=label or f"random_bounded(n={n_players}, seed={seed})")


def make_linear_combination(terms, label=None):
    """
    The game sum_k c_k U_k over games sharing a player count.

    :param terms: list of (coefficient, UtilitySpec); coefficients nonnegative, summing to at most 1
    """
    if not terms:
        raise InvalidParameter("A linear combination needs at least one term")

    n_players = terms[0][1].n_players
    if any(u.n_players != n_players for _, u in terms):
        raise InvalidParameter("All games in a linear combination must have the same players")

    coefficients = [float(c) for c, _ in terms]
    if any(c < 0.0 for c in coefficients) or math.fsum(coefficients) > 1.0:
        raise InvalidParameter("Coefficients must be nonnegative and sum to at most 1")

    table = np.zeros(1 << n_players, dtype=np.float64)
    for c, u in terms:
        table += c * tabulate(u, limit=TABLE_MAX_PLAYERS)
    np.clip(table, 0.0, 1.0, out=table)

    known = None
    if all(u.known_shapley is not None for _, u in terms):
        known = tuple(
            math.fsum(c * u.known_shapley[i] for c, u in terms) for i in range(n_players)
        )

    return make_table_game(
        table,
        label=label or " + ".join(f"{c:g}*{u.label}" for c, u in terms),
        known_shapley=known,
    )


@dataclass(frozen=True)
class GameFamilyConfig:
    """
    A game described by family name and parameters, as read from a game definition file.

    parameters by family:
        additive        weights: list of floats
        threshold       quota: int
        glove           left, right: lists of players
        unanimity       carrier: list of players
        random_bounded  (none; uses `seed`)
    """
    family: str
    n_players: int
    parameters: Dict[str, object] = field(default_factory=dict)
    seed: Optional[int] = None
    label: Optional[str] = None

    def __post_init__(self):
        if self.family not in GAME_FAMILIES:
            raise InvalidParameter(f"Unknown game family '{self.family}'; expected one of {', '.join(GAME_FAMILIES)}")

        if self.n_players < 1:
            raise InvalidParameter(f"n_players must be positive, got {self.n_players}")

        required = {
            ADDITIVE: ("weights",),
            THRESHOLD: ("quota",),
            GLOVE: ("left", "right"),
            UNANIMITY: ("carrier",),
            RANDOM_BOUNDED: (),
        }[self.family]
        missing = [p for p in required if p not in self.parameters]
        if missing:
            raise InvalidParameter(f"{self.family} game is missing parameter(s): {', '.join(missing)}")

        if self.family == RANDOM_BOUNDED and self.seed is None:
            raise InvalidParameter("random_bounded games need a seed")

        if self.family == ADDITIVE and len(self.parameters["weights"]) != self.n_players:
            raise InvalidParameter(
                f"{len(self.parameters['weights'])} weights given for {self.n_players} players"
            )

        if self.family == GLOVE and len(self.parameters["left"]) + len(self.parameters["right"]) != self.n_players:
            raise InvalidParameter(f"Glove sides do not add up to {self.n_players} players")

    def build(self):
        """Construct the UtilitySpec this configuration describes."""
        p = self.parameters
        if self.family == ADDITIVE:
            return make_additive_game(p["weights"], label=self.label)
        if self.family == THRESHOLD:
            return make_threshold_game(self.n_players, int(p["quota"]), label=self.label)
        if self.family == GLOVE:
            return make_glove_game(p["left"], p["right"], label=self.label)
        if self.family == UNANIMITY:
            return make_unanimity_game(self.n_players, p["carrier"], label=self.label)
        return make_random_bounded_game(self.n_players, self.seed, label=self.label)
