import csv
import logging
from pathlib import Path

import numpy as np

from shapley_estimation.config import CannotLoadConfiguration, Configuration
from shapley_estimation.constants import CACHE_HEADER
from shapley_estimation.model import (
    Coalition,
    EvalCache,
    InvalidParameter,
    check_utility_value,
    require_players_at_most,
)
from shapley_estimation.util.string_helpers import format_utility


def coalition_from_indices(indices, n_players):
    """Build the coalition holding exactly `indices` among `n_players` players."""
    bits = 0
    for index in indices:
        if not 0 <= index < n_players:
            raise InvalidParameter(f"Player index {index} is outside 0..{n_players - 1}")
        bits |= 1 << index
    return Coalition(bits, n_players)


def root_game(u, coalition):
    """Follow derived games back to the game whose evaluations are actually cached."""
    while u.parent is not None:
        coalition = coalition.restrict(u.parent.n_players)
        u = u.parent
    return u, coalition


def cached_evaluate(cache, u, coalition):
    """
    Return U(coalition), evaluating it at most once per cache.

    :param cache: (EvalCache) - shared memo; its hit/miss counters are updated
    :param u: (UtilitySpec) - the game; derived games are looked up under their root game
    :param coalition: (Coalition) - must be over u.n_players players
    :raises ContractViolation: if the utility falls outside [0, 1]
    """
    if coalition.n_players != u.n_players:
        raise InvalidParameter(
            f"Coalition over {coalition.n_players} players passed to a {u.n_players}-player game"
        )

    root, key = root_game(u, coalition)
    value = cache.lookup(key)
    if value is None:
        value = check_utility_value(root.evaluate(key), key)
        cache.store(key, value)
    return value


def load_cache(path, n_players):
    """
    Load a persisted cache.

    :param path: file in the `coalition_hex,utility` format
    :param n_players: player count of the game the cache belongs to
    :return: (EvalCache) - with zeroed counters; an absent file yields an empty cache
    """
    path = Path(path)
    cache = EvalCache()
    if not path.exists():
        logging.getLogger(__name__).info("No cache at %s, starting empty", path)
        return cache

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = ",".join(next(reader, []))
        if header != CACHE_HEADER:
            raise CannotLoadConfiguration(f"{path}: expected header '{CACHE_HEADER}', got '{header}'")

        for row in reader:
            if not row:
                continue
            try:
                coalition_hex, utility = row
                coalition = Coalition.from_hex(coalition_hex.strip(), n_players)
                value = check_utility_value(float(utility), coalition)
            except (ValueError, InvalidParameter) as e:
                raise CannotLoadConfiguration(f"{path}, line {reader.line_num}: {e}") from e
            cache.store(coalition, value)

    logging.getLogger(__name__).info("Loaded %d cached utilities from %s", len(cache), path)
    return cache


def save_cache(cache, path):
    """Write every entry, ordered by coalition bits, with a header line."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CACHE_HEADER.split(","))
        for coalition in sorted(cache.entries, key=lambda c: c.bits):
            writer.writerow([coalition.hex, format_utility(cache.entries[coalition])])
    logging.getLogger(__name__).info("Saved %d cached utilities to %s", len(cache), path)


def tabulate(u, cache=None, limit=None):
    """
    Evaluate `u` on every coalition, in bitmask order.

    :param cache: (EvalCache) - optional; when given every evaluation goes through it
    :param limit: largest player count allowed; defaults to Configuration.exact_max_players()
    :return: (np.ndarray) - float64 array of length 2^n_players indexed by coalition bits
    """
    limit = limit or Configuration.exact_max_players()
    require_players_at_most(u.n_players, limit, "Tabulating a game")

    n = u.n_players
    table = np.empty(1 << n, dtype=np.float64)
    for bits in range(1 << n):
        coalition = Coalition(bits, n)
        if cache is None:
            table[bits] = check_utility_value(u.evaluate(coalition), coalition)
        else:
            table[bits] = cached_evaluate(cache, u, coalition)
    return table
