import math

import numpy as np


def harmonic_number(n):
    """H_n = sum_{k=1}^{n} 1/k, compensated."""
    return math.fsum(1.0 / k for k in range(1, n + 1))


def popcount_table(n_players):
    """Population count of every bitmask below 2^n_players, as an int array."""
    table = np.zeros(1 << n_players, dtype=np.int64)
    for bit in range(n_players):
        width = 1 << bit
        table[width:2 * width] = table[:width] + 1
    return table


def pack_rows(memberships):
    """
    Turn a boolean (rows x players) matrix into one Python int per row, bit i = column i.

    :return: (list[int], np.ndarray) - the distinct row integers in first-seen order and, for
        every row, the position of its integer in that list
    """
    memberships = np.asarray(memberships, dtype=bool)
    packed = np.packbits(memberships, axis=1, bitorder="little")
    _, first, inverse = np.unique(packed, axis=0, return_index=True, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)

    # Re-rank the distinct rows by first appearance so iteration order follows the batch.
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))

    keys = [int.from_bytes(packed[first[i]].tobytes(), "little") for i in order]
    return keys, rank[inverse]


def derive_seed(master_seed, index):
    """
    A 64-bit seed for stream `index` of `master_seed`.

    seed = first uint64 word of numpy's SeedSequence(master_seed, spawn_key=(index,)).
    """
    sequence = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def stream_generator(seed, index):
    """The PCG64 generator owning stream `index` of `seed`."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))
