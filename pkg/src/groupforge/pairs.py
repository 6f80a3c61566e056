"""Indexing for vectors over the unordered vertex pairs of a complete graph.

Pairs are ordered (0,1), (0,2), ..., (0,n-1), (1,2), ..., (n-2,n-1), the
same condensed order numpy/scipy use for distance vectors.
"""


def n_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(m: int, k: int, n: int) -> int:
    if m == k:
        raise ValueError("a vertex is not paired with itself")
    if m > k:
        m, k = k, m
    return m * n - m * (m + 1) // 2 + (k - m - 1)


def iter_pairs(n: int):
    for m in range(n):
        for k in range(m + 1, n):
            yield m, k
