"""Minimum-cost linear assignment with forbidden (infinite) entries.

:func:`solve` returns a matching of maximum cardinality among the feasible
pairs and, among those, one of minimum total cost. Infinite entries are
treated as missing edges of the bipartite graph; they never enter the dual
potentials.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

Matching = list[tuple[int, int]]

BRUTE_FORCE_MAX_DIM = 8
BRUTE_FORCE_MAX_CANDIDATES = 3_000_000


def solve(costs) -> Matching:
    """Shortest-augmenting-path assignment (Jonker-Volgonant style).

    Each augmentation runs a dense Dijkstra over columns from all free rows
    at once, so the k-th intermediate matching is a minimum-cost matching of
    size k over all row subsets. The loop stops when no augmenting path
    exists, which is the maximum cardinality. Ties go to the lowest column
    index.

    Args:
        costs: (rows, cols) array-like; ``inf`` marks forbidden pairs.

    Returns:
        Sorted list of (row, col) pairs.
    """
    C = np.asarray(costs, dtype=float)
    if C.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if C.size == 0:
        return []
    if np.isnan(C).any() or np.isneginf(C).any():
        raise ValueError("cost matrix contains NaN or -inf")
    transposed = C.shape[0] > C.shape[1]
    if transposed:
        C = C.T
    feasible = np.isfinite(C)
    if not feasible.any():
        return []
    n, m = C.shape
    # shift so finite costs are >= 0; every matching of size k moves by k*base
    W = np.where(feasible, C - C[feasible].min(), np.inf)

    pot_row = np.zeros(n)
    pot_col = np.zeros(m)
    row_match = np.full(n, -1, dtype=np.int64)
    col_match = np.full(m, -1, dtype=np.int64)
    inf = math.inf

    for _ in range(n):
        free_rows = np.flatnonzero(row_match < 0)
        red = W[free_rows] + pot_row[free_rows, None] - pot_col[None, :]
        k = np.argmin(red, axis=0)
        dist = red[k, np.arange(m)]
        way = free_rows[k]
        used = np.zeros(m, dtype=bool)
        row_dist = np.full(n, inf)
        row_dist[free_rows] = 0.0
        end = -1
        while True:
            masked = np.where(used, inf, dist)
            j = int(np.argmin(masked))
            dj = masked[j]
            if dj == inf:
                break
            used[j] = True
            r = col_match[j]
            if r < 0:
                end = j
                break
            row_dist[r] = dj
            cand = dj + W[r] + pot_row[r] - pot_col
            better = (~used) & (cand < dist)
            dist[better] = cand[better]
            way[better] = r
        if end < 0:
            break
        D = dist[end]
        pot_row += np.minimum(row_dist, D)
        pot_col += np.minimum(dist, D)
        j = end
        while True:
            r = way[j]
            prev = row_match[r]
            row_match[r] = j
            col_match[j] = r
            if prev < 0:
                break
            j = prev

    pairs = [(int(r), int(c)) for r, c in enumerate(row_match) if c >= 0]
    if transposed:
        pairs = [(c, r) for r, c in pairs]
    return sorted(pairs)


def matching_cost(costs, matching: Matching) -> float:
    C = np.asarray(costs, dtype=float)
    return float(sum(C[r, c] for r, c in matching))


@lru_cache(maxsize=64)
def _partial_injections(n: int, m: int) -> np.ndarray:
    """Every map of n rows into m columns or 'none' (coded m), injective on columns."""
    out = []
    for k in range(n + 1):
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.permutations(range(m), k):
                a = [m] * n
                for r, c in zip(rows, cols):
                    a[r] = c
                out.append(a)
    return np.array(out, dtype=np.int64).reshape(-1, n)


def _candidate_count(n: int, m: int) -> int:
    return sum(math.comb(n, k) * math.perm(m, k) for k in range(n + 1))


def brute_force_solve(costs) -> Matching:
    """Exhaustive reference solver with the same contract as :func:`solve`."""
    C = np.asarray(costs, dtype=float)
    if C.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if C.size == 0:
        return []
    transposed = C.shape[0] > C.shape[1]
    if transposed:
        C = C.T
    n, m = C.shape
    if n > BRUTE_FORCE_MAX_DIM or _candidate_count(n, m) > BRUTE_FORCE_MAX_CANDIDATES:
        raise ValueError(f"{C.shape} exceeds the brute-force oracle limit")
    table = _partial_injections(n, m)
    ext = np.hstack([C, np.zeros((n, 1))])
    vals = ext[np.arange(n)[None, :], table]
    ok = np.isfinite(vals).all(axis=1)
    card = np.where(ok, (table < m).sum(axis=1), -1)
    best_card = card.max()
    total = np.where(card == best_card, vals.sum(axis=1, where=np.isfinite(vals)), np.inf)
    best = table[int(np.argmin(total))]
    pairs = [(r, int(c)) for r, c in enumerate(best) if c < m]
    if transposed:
        pairs = [(c, r) for r, c in pairs]
    return sorted(pairs)
