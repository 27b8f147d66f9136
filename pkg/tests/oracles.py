"""Brute-force references the exact solvers are checked against."""

import itertools
import math

import numpy as np


def tour_len(d, order):
    path = [0, *order, 0]
    return sum(float(d[a, b]) for a, b in zip(path, path[1:]))


def tsp_brute(d, cities):
    cities = sorted(set(cities) - {0})
    if not cities:
        return 0.0
    return min(tour_len(d, p) for p in itertools.permutations(cities))


def labelled_partitions(cities, sizes):
    """Every assignment of cities to salesmen with the given group sizes."""
    m = len(sizes)
    for owner in itertools.product(range(m), repeat=len(cities)):
        if all(owner.count(k) == sizes[k] for k in range(m)):
            yield [frozenset(c for c, o in zip(cities, owner) if o == k) for k in range(m)]


def opt_decentr_brute(d, n, sizes):
    cache = {}

    def tl(g):
        if g not in cache:
            cache[g] = tsp_brute(d, g)
        return cache[g]

    return min(sum(tl(g) for g in part) for part in labelled_partitions(list(range(1, n)), sizes))


def full_centr_brute(d, n, m):
    cities = list(range(1, n))
    best = math.inf
    for owner in itertools.product(range(m), repeat=len(cities)):
        groups = [frozenset(c for c, o in zip(cities, owner) if o == k) for k in range(m)]
        if all(groups):
            best = min(best, sum(tsp_brute(d, g) for g in groups))
    return best


def diameter(d, g):
    return max((float(d[a, b]) for a, b in itertools.combinations(sorted(g), 2)), default=0.0)


def clustering_brute(d, n, sizes):
    return min(max(diameter(d, g) for g in part) for part in labelled_partitions(list(range(1, n)), sizes))


def assignment_brute(s):
    """Minimum of sum s[k][w(k)] over permutations with s[k][w(k)] <= s[k][k]."""
    s = np.asarray(s, dtype=float)
    p = len(s)
    best = math.inf
    for perm in itertools.permutations(range(p)):
        if all(s[k, perm[k]] <= s[k, k] for k in range(p)):
            best = min(best, sum(s[k, perm[k]] for k in range(p)))
    return best


def swap_closure(d, groups):
    """Every allocation reachable by sequences of mutually improving 1-1 swaps.

    Returns the set of terminal allocations (no mutually improving swap left).
    """
    start = tuple(frozenset(g) for g in groups)
    seen, stack, terminal = {start}, [start], set()
    while stack:
        cur = stack.pop()
        lengths = [tsp_brute(d, g) for g in cur]
        moved = False
        for a, b in itertools.combinations(range(len(cur)), 2):
            for x in cur[a]:
                for y in cur[b]:
                    ga = (cur[a] - {x}) | {y}
                    gb = (cur[b] - {y}) | {x}
                    if tsp_brute(d, ga) < lengths[a] * (1 - 1e-9) and tsp_brute(d, gb) < lengths[b] * (1 - 1e-9):
                        moved = True
                        nxt = list(cur)
                        nxt[a], nxt[b] = frozenset(ga), frozenset(gb)
                        nxt = tuple(nxt)
                        if nxt not in seen:
                            seen.add(nxt)
                            stack.append(nxt)
        if not moved:
            terminal.add(cur)
    return terminal


def random_points(rng, count, scale=100.0):
    return rng.uniform(0, scale, size=(count, 2))


def dist(points):
    pts = np.asarray(points, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff**2).sum(-1))


_PERMS: dict = {}


def tsp_brute_np(d, cities):
    """Vectorised permutation enumeration; same answer as ``tsp_brute``."""
    cities = np.array(sorted(set(cities) - {0}), dtype=int)
    k = len(cities)
    if k == 0:
        return 0.0
    if k not in _PERMS:
        _PERMS[k] = np.array(list(itertools.permutations(range(k))), dtype=int)
    tours = cities[_PERMS[k]]
    lengths = d[0, tours[:, 0]] + d[tours[:, -1], 0]
    for i in range(k - 1):
        lengths = lengths + d[tours[:, i], tours[:, i + 1]]
    return float(lengths.min())
