"""Exact allocation solvers: branch-and-bound over partitions of the cities.

OptDecentr and FullCentr share the subset tour table; the bound is the sum of
table lengths of the partial groups, valid because adding a city never
shortens an optimal tour under a metric.  Clustering bounds on the largest
diameter of the partial clusters.  Cities are branched in increasing id order
and salesmen in increasing index, so the first optimum found is the
lexicographically smallest owner vector among ties.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..allocation import Allocation
from .budget import Budget
from .tsp import SubsetTable, TableCapExceeded, TourSolution, improves, subset_tour_table, tsp_exact

_BATCH = 64


@dataclass(frozen=True)
class AllocationSolution:
    allocation: Allocation
    tours: tuple[TourSolution, ...]
    total: float
    optimal: bool


@dataclass(frozen=True)
class Clustering:
    clusters: tuple[frozenset[int], ...]
    max_diameter: float
    optimal: bool = True


class _OutOfTime(Exception):
    pass


def _tick_factory(budget: Budget, weight: int):
    """Returns a node-tick callable raising ``_OutOfTime`` at the deadline."""
    state = {"prepaid": 0, "single": False}
    weight = max(1, weight)

    def tick() -> None:
        if state["prepaid"]:
            state["prepaid"] -= 1
            return
        if not state["single"] and budget.fits(_BATCH * weight):
            budget.afford(_BATCH * weight)
            state["prepaid"] = _BATCH - 1
            return
        # near the deadline: pay node by node
        state["single"] = True
        if not budget.afford(weight):
            raise _OutOfTime

    return tick


def _tours(d: np.ndarray, groups: Sequence[frozenset[int]], budget: Budget) -> tuple[TourSolution, ...]:
    return tuple(tsp_exact(d, g, budget) for g in groups)


def _finish(d, groups, budget, proven) -> AllocationSolution:
    tours = _tours(d, groups, budget)
    total = float(sum(t.length for t in tours))
    optimal = proven and all(t.optimal for t in tours)
    return AllocationSolution(Allocation.of(groups), tours, total, optimal)


def _table_or_none(d, cities, budget) -> SubsetTable | None:
    try:
        table = subset_tour_table(d, cities, budget)
    except TableCapExceeded:
        return None
    return table if table.complete else None


def solve_opt_decentr(inst, d: np.ndarray, budget: Budget | None = None) -> AllocationSolution:
    """Minimum-total allocation keeping every salesman's endowment cardinality.

    On deadline, the incumbent (initially the endowment itself) is returned
    with ``optimal=False``.
    """
    budget = budget or Budget()
    endowment = [frozenset(e) for e in inst.endowment]
    m = len(endowment)
    cities = list(range(1, inst.n))
    table = _table_or_none(d, cities, budget)
    if table is None:
        return _finish(d, endowment, budget, False)

    tab = table.lengths.tolist()
    sizes = [len(e) for e in endowment]
    nbits = len(cities)
    best_masks = [table.mask(e) for e in endowment]
    best = [sum(tab[mk] for mk in best_masks)]
    masks = [0] * m
    left = sizes[:]
    tick = _tick_factory(budget, m)

    def dfs(i: int, cost: float) -> None:
        if i == nbits:
            if improves(cost, best[0]):
                best[0] = cost
                best_masks[:] = masks
            return
        bit = 1 << i
        opened: set[int] = set()
        for k in range(m):
            if not left[k]:
                continue
            old = masks[k]
            if not old:
                # empty salesmen of equal size are interchangeable
                if sizes[k] in opened:
                    continue
                opened.add(sizes[k])
            tick()
            new = old | bit
            bound = cost - tab[old] + tab[new]
            if not improves(bound, best[0]):
                continue
            masks[k] = new
            left[k] -= 1
            dfs(i + 1, bound)
            masks[k] = old
            left[k] += 1

    proven = True
    try:
        dfs(0, 0.0)
    except _OutOfTime:
        proven = False
    groups = [table.members(mk) for mk in best_masks]
    return _finish(d, groups, budget, proven)


def solve_full_centr(d: np.ndarray, n: int, m: int, budget: Budget | None = None) -> AllocationSolution:
    """Classical MTSP: best split of cities 1..n-1 into exactly m non-empty tours.

    Groups are ordered by their smallest city.
    """
    budget = budget or Budget()
    if not 1 <= m <= n - 1:
        raise ValueError(f"infeasible salesman count m={m} for n={n}")
    cities = list(range(1, n))
    fallback = [frozenset(c for c in cities if (c - 1) % m == k) for k in range(m)]
    table = _table_or_none(d, cities, budget)
    if table is None:
        return _finish(d, fallback, budget, False)

    tab = table.lengths.tolist()
    nbits = len(cities)
    best_masks = [table.mask(g) for g in fallback]
    best = [sum(tab[mk] for mk in best_masks)]
    groups: list[int] = []
    tick = _tick_factory(budget, m)

    def dfs(i: int, cost: float) -> None:
        if i == nbits:
            if len(groups) == m and improves(cost, best[0]):
                best[0] = cost
                best_masks[:] = groups
            return
        bit = 1 << i
        remaining = nbits - i - 1
        for k in range(len(groups)):
            if remaining < m - len(groups):
                break
            tick()
            old = groups[k]
            bound = cost - tab[old] + tab[old | bit]
            if not improves(bound, best[0]):
                continue
            groups[k] = old | bit
            dfs(i + 1, bound)
            groups[k] = old
        if len(groups) < m:
            tick()
            bound = cost + tab[bit]
            if improves(bound, best[0]):
                groups.append(bit)
                dfs(i + 1, bound)
                groups.pop()

    proven = True
    try:
        dfs(0, 0.0)
    except _OutOfTime:
        proven = False
    chosen = sorted((table.members(mk) for mk in best_masks), key=min)
    return _finish(d, chosen, budget, proven)


def _normalise_sizes(sizes) -> list[int]:
    if isinstance(sizes, Mapping):
        return [int(sizes[k]) for k in sorted(sizes)]
    return [int(s) for s in sizes]


def cluster_diameter(d: np.ndarray, cluster) -> float:
    members = sorted(cluster)
    return max((float(d[a, b]) for i, a in enumerate(members) for b in members[i + 1:]), default=0.0)


def solve_clustering(d: np.ndarray, sizes, budget: Budget | None = None) -> Clustering:
    """Partition cities 1..n-1 into clusters of the given sizes minimising the largest diameter.

    Ties resolve to the lexicographically smallest owner vector
    (owner of city 1, owner of city 2, ...).
    """
    budget = budget or Budget()
    sizes = _normalise_sizes(sizes)
    n = d.shape[0]
    if any(s < 0 for s in sizes) or sum(sizes) != n - 1:
        raise ValueError(f"cluster sizes {sizes} do not sum to n-1={n - 1}")
    m = len(sizes)
    cities = list(range(1, n))
    dist = d.tolist()

    # sequential fill is the lexicographically smallest feasible owner vector
    owner = []
    for k, s in enumerate(sizes):
        owner += [k] * s
    members: list[list[int]] = [[] for _ in range(m)]
    for c, k in zip(cities, owner):
        members[k].append(c)
    best = [max(cluster_diameter(d, g) for g in members) if m else 0.0]
    best_members = [list(g) for g in members]

    members = [[] for _ in range(m)]
    diam = [0.0] * m
    left = sizes[:]
    tick = _tick_factory(budget, m)

    def dfs(i: int, worst: float) -> None:
        if i == len(cities):
            if worst < best[0]:
                best[0] = worst
                best_members[:] = [list(g) for g in members]
            return
        c = cities[i]
        row = dist[c]
        opened: set[int] = set()
        for k in range(m):
            if not left[k]:
                continue
            group = members[k]
            if not group:
                if sizes[k] in opened:
                    continue
                opened.add(sizes[k])
            tick()
            grown = max([diam[k]] + [row[x] for x in group])
            new_worst = worst if grown <= worst else grown
            if new_worst >= best[0]:
                continue
            old = diam[k]
            group.append(c)
            diam[k] = grown
            left[k] -= 1
            dfs(i + 1, new_worst)
            group.pop()
            diam[k] = old
            left[k] += 1

    proven = True
    try:
        dfs(0, 0.0)
    except _OutOfTime:
        proven = False
    clusters = tuple(frozenset(g) for g in best_members)
    return Clustering(clusters, float(best[0]), proven)
