"""Exact single-salesman tours by Held-Karp subset dynamic programming.

Every tour is anchored at the depot (city 0).  The DP runs layer by layer over
subset cardinality and is vectorised with numpy inside each layer; the budget
is consulted between (layer, last-city) blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .budget import Budget

DEFAULT_TABLE_CAP = 22
REL_TOL = 1e-9


@dataclass(frozen=True)
class TourSolution:
    order: tuple[int, ...]
    length: float
    optimal: bool

    @property
    def cities(self) -> frozenset[int]:
        return frozenset(self.order[1:-1])


@dataclass(frozen=True)
class DropSolution:
    dropped: int | None
    remaining_length: float | None
    optimal: bool = True


class TableCapExceeded(ValueError):
    pass


def tour_length(d: np.ndarray, order: Iterable[int]) -> float:
    order = list(order)
    return float(sum(d[a, b] for a, b in zip(order, order[1:])))


def improves(new: float, current: float) -> bool:
    """Strict improvement beyond the relative tolerance."""
    return new < current - REL_TOL * abs(current)


def _check_ids(d: np.ndarray, cities: Iterable[int]) -> list[int]:
    n = d.shape[0]
    out = sorted(set(int(c) for c in cities) - {0})
    for c in out:
        if not 0 < c < n:
            raise ValueError(f"city id {c} out of range for {n} cities")
    return out


@lru_cache(maxsize=24)
def _blocks(size: int) -> tuple[tuple[tuple[np.ndarray, np.ndarray], ...], ...]:
    """For each layer s >= 2 and last city j: (masks of size s containing j, masks without j)."""
    masks = np.arange(1 << size, dtype=np.int64)
    counts = np.bitwise_count(masks)
    layers = []
    for s in range(2, size + 1):
        layer = masks[counts == s]
        per_j = []
        for j in range(size):
            bit = 1 << j
            sel = layer[(layer & bit) != 0]
            per_j.append((sel, sel ^ bit))
        layers.append(tuple(per_j))
    return tuple(layers)


def _blocks_for(size: int):
    if size <= 16:
        return _blocks(size)
    return _blocks.__wrapped__(size)


class _HeldKarp:
    """Partial or complete DP over subsets of ``cities`` (local bit i <-> cities[i])."""

    def __init__(self, d: np.ndarray, cities: list[int]):
        self.cities = cities
        self.size = len(cities)
        idx = np.array(cities, dtype=np.int64)
        self.local = d[np.ix_(idx, idx)] if self.size else np.zeros((0, 0))
        self.from_depot = d[0, idx] if self.size else np.zeros(0)
        self.layers_done = 0
        full = 1 << self.size
        self.cost = np.full((full, self.size), np.inf)
        self.parent = np.full((full, self.size), -1, dtype=np.int8)
        for j in range(self.size):
            self.cost[1 << j, j] = self.from_depot[j]
        if self.size:
            self.layers_done = 1

    def run(self, budget: Budget, upto: int | None = None) -> bool:
        """Fill layers up to ``upto`` (default all); False if the budget ran out."""
        upto = self.size if upto is None else upto
        if upto < 2:
            return True
        blocks = _blocks_for(self.size)
        n = self.size
        for s in range(max(2, self.layers_done + 1), upto + 1):
            for j, (sel, prev) in enumerate(blocks[s - 2]):
                if not budget.afford(len(sel) * n):
                    return False
                vals = self.cost[prev] + self.local[:, j]
                best = vals.argmin(axis=1)
                self.cost[sel, j] = vals[np.arange(len(sel)), best]
                self.parent[sel, j] = best
            self.layers_done = s
        return True

    def closed(self) -> np.ndarray:
        """Closed tour length for every subset mask (index 0 is the empty tour)."""
        out = (self.cost + self.from_depot).min(axis=1) if self.size else np.zeros(1)
        out[0] = 0.0
        return out

    def order(self, mask: int) -> list[int]:
        """Optimal visiting order (global ids, depot excluded) for a filled mask."""
        if mask == 0:
            return []
        j = int(np.argmin(self.cost[mask] + self.from_depot))
        path = []
        while mask:
            path.append(self.cities[j])
            p = int(self.parent[mask, j])
            mask ^= 1 << j
            j = p
        path.reverse()
        return path


def _nearest_neighbour(d: np.ndarray, cities: list[int]) -> list[int]:
    left = set(cities)
    cur = 0
    path = []
    while left:
        nxt = min(left, key=lambda c: (d[cur, c], c))
        path.append(nxt)
        left.remove(nxt)
        cur = nxt
    return path


def _incumbent(d: np.ndarray, cities: list[int], budget: Budget) -> list[int]:
    if len(cities) > 2 and budget.afford(len(cities) ** 2):
        return _nearest_neighbour(d, cities)
    return list(cities)


def tsp_exact(d: np.ndarray, city_set: Iterable[int], budget: Budget | None = None) -> TourSolution:
    """Shortest closed tour from the depot through ``city_set``.

    If the deadline fires, the best incumbent (nearest-neighbour or id order)
    is returned with ``optimal=False``.
    """
    budget = budget or Budget()
    cities = _check_ids(d, city_set)
    if len(cities) <= 2:
        # a single tour up to reversal
        order = (0, *cities, 0)
        return TourSolution(order, tour_length(d, order), True)
    start = _incumbent(d, cities, budget)
    hk = _HeldKarp(d, cities)
    if not hk.run(budget):
        order = (0, *start, 0)
        return TourSolution(order, tour_length(d, order), False)
    order = (0, *hk.order((1 << len(cities)) - 1), 0)
    return TourSolution(order, tour_length(d, order), True)


@dataclass
class SubsetTable:
    """Optimal tour length for every subset of ``cities``.

    Indexed by a local bitmask (bit i for ``cities[i]``) or by any iterable of
    city ids.  Entries of layers not reached before the deadline are NaN and
    ``complete`` is False.
    """

    cities: tuple[int, ...]
    lengths: np.ndarray
    complete: bool

    def __post_init__(self):
        self._bit = {c: 1 << i for i, c in enumerate(self.cities)}

    def mask(self, subset: Iterable[int]) -> int:
        m = 0
        for c in subset:
            if c == 0:
                continue
            try:
                m |= self._bit[c]
            except KeyError:
                raise KeyError(f"city {c} is not in the table") from None
        return m

    def members(self, mask: int) -> frozenset[int]:
        return frozenset(c for i, c in enumerate(self.cities) if mask >> i & 1)

    def __getitem__(self, subset) -> float:
        if isinstance(subset, (int, np.integer)):
            return float(self.lengths[subset])
        return float(self.lengths[self.mask(subset)])

    def __len__(self) -> int:
        return len(self.lengths)

    def as_dict(self) -> dict[frozenset[int], float]:
        return {self.members(m): float(v) for m, v in enumerate(self.lengths) if not math.isnan(v)}


def subset_tour_table(
    d: np.ndarray,
    full_set: Iterable[int],
    budget: Budget | None = None,
    cap: int = DEFAULT_TABLE_CAP,
) -> SubsetTable:
    """One Held-Karp pass yields the optimal closed tour of every subset."""
    budget = budget or Budget()
    cities = _check_ids(d, full_set)
    if len(cities) > cap:
        raise TableCapExceeded(f"{len(cities)} cities exceed the subset-table cap of {cap}")
    hk = _HeldKarp(d, cities)
    complete = hk.run(budget)
    lengths = hk.closed()
    if not complete:
        counts = np.bitwise_count(np.arange(len(lengths), dtype=np.int64))
        lengths[counts > hk.layers_done] = np.nan
    return SubsetTable(tuple(cities), lengths, complete)


def best_drop(
    d: np.ndarray,
    city_set: Iterable[int],
    must_keep: Iterable[int] = (),
    budget: Budget | None = None,
) -> DropSolution:
    """The city whose removal leaves the shortest tour over the rest.

    Candidates are ``city_set - must_keep`` (never the depot); ties go to the
    lowest id.  Returns ``dropped=None`` when no candidate exists.
    """
    budget = budget or Budget()
    cities = _check_ids(d, city_set)
    keep = set(must_keep)
    candidates = [c for c in cities if c not in keep]
    if not candidates:
        return DropSolution(None, None, True)
    size = len(cities)
    if size <= 3:
        # remainder has at most 2 cities: its tour is unique
        best = None
        for c in candidates:
            rest = [x for x in cities if x != c]
            val = tour_length(d, [0, *rest, 0])
            if best is None or improves(val, best[1]):
                best = (c, val)
        return DropSolution(best[0], best[1], True)

    start = _incumbent(d, cities, budget)
    hk = _HeldKarp(d, cities)
    if hk.run(budget, upto=size - 1):
        closed = hk.closed()
        full = (1 << size) - 1
        best = None
        for i, c in enumerate(cities):
            if c in keep:
                continue
            val = float(closed[full ^ (1 << i)])
            if best is None or improves(val, best[1]):
                best = (c, val)
        return DropSolution(best[0], best[1], True)

    # deadline: shortcut each candidate out of the incumbent tour
    tour = [0, *start, 0]
    total = tour_length(d, tour)
    best = None
    for pos in range(1, len(tour) - 1):
        c = tour[pos]
        if c in keep:
            continue
        a, b = tour[pos - 1], tour[pos + 1]
        val = total - d[a, c] - d[c, b] + d[a, b]
        if best is None or improves(val, best[1]) or (not improves(best[1], val) and c < best[0]):
            best = (c, float(val))
    return DropSolution(best[0], best[1], False)
