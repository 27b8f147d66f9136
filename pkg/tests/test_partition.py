import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtsplab.instances import City, Instance, round_robin_endowment
from mtsplab.solvers import (
    Budget,
    cluster_diameter,
    solve_clustering,
    solve_full_centr,
    solve_opt_decentr,
    tsp_exact,
)
from oracles import clustering_brute, dist, full_centr_brute, opt_decentr_brute, random_points


def make_instance(points, endowment):
    cities = tuple(City(i, float(x), float(y)) for i, (x, y) in enumerate(points))
    return Instance(len(points), len(endowment), 0, cities, tuple(frozenset(e) for e in endowment))


def random_instance(rng, n, m):
    pts = random_points(rng, n)
    return make_instance(pts, round_robin_endowment(n, m)), dist(pts)


def test_opt_decentr_singletons_match_assignment_enumeration():
    rng = np.random.default_rng(4)
    inst, d = random_instance(rng, 5, 4)
    sol = solve_opt_decentr(inst, d)
    brute = min(sum(2 * d[0, c] for c in perm) for perm in itertools.permutations(range(1, 5)))
    assert sol.optimal
    assert math.isclose(sol.total, brute, rel_tol=1e-9)
    assert sol.allocation.sizes == (1, 1, 1, 1)


def test_opt_decentr_single_salesman():
    rng = np.random.default_rng(5)
    inst, d = random_instance(rng, 8, 1)
    sol = solve_opt_decentr(inst, d)
    assert math.isclose(sol.total, tsp_exact(d, range(1, 8)).length, rel_tol=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_opt_decentr_matches_split_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    inst, d = random_instance(rng, 9, 2)
    sol = solve_opt_decentr(inst, d)
    assert sol.optimal
    assert sol.allocation.sizes == inst.sizes
    assert math.isclose(sol.total, opt_decentr_brute(d, 9, inst.sizes), rel_tol=1e-9)
    assert math.isclose(sol.total, sum(t.length for t in sol.tours), rel_tol=1e-12)


def test_opt_decentr_zero_budget_returns_endowment():
    rng = np.random.default_rng(6)
    inst, d = random_instance(rng, 10, 3)
    sol = solve_opt_decentr(inst, d, Budget(0, deterministic=True))
    assert not sol.optimal
    assert list(sol.allocation.groups) == list(inst.endowment)


def test_full_centr_forced_partition():
    d = dist([[0, 0], [3, 4], [-6, 8]])
    sol = solve_full_centr(d, 3, 2)
    assert sol.total == pytest.approx(2 * 5 + 2 * 10)
    assert sol.optimal


@pytest.mark.parametrize("seed", range(6))
def test_full_centr_matches_brute_force(seed):
    rng = np.random.default_rng(200 + seed)
    d = dist(random_points(rng, 7))
    sol = solve_full_centr(d, 7, 2)
    assert math.isclose(sol.total, full_centr_brute(d, 7, 2), rel_tol=1e-9)
    one = solve_full_centr(d, 7, 1)
    assert math.isclose(one.total, tsp_exact(d, range(1, 7)).length, rel_tol=1e-12)
    assert all(sol.allocation.groups)
    assert [min(g) for g in sol.allocation.groups] == sorted(min(g) for g in sol.allocation.groups)


def test_full_centr_rejects_infeasible_m():
    d = dist(np.zeros((4, 2)))
    with pytest.raises(ValueError):
        solve_full_centr(d, 4, 4)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(4, 9), m=st.integers(2, 3))
def test_full_centr_never_worse_than_opt_decentr(seed, n, m):
    if m > n - 1:
        return
    rng = np.random.default_rng(seed)
    inst, d = random_instance(rng, n, m)
    full = solve_full_centr(d, n, m)
    opt = solve_opt_decentr(inst, d)
    assert full.total <= opt.total * (1 + 1e-9)


def test_clustering_separated_groups():
    pts = [[50, 0], [0, 0], [1, 0], [100, 0], [0, 1], [101, 1], [100, 1]]
    d = dist(pts)
    c = solve_clustering(d, [3, 3])
    assert {frozenset(g) for g in c.clusters} == {frozenset({1, 2, 4}), frozenset({3, 5, 6})}
    assert c.max_diameter == pytest.approx(math.sqrt(2))


def test_clustering_singletons_are_identity_ordered():
    rng = np.random.default_rng(7)
    d = dist(random_points(rng, 6))
    c = solve_clustering(d, {0: 1, 1: 1, 2: 1, 3: 1, 4: 1})
    assert c.clusters == tuple(frozenset({k}) for k in range(1, 6))
    assert c.max_diameter == 0.0


def test_clustering_rejects_bad_sizes():
    d = dist(np.zeros((5, 2)))
    with pytest.raises(ValueError):
        solve_clustering(d, [2, 1])


@pytest.mark.parametrize("seed", range(6))
def test_clustering_matches_brute_force(seed):
    rng = np.random.default_rng(300 + seed)
    d = dist(random_points(rng, 9))
    c = solve_clustering(d, [4, 4])
    assert c.optimal
    assert c.max_diameter == clustering_brute(d, 9, [4, 4])
    assert c.max_diameter == max(cluster_diameter(d, g) for g in c.clusters)
    assert [len(g) for g in c.clusters] == [4, 4]


def test_clustering_tie_break_is_lexicographic():
    # all cities on one point: every split has diameter 0, first fill wins
    d = dist(np.zeros((7, 2)))
    c = solve_clustering(d, [3, 3])
    assert c.clusters == (frozenset({1, 2, 3}), frozenset({4, 5, 6}))


def test_solvers_are_deterministic():
    rng = np.random.default_rng(8)
    inst, d = random_instance(rng, 10, 3)
    assert solve_opt_decentr(inst, d) == solve_opt_decentr(inst, d)
    assert solve_full_centr(d, 10, 3) == solve_full_centr(d, 10, 3)
