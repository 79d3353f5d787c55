"""Oracle tests for the exact subset-survival master equations."""

import numpy as np
import pytest

from bassopt import (GeneralNetwork, PromotionPolicy, ResponseModel,
                     SubsetIndex, TimeGrid, adoption_level, complete_as_general,
                     solve_master)
from bassopt.master import check_subset_monotonicity, survival_singletons


def _zero_policy(grid):
    return PromotionPolicy.zero(grid)


def test_two_node_symmetric_closed_form():
    # Symmetric pair with p = q = 0.1 and no promotion:
    #   [S^{1}] = [S^{2}] = e^{-0.2 t} (1 + 0.1 t),   [S^{12}] = e^{-0.2 t}
    p = q = 0.1
    resp = ResponseModel("sqrt", p0=p, q0=q)
    net = complete_as_general(2, resp)
    grid = TimeGrid(30.0, 3000)
    t = grid.times()
    traj = solve_master(net, resp, _zero_policy(grid), grid)
    idx = SubsetIndex(net)
    singles = traj.values[:, idx.singleton_idx]
    pair = traj.values[:, idx.index_of((0, 1))]
    exact_single = np.exp(-2 * p * t) * (1.0 + q * t)
    exact_pair = np.exp(-2 * p * t)
    assert np.max(np.abs(singles[:, 0] - exact_single)) < 1e-10
    assert np.max(np.abs(singles[:, 1] - exact_single)) < 1e-10
    assert np.max(np.abs(pair - exact_pair)) < 1e-10


def test_no_influence_decouples_to_exponentials(rng):
    # With q == 0 every node adopts independently: [S_Omega] = prod e^{-p_j t}.
    M = 4
    p = rng.uniform(0.05, 0.5, M)
    net = GeneralNetwork(M, p, np.zeros((M, M)), np.zeros(M), np.zeros((M, M)))
    resp = ResponseModel("sqrt")
    grid = TimeGrid(10.0, 2000)
    t = grid.times()
    traj = solve_master(net, resp, _zero_policy(grid), grid)
    idx = SubsetIndex(net)
    for m in range(1, 2 ** M):
        members = [j for j in range(M) if m & (1 << j)]
        exact = np.exp(-np.sum(p[members]) * t)
        assert np.max(np.abs(traj.values[:, m - 1] - exact)) < 1e-10


def test_subset_monotonicity_random_network(rng):
    M = 5
    q = rng.uniform(0, 0.3, (M, M))
    np.fill_diagonal(q, 0.0)
    net = GeneralNetwork(M, rng.uniform(0.01, 0.2, M), q,
                         rng.uniform(0, 0.05, M), 0.5 * q)
    resp = ResponseModel("sqrt", p0=0.0, bp=1.0, q0=0.0, bq=1.0)
    grid = TimeGrid(25.0, 1500)
    pol = PromotionPolicy(grid, np.full(grid.n_nodes, 0.2),
                          np.full(grid.n_nodes, 0.1))
    traj = solve_master(net, resp, pol, grid)
    assert check_subset_monotonicity(traj, SubsetIndex(net)) < 1e-9
    assert np.all(traj.values >= -1e-12) and np.all(traj.values <= 1 + 1e-12)


def test_complete_network_subset_symmetry(bench_resp):
    # On a homogeneous complete network [S_Omega] depends only on |Omega|.
    net = complete_as_general(4, bench_resp)
    grid = TimeGrid(40.0, 2000)
    pol = PromotionPolicy(grid, np.full(grid.n_nodes, 1.0),
                          np.full(grid.n_nodes, 2.0))
    traj = solve_master(net, bench_resp, pol, grid)
    idx = SubsetIndex(net)
    for size in range(1, 5):
        cols = traj.values[:, idx.sizes == size]
        spread = np.max(cols, axis=1) - np.min(cols, axis=1)
        assert np.max(spread) < 1e-10


def test_adoption_level_matches_singleton_average(bench_resp):
    net = complete_as_general(3, bench_resp)
    grid = TimeGrid(20.0, 500)
    traj = solve_master(net, bench_resp, _zero_policy(grid), grid)
    idx = SubsetIndex(net)
    f = adoption_level(traj, idx)
    manual = 1.0 - survival_singletons(traj, idx).values.mean(axis=1)
    assert np.allclose(f.values, manual)
    assert f.values[0] == 0.0
    assert np.all(np.diff(f.values) >= -1e-12)


def test_step_controls_change_solution(bench_resp):
    # Left-endpoint steps vs linear interpolation must differ for a ramp.
    net = complete_as_general(2, bench_resp)
    grid = TimeGrid(10.0, 50)
    ramp = np.linspace(0.0, 5.0, grid.n_nodes)
    pol = PromotionPolicy(grid, ramp, np.zeros(grid.n_nodes))
    smooth = solve_master(net, bench_resp, pol, grid)
    stepped = solve_master(net, bench_resp, pol, grid, step_controls=True)
    d = np.max(np.abs(smooth.values - stepped.values))
    assert d > 1e-6
    # steps lag the ramp, so stepped survival should be (weakly) higher
    assert np.all(stepped.values - smooth.values >= -1e-12)
