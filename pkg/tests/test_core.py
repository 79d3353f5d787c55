"""Property and oracle tests for the shared data types and profit functional."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bassopt import (ConfigError, Economics, PromotionPolicy, ResponseModel,
                     TimeGrid, Trajectory, UndefinedBaselineError, delta_pi,
                     profit)
from bassopt.core import adoption_from_survival


@given(t_end=st.floats(0.1, 1e4), n_steps=st.integers(1, 5000))
def test_grid_spacing(t_end, n_steps):
    g = TimeGrid(t_end, n_steps)
    t = g.times()
    assert len(t) == g.n_nodes == n_steps + 1
    assert t[0] == 0.0 and t[-1] == pytest.approx(t_end)
    assert np.allclose(np.diff(t), g.h)


def test_grid_rejects_bad_input():
    with pytest.raises(ConfigError):
        TimeGrid(-1.0, 10)
    with pytest.raises(ConfigError):
        TimeGrid(math.inf, 10)
    with pytest.raises(ConfigError):
        TimeGrid(1.0, 0)


def test_grid_refine_nests():
    g = TimeGrid(7.0, 10)
    fine = g.refine(3)
    assert np.allclose(fine.times()[::3], g.times())


@given(s=st.floats(0, 1e6))
def test_response_gain_forms(s):
    sq = ResponseModel("sqrt", bp=1.0)
    lg = ResponseModel("log", bp=1.0)
    assert sq.gain(s) == pytest.approx(math.sqrt(s))
    assert lg.gain(s) == pytest.approx(math.log1p(s))


def test_response_rejects_negative_rate():
    with pytest.raises(ConfigError):
        ResponseModel("sqrt", p0=-0.01)
    with pytest.raises(ConfigError):
        ResponseModel("sqrt").gain(-1.0)


def test_economics_infinite_flag():
    assert Economics(1.0, 0.01).is_infinite
    assert not Economics(1.0, 0.01, horizon=50.0).is_infinite


@given(n=st.integers(2, 40), c=st.floats(0, 10.0))
def test_policy_interpolation_constant(n, c):
    grid = TimeGrid(5.0, n)
    pol = PromotionPolicy(grid, np.full(grid.n_nodes, c), np.zeros(grid.n_nodes))
    t = np.linspace(0, 5.0, 17)
    sp, sq = pol.at(t)
    assert np.allclose(sp, c) and np.allclose(sq, 0.0)
    sp_step, _ = pol.at(t, step=True)
    assert np.allclose(sp_step, c)


def test_policy_step_uses_left_endpoint():
    grid = TimeGrid(1.0, 2)
    pol = PromotionPolicy(grid, np.array([3.0, 1.0, 5.0]), np.zeros(3))
    sp, _ = pol.at(np.array([0.0, 0.25, 0.5, 0.75, 1.0]), step=True)
    assert np.allclose(sp, [3.0, 3.0, 1.0, 1.0, 1.0])


def test_policy_group_total_spend_averages():
    grid = TimeGrid(1.0, 1)
    sp = np.array([[2.0, 4.0], [0.0, 0.0]])
    sq = np.array([[1.0, 1.0], [0.0, 2.0]])
    pol = PromotionPolicy(grid, sp, sq)
    assert np.allclose(pol.total_spend(), [3.0 + 1.0, 0.0 + 1.0])


def test_policy_rejects_negative_and_mismatched():
    grid = TimeGrid(1.0, 1)
    with pytest.raises(ConfigError):
        PromotionPolicy(grid, np.array([-1.0, 0.0]), np.zeros(2))
    with pytest.raises(ConfigError):
        PromotionPolicy(grid, np.zeros(3), np.zeros(3))


def test_adoption_from_survival_average():
    grid = TimeGrid(1.0, 1)
    surv = Trajectory(grid, np.array([[1.0, 1.0], [0.5, 0.3]]))
    f = adoption_from_survival(surv, 2)
    assert np.allclose(f.values, [0.0, 1.0 - 0.4])


def test_profit_zero_spend_exponential_adoption():
    # f(t) = 1 - e^{-p t} with zero spend: Pi = gamma * p / (p + theta)
    # discounted to a finite horizon.
    p, gamma, theta, T = 0.3, 10.0, 0.05, 40.0
    grid = TimeGrid(T, 4000)
    t = grid.times()
    f = Trajectory(grid, 1.0 - np.exp(-p * t))
    econ = Economics(gamma, theta, horizon=T)
    exact = gamma * p / (p + theta) * (1.0 - math.exp(-(p + theta) * T))
    got = profit(PromotionPolicy.zero(grid), f, econ)
    assert got == pytest.approx(exact, rel=1e-6)


def test_profit_subtracts_discounted_spend():
    gamma, theta, T = 5.0, 0.1, 10.0
    grid = TimeGrid(T, 2000)
    f = Trajectory(grid, np.zeros(grid.n_nodes))
    pol = PromotionPolicy(grid, np.full(grid.n_nodes, 2.0),
                          np.full(grid.n_nodes, 1.0))
    econ = Economics(gamma, theta, horizon=T)
    exact = -3.0 / theta * (1.0 - math.exp(-theta * T))
    assert profit(pol, f, econ) == pytest.approx(exact, rel=1e-6)


@settings(max_examples=25)
@given(p=st.floats(0.05, 1.0), extra=st.floats(0.0, 0.5))
def test_profit_monotone_in_adoption_speed(p, extra):
    grid = TimeGrid(30.0, 1500)
    t = grid.times()
    econ = Economics(3.0, 0.02, horizon=30.0)
    slow = Trajectory(grid, 1.0 - np.exp(-p * t))
    fast = Trajectory(grid, 1.0 - np.exp(-(p + extra) * t))
    zero = PromotionPolicy.zero(grid)
    assert profit(zero, fast, econ) >= profit(zero, slow, econ) - 1e-9


def test_profit_rejects_nonmonotone_adoption():
    grid = TimeGrid(1.0, 2)
    f = Trajectory(grid, np.array([0.0, 0.5, 0.2]))
    with pytest.raises(ValueError):
        profit(PromotionPolicy.zero(grid), f, Economics(1.0, 0.0, horizon=1.0))


def test_delta_pi():
    assert delta_pi(112.0, 100.0) == pytest.approx(0.12)
    with pytest.raises(UndefinedBaselineError):
        delta_pi(1.0, 0.0)
