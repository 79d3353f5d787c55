"""Optimal promotion on an infinite complete network split into two
equal-size homogeneous groups, with either a single promotion applied
uniformly or separate channels targeted at each group."""

from __future__ import annotations

import numpy as np

from .core import (ConfigError, Economics, OptimalSolution, PromotionPolicy,
                   ResponseForm, ResponseModel, TimeGrid, Trajectory,
                   delta_pi, profit)
from .solvers import (BvpProblem, SolverConfig, first_tail_time,
                      rk4_integrate, solve_bvp, tail_constant)


def _check_sqrt(g1: ResponseModel, g2: ResponseModel) -> None:
    if g1.form is not ResponseForm.SQRT or g2.form is not ResponseForm.SQRT:
        raise ConfigError("two-group model implements the sqrt response form only")


def _rates(groups, sp, sq, f_total):
    """Per-group adoption rates R_k = p^k(sp_k) + q^k(sq_k) (f1+f2)."""
    return np.array([g.eval_p(s) + g.eval_q(z) * f_total
                     for g, s, z in zip(groups, sp, sq)])


def hetero_forward_rhs(f: np.ndarray, t: float, sp, sq, groups) -> np.ndarray:
    """df_k/dt = (1/2 - f_k) R_k for each group (groups have measure 1/2)."""
    R = _rates(groups, sp, sq, float(f.sum()))
    return (0.5 - f) * R


def hetero_costate_rhs(psi: np.ndarray, f: np.ndarray, t: float, sp, sq,
                       groups, econ: Economics) -> np.ndarray:
    """Adjoint pair; the cross terms carry each group's internal-influence
    response evaluated at its own referral spend."""
    R = _rates(groups, sp, sq, float(f.sum()))
    q = np.array([g.eval_q(z) for g, z in zip(groups, sq)])
    disc = econ.gamma * np.exp(-econ.theta * t)
    own = (disc + psi) * (R - (0.5 - f) * q)
    cross = (disc + psi[::-1]) * ((0.5 - f) * q)[::-1]
    return own - cross


def controls_uniform(f: np.ndarray, psi: np.ndarray, t: float, groups,
                     econ: Economics) -> tuple[float, float]:
    """One shared (s_p, s_q): the stationarity brackets sum the two groups'
    marginal values."""
    e = np.exp(econ.theta * t)
    w = (0.5 - f) * (econ.gamma + psi * e)
    gp = sum(g.bp * wk for g, wk in zip(groups, w))
    gq = float(f.sum()) * sum(g.bq * wk for g, wk in zip(groups, w))
    return 0.25 * max(gp, 0.0) ** 2, 0.25 * max(gq, 0.0) ** 2


def controls_targeted(f: np.ndarray, psi: np.ndarray, t: float, groups,
                      econ: Economics) -> tuple[np.ndarray, np.ndarray]:
    """Per-group (s_p^k, s_q^k); each group's spend is weighted by its half
    of the population, which cancels the 1/2 in its marginal value."""
    e = np.exp(econ.theta * t)
    w = (0.5 - f) * (econ.gamma + psi * e)
    gp = np.array([g.bp * wk for g, wk in zip(groups, w)])
    gq = float(f.sum()) * np.array([g.bq * wk for g, wk in zip(groups, w)])
    return np.maximum(gp, 0.0) ** 2, np.maximum(gq, 0.0) ** 2


def baseline_adoption(groups, grid: TimeGrid) -> np.ndarray:
    """Unpromoted (f1, f2) on the grid."""
    zero = (0.0, 0.0)

    def rhs(t, f, _):
        return hetero_forward_rhs(f, t, zero, zero, groups)

    return rk4_integrate(rhs, np.zeros(2), grid)


def _probe_t_star(groups, cfg: SolverConfig, t_init: float = 50.0,
                  t_max: float = 1e5) -> float:
    t_end = t_init
    while t_end <= t_max:
        grid = TimeGrid(t_end, 4000)
        f0 = baseline_adoption(groups, grid).sum(axis=1)
        t_star = first_tail_time(grid.times(), f0, cfg.tail_tol)
        if t_star is not None:
            return t_star
        t_end *= 2
    raise RuntimeError(f"unpromoted adoption never saturated by t = {t_max}")


def _solve(group1: ResponseModel, group2: ResponseModel, econ: Economics,
           cfg: SolverConfig, targeted: bool) -> OptimalSolution:
    _check_sqrt(group1, group2)
    groups = (group1, group2)
    if econ.is_infinite:
        t_eff = _probe_t_star(groups, cfg)
        # each group's hazard settles at p0^k + q0^k once adoption saturates
        psi_term = np.array([
            tail_constant(econ.gamma, econ.theta, g.p0 + g.q0)
            * np.exp(-econ.theta * t_eff) for g in groups])
    else:
        t_eff = econ.horizon
        psi_term = np.zeros(2)
    grid = TimeGrid(t_eff, cfg.n_steps)

    if targeted:
        def control(t, f, psi):
            sp, sq = controls_targeted(f, psi, t, groups, econ)
            return np.concatenate([sp, sq])
    else:
        def control(t, f, psi):
            return np.array(controls_uniform(f, psi, t, groups, econ))

    def split(s):
        if targeted:
            return s[:2], s[2:]
        return (s[0], s[0]), (s[1], s[1])

    def fwd(t, f, s):
        sp, sq = split(s)
        return hetero_forward_rhs(f, t, sp, sq, groups)

    def bwd(t, psi, f, s):
        sp, sq = split(s)
        return hetero_costate_rhs(psi, f, t, sp, sq, groups, econ)

    problem = BvpProblem(forward_rhs=fwd, backward_rhs=bwd, control_law=control,
                         y0=np.zeros(2), psi_terminal=psi_term, grid=grid,
                         infinite_horizon=econ.is_infinite)
    res = solve_bvp(problem, cfg, residual_scale=econ.gamma)

    f0_groups = baseline_adoption(groups, grid)
    f0 = Trajectory(grid, f0_groups.sum(axis=1), label="f0")
    f_opt = Trajectory(grid, res.state.sum(axis=1), label="f_opt")
    if targeted:
        policy = PromotionPolicy(grid, res.controls[:, :2], res.controls[:, 2:])
    else:
        policy = PromotionPolicy(grid, res.controls[:, 0], res.controls[:, 1])

    pi0 = profit(PromotionPolicy.zero(grid), f0, econ)
    pi_opt = profit(policy, f_opt, econ)
    if econ.is_infinite:
        pi0 += _tail(f0_groups, groups, (0.0, 0.0), (0.0, 0.0), econ, t_eff)
        sp_end, sq_end = split(np.atleast_1d(res.controls[-1]))
        pi_opt += _tail(res.state, groups, sp_end, sq_end, econ, t_eff)

    return OptimalSolution(
        policy=policy, f_opt=f_opt, f0=f0,
        state=Trajectory(grid, res.state, label="f_k"),
        costate=Trajectory(grid, res.costate, label="Psi_k"),
        pi_opt=pi_opt, pi0=pi0, delta_pi=delta_pi(pi_opt, pi0),
        diagnostics={"method": res.method, "iterations": res.iterations,
                     "residual": res.residual, "t_eff": t_eff,
                     "infinite_horizon": econ.is_infinite,
                     "targeted": targeted, "history": res.history},
    )


def _tail(f_groups: np.ndarray, groups, sp, sq, econ: Economics,
          t_eff: float) -> float:
    """Post-truncation income, one exponential-relaxation term per group."""
    f_end = f_groups[-1]
    total = 0.0
    for k, g in enumerate(groups):
        gap = max(0.5 - f_end[k], 0.0)
        if gap == 0.0:
            continue
        r = g.eval_p(sp[k]) + g.eval_q(sq[k]) * float(f_end.sum())
        # same form as the single-population tail, scaled to the group's gap
        total += (econ.gamma * gap * r / (r + econ.theta)
                  * np.exp(-econ.theta * t_eff))
    return total


def solve_optimal_hetero_uniform(group1: ResponseModel, group2: ResponseModel,
                                 econ: Economics,
                                 cfg: SolverConfig = SolverConfig()) -> OptimalSolution:
    """One promotion applied to everybody; policy arrays are 1-D."""
    return _solve(group1, group2, econ, cfg, targeted=False)


def solve_optimal_hetero_targeted(group1: ResponseModel, group2: ResponseModel,
                                  econ: Economics,
                                  cfg: SolverConfig = SolverConfig()) -> OptimalSolution:
    """Separate (s_p^k, s_q^k) per group; policy arrays have shape (n, 2)
    and total spend averages the two half-population channels."""
    return _solve(group1, group2, econ, cfg, targeted=True)
