"""Optimal promotion on a finite homogeneous complete network of M nodes:
the reduced M state + M costate boundary-value system with closed-form
control laws for the sqrt and log response forms."""

from __future__ import annotations

import numpy as np

from .core import (ConfigError, Economics, OptimalSolution, PromotionPolicy,
                   ResponseForm, ResponseModel, TimeGrid, Trajectory,
                   delta_pi, dfdt, profit)
from .networks import CompleteHomogeneous
from .solvers import (BvpProblem, SolverConfig, discounted_tail_profit,
                      first_tail_time, rk4_integrate, solve_bvp)


def _weights(M: int):
    """n, the pair weight n(M-n)/(M-1), and the costate source weight
    (n-1)(M-n+1)/(M-1) for n = 1..M."""
    n = np.arange(1, M + 1, dtype=float)
    w = n * (M - n) / (M - 1)
    c = (n - 1) * (M - n + 1) / (M - 1)
    return n, w, c


def complete_forward_rhs(S: np.ndarray, t: float, s, resp: ResponseModel,
                         M: int) -> np.ndarray:
    """d[S^n]/dt = -(n p + n(M-n)/(M-1) q)[S^n] + n(M-n)/(M-1) q [S^{n+1}].

    The n = M row is pure decay at rate M p (no larger subset to couple to).
    """
    if S.shape != (M,):
        raise ValueError(f"state length {S.shape} != ({M},)")
    p = resp.eval_p(s[0])
    q = resp.eval_q(s[1])
    n, w, _ = _weights(M)
    S_up = np.append(S[1:], 0.0)
    return -(n * p + w * q) * S + w * q * S_up


def complete_costate_rhs(psi: np.ndarray, S: np.ndarray, t: float, s,
                         resp: ResponseModel, econ: Economics,
                         M: int) -> np.ndarray:
    """Adjoint system of the reduced Hamiltonian; the n = 1 row carries the
    gamma e^{-theta t} income source and the n = 2 row its image under the
    pair-to-singleton coupling."""
    if psi.shape != (M,) or S.shape != (M,):
        raise ValueError("costate/state length mismatch")
    p = resp.eval_p(s[0])
    q = resp.eval_q(s[1])
    n, w, c = _weights(M)
    disc = econ.gamma * np.exp(-econ.theta * t)
    src1 = np.zeros(M)
    src1[0] = disc
    psi_prev = np.concatenate([[0.0], psi[:-1]])
    src2 = np.zeros(M)
    if M >= 2:
        src2[1] = disc
    return (psi - src1) * (n * p + w * q) - (psi_prev - src2) * c * q


def _brackets(S: np.ndarray, psi: np.ndarray, t: float, econ: Economics,
              M: int) -> tuple[float, float]:
    """Stationarity brackets for the two channels (before the response-form
    specific inversion).  The advertising bracket carries the subset-size
    factor n from d p_Omega / d s_p = |Omega| p'(s_p)."""
    n, w, _ = _weights(M)
    e = np.exp(econ.theta * t)
    bp_sum = float(np.dot(n * psi, S))
    gp = econ.gamma * S[0] - e * bp_sum
    diff = S[:-1] - S[1:] if M > 1 else np.zeros(0)
    bq_sum = float(np.dot(psi[:-1] * w[:-1], diff))
    gq = econ.gamma * (S[0] - S[1] if M > 1 else 0.0) - e * bq_sum
    return gp, gq


def controls_sqrt_complete(S: np.ndarray, psi: np.ndarray, t: float,
                           resp: ResponseModel, econ: Economics,
                           M: int) -> tuple[float, float]:
    gp, gq = _brackets(S, psi, t, econ, M)
    sp = (resp.bp ** 2 / 4.0) * max(gp, 0.0) ** 2
    sq = (resp.bq ** 2 / 4.0) * max(gq, 0.0) ** 2
    return sp, sq


def controls_log_complete(S: np.ndarray, psi: np.ndarray, t: float,
                          resp: ResponseModel, econ: Economics,
                          M: int) -> tuple[float, float]:
    gp, gq = _brackets(S, psi, t, econ, M)
    return max(resp.bp * gp - 1.0, 0.0), max(resp.bq * gq - 1.0, 0.0)


def control_law_complete(resp: ResponseModel, econ: Economics, M: int):
    law = (controls_sqrt_complete if resp.form is ResponseForm.SQRT
           else controls_log_complete)

    def control(t, S, psi):
        return np.array(law(S, psi, t, resp, econ, M))

    return control


def baseline_survival(M: int, resp: ResponseModel, grid: TimeGrid) -> np.ndarray:
    """Unpromoted [S^n](t) on the grid (s = 0)."""
    zero = (0.0, 0.0)

    def rhs(t, S, _):
        return complete_forward_rhs(S, t, zero, resp, M)

    return rk4_integrate(rhs, np.ones(M), grid)


def _probe_t_star(M: int, resp: ResponseModel, cfg: SolverConfig,
                  t_init: float = 50.0, t_max: float = 1e5) -> float:
    t_end = t_init
    while t_end <= t_max:
        grid = TimeGrid(t_end, 4000)
        f0 = 1.0 - baseline_survival(M, resp, grid)[:, 0]
        t_star = first_tail_time(grid.times(), f0, cfg.tail_tol)
        if t_star is not None:
            return t_star
        t_end *= 2
    raise RuntimeError(f"unpromoted adoption never saturated by t = {t_max}")


def solve_optimal_complete(M: int, resp: ResponseModel, econ: Economics,
                           cfg: SolverConfig = SolverConfig()) -> OptimalSolution:
    """Solve the M-node complete-network promotion problem.

    For an unbounded horizon the system is truncated at the first time the
    unpromoted adoption gap drops below ``cfg.tail_tol``, with a zero
    terminal costate (all costates are O(gamma e^{-theta t}) there).
    """
    if M < 2:
        raise ConfigError(f"complete network needs M >= 2, got {M}")
    if econ.is_infinite:
        t_eff = _probe_t_star(M, resp, cfg)
    else:
        t_eff = econ.horizon
    grid = TimeGrid(t_eff, cfg.n_steps)

    problem = BvpProblem(
        forward_rhs=lambda t, S, s: complete_forward_rhs(S, t, s, resp, M),
        backward_rhs=lambda t, psi, S, s: complete_costate_rhs(
            psi, S, t, s, resp, econ, M),
        control_law=control_law_complete(resp, econ, M),
        y0=np.ones(M),
        psi_terminal=np.zeros(M),
        grid=grid,
        infinite_horizon=econ.is_infinite,
    )
    res = solve_bvp(problem, cfg, residual_scale=econ.gamma)

    S0 = baseline_survival(M, resp, grid)
    f0 = Trajectory(grid, 1.0 - S0[:, 0], label="f0")
    f_opt = Trajectory(grid, 1.0 - res.state[:, 0], label="f_opt")
    policy = PromotionPolicy(grid, res.controls[:, 0], res.controls[:, 1])

    pi0 = profit(PromotionPolicy.zero(grid), f0, econ)
    pi_opt = profit(policy, f_opt, econ)
    if econ.is_infinite:
        pi0 += _tail_profit(f0.values, grid, econ)
        pi_opt += _tail_profit(f_opt.values, grid, econ)

    return OptimalSolution(
        policy=policy, f_opt=f_opt, f0=f0,
        state=Trajectory(grid, res.state, label="S_n"),
        costate=Trajectory(grid, res.costate, label="Psi_n"),
        pi_opt=pi_opt, pi0=pi0, delta_pi=delta_pi(pi_opt, pi0),
        diagnostics={"method": res.method, "iterations": res.iterations,
                     "residual": res.residual, "t_eff": t_eff,
                     "infinite_horizon": econ.is_infinite,
                     "history": res.history},
    )


def _tail_profit(f: np.ndarray, grid: TimeGrid, econ: Economics) -> float:
    """Income accrued past the truncation point, with the adoption gap
    relaxing exponentially at the terminal hazard rate."""
    gap = max(1.0 - f[-1], 0.0)
    rate = dfdt(f, grid.h)[-1] / gap if gap > 0 else 0.0
    return discounted_tail_profit(econ.gamma, econ.theta, f[-1], rate, grid.t_end)
