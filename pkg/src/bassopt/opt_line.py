"""Optimal promotion on the infinite line (each node hears from its two
neighbours): a four-equation boundary-value system in (f, y, Psi1, Psi2),
where y accumulates the external adoption rate.

The optimizer couples the aggregate exposure term through the per-edge
internal rate q/2 (see :func:`edge_response`); the unpromoted closed form
:func:`line_closed_form` is stated in terms of the total rate q and is the
reference for ring simulations."""

from __future__ import annotations

import numpy as np

from .core import (Economics, OptimalSolution, PromotionPolicy, ResponseForm,
                   ResponseModel, TimeGrid, Trajectory, delta_pi, profit)
from .solvers import (BvpProblem, SolverConfig, discounted_tail_profit,
                      probe_tail_time, solve_bvp, tail_constant)


def line_closed_form(p0: float, q0: float, t: np.ndarray) -> np.ndarray:
    """Unpromoted adoption on the line:
    f0(t) = 1 - exp(-(p0+q0) t - (q0/p0)(e^{-p0 t} - 1))."""
    return 1.0 - np.exp(-(p0 + q0) * t - (q0 / p0) * (np.exp(-p0 * t) - 1.0))


def line_rhs(state: np.ndarray, psi: np.ndarray, t: float, s,
             resp: ResponseModel, econ: Economics) -> tuple[np.ndarray, np.ndarray]:
    """Forward and adjoint right-hand sides at one point.

    state = (f, y), psi = (Psi1, Psi2):
      df/dt   = (p + q(1 - e^{-y}))(1 - f)
      dy/dt   = p
      dPsi1/dt = (gamma e^{-theta t} + Psi1)(p + q(1 - e^{-y}))
      dPsi2/dt = -(gamma e^{-theta t} + Psi1)(1 - f) q e^{-y}
    """
    f, y = float(state[0]), float(state[1])
    if y < -1e-12:
        raise ValueError(f"accumulated exposure y = {y} < 0")
    p = resp.eval_p(s[0])
    q = resp.eval_q(s[1])
    ey = np.exp(-y)
    rate = p + q * (1.0 - ey)
    disc = econ.gamma * np.exp(-econ.theta * t) + psi[0]
    dstate = np.array([rate * (1.0 - f), p])
    dpsi = np.array([disc * rate, -disc * (1.0 - f) * q * ey])
    return dstate, dpsi


def controls_sqrt_line(state: np.ndarray, psi: np.ndarray, t: float,
                       resp: ResponseModel, econ: Economics) -> tuple[float, float]:
    f, y = float(state[0]), float(state[1])
    e = np.exp(econ.theta * t)
    b1 = econ.gamma + psi[0] * e
    gp = b1 * (1.0 - f) + psi[1] * e
    gq = b1 * (1.0 - f) * (1.0 - np.exp(-y))
    sp = (resp.bp ** 2 / 4.0) * max(gp, 0.0) ** 2
    sq = (resp.bq ** 2 / 4.0) * max(gq, 0.0) ** 2
    return sp, sq


def controls_log_line(state: np.ndarray, psi: np.ndarray, t: float,
                      resp: ResponseModel, econ: Economics) -> tuple[float, float]:
    f, y = float(state[0]), float(state[1])
    e = np.exp(econ.theta * t)
    b1 = econ.gamma + psi[0] * e
    gp = b1 * (1.0 - f) + psi[1] * e
    gq = b1 * (1.0 - f) * (1.0 - np.exp(-y))
    return max(resp.bp * gp - 1.0, 0.0), max(resp.bq * gq - 1.0, 0.0)


def _control_law(resp: ResponseModel, econ: Economics):
    law = (controls_sqrt_line if resp.form is ResponseForm.SQRT
           else controls_log_line)

    def control(t, y, psi):
        return np.array(law(y, psi, t, resp, econ))

    return control


def edge_response(resp: ResponseModel) -> ResponseModel:
    """Internal-rate response per incoming edge of the line: each of the two
    neighbours carries half of the total internal rate q(s_q)."""
    return ResponseModel(resp.form, p0=resp.p0, bp=resp.bp,
                         q0=resp.q0 / 2.0, bq=resp.bq / 2.0)


def solve_optimal_line(resp: ResponseModel, econ: Economics,
                       cfg: SolverConfig = SolverConfig()) -> OptimalSolution:
    """Solve the line promotion problem.

    The exposure coupling uses the per-edge internal rate q/2 throughout
    (dynamics, adjoints, control laws, and the unpromoted baseline), so the
    optimum and the profit ratio are those of the per-edge aggregate model.
    Unbounded horizons are truncated at t* where the unpromoted gap drops
    below tail_tol; the terminal costates take their asymptotic values
    Psi1(t*) = -gamma A/(theta+A) e^{-theta t*} with A = p0 + q0/2, and
    Psi2(t*) = 0 (the exposure channel dies with e^{-y})."""
    resp = edge_response(resp)
    if econ.is_infinite:
        t_eff = probe_tail_time(lambda t: line_closed_form(resp.p0, resp.q0, t),
                                cfg.tail_tol)
        A = resp.p0 + resp.q0
        psi_term = np.array([tail_constant(econ.gamma, econ.theta, A)
                             * np.exp(-econ.theta * t_eff), 0.0])
    else:
        t_eff = econ.horizon
        psi_term = np.zeros(2)
    grid = TimeGrid(t_eff, cfg.n_steps)

    problem = BvpProblem(
        forward_rhs=lambda t, y, s: line_rhs(y, np.zeros(2), t, s, resp, econ)[0],
        backward_rhs=lambda t, psi, y, s: line_rhs(y, psi, t, s, resp, econ)[1],
        control_law=_control_law(resp, econ),
        y0=np.zeros(2),
        psi_terminal=psi_term,
        grid=grid,
        infinite_horizon=econ.is_infinite,
    )
    res = solve_bvp(problem, cfg, residual_scale=econ.gamma)

    t = grid.times()
    f0 = Trajectory(grid, line_closed_form(resp.p0, resp.q0, t), label="f0")
    f_opt = Trajectory(grid, res.state[:, 0], label="f_opt")
    policy = PromotionPolicy(grid, res.controls[:, 0], res.controls[:, 1])

    pi0 = profit(PromotionPolicy.zero(grid), f0, econ)
    pi_opt = profit(policy, f_opt, econ)
    if econ.is_infinite:
        A = resp.p0 + resp.q0
        pi0 += discounted_tail_profit(econ.gamma, econ.theta,
                                      f0.values[-1], A, t_eff)
        y_end = res.state[-1, 1]
        r = (resp.eval_p(policy.sp[-1])
             + resp.eval_q(policy.sq[-1]) * (1.0 - np.exp(-y_end)))
        pi_opt += discounted_tail_profit(econ.gamma, econ.theta,
                                         f_opt.values[-1], r, t_eff)

    return OptimalSolution(
        policy=policy, f_opt=f_opt, f0=f0,
        state=Trajectory(grid, res.state, label="f_y"),
        costate=Trajectory(grid, res.costate, label="Psi_1_2"),
        pi_opt=pi_opt, pi0=pi0, delta_pi=delta_pi(pi_opt, pi0),
        diagnostics={"method": res.method, "iterations": res.iterations,
                     "residual": res.residual, "t_eff": t_eff,
                     "infinite_horizon": econ.is_infinite,
                     "internal_rate": "per-edge",
                     "history": res.history},
    )


def costate_bounds_violation(sol: OptimalSolution, resp: ResponseModel,
                             econ: Economics) -> float:
    """Largest violation of the line costate bounds at the converged solution:
    -gamma e^{-theta t} <= Psi1 <= 0 and
    max(0, (2 sqrt(s_p)/b_p - (1-f) gamma) e^{-theta t}) <= Psi2
      <= (2 sqrt(s_p)/b_p) e^{-theta t}."""
    t = sol.policy.grid.times()
    f = sol.f_opt.values
    psi1 = sol.costate.values[:, 0]
    psi2 = sol.costate.values[:, 1]
    disc = np.exp(-econ.theta * t)
    worst = max(float(np.max(-econ.gamma * disc - psi1)), float(np.max(psi1)))
    if resp.bp > 0:
        root = 2.0 * np.sqrt(sol.policy.sp) / resp.bp
        lo = np.maximum(0.0, (root - (1.0 - f) * econ.gamma) * disc)
        hi = root * disc
        worst = max(worst, float(np.max(lo - psi2)), float(np.max(psi2 - hi)))
    return worst
