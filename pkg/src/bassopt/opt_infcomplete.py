"""Optimal promotion in the infinite-population complete-network limit:
a single state/costate pair (f, Psi), plus executable checks of the
analytic properties of the optimal controls."""

from __future__ import annotations

import numpy as np

from .core import (Economics, OptimalSolution, PromotionPolicy, ResponseForm,
                   ResponseModel, TimeGrid, Trajectory, delta_pi, profit)
from .solvers import (BvpProblem, SolverConfig, discounted_tail_profit,
                      infinite_horizon_prepare, probe_tail_time, solve_bvp)

#: relative noise floor for classifying the shape of the total spend curve
_SHAPE_FLOOR = 1e-10


def bass_closed_form(p0: float, q0: float, t: np.ndarray) -> np.ndarray:
    """Unpromoted adoption f0(t) = (1 - e^{-(p+q)t}) / (1 + (q/p) e^{-(p+q)t})."""
    e = np.exp(-(p0 + q0) * t)
    return (1.0 - e) / (1.0 + (q0 / p0) * e)


def infcomplete_rhs(f: float, psi: float, t: float, s,
                    resp: ResponseModel, econ: Economics) -> tuple[float, float]:
    """df/dt = (1-f)(p + q f);  dPsi/dt = (gamma e^{-theta t} + Psi)(p + q(2f-1))."""
    if f < -1e-9 or f > 1 + 1e-9:
        raise ValueError(f"adoption level {f} outside [0, 1]")
    p = resp.eval_p(s[0])
    q = resp.eval_q(s[1])
    dfdt = (1.0 - f) * (p + q * f)
    dpsi = (econ.gamma * np.exp(-econ.theta * t) + psi) * (p + q * (2.0 * f - 1.0))
    return dfdt, dpsi


def controls_sqrt_infcomplete(f: float, psi: float, t: float,
                              resp: ResponseModel,
                              econ: Economics) -> tuple[float, float]:
    """s_p = (b_p^2/4) ((1-f)(Psi e^{theta t} + gamma))^2 and the ratio-locked
    s_q = (b_q^2/b_p^2) f^2 s_p, both computed from the shared bracket so the
    ratio identity holds to rounding."""
    bracket = max((1.0 - f) * (psi * np.exp(econ.theta * t) + econ.gamma), 0.0)
    sp = (resp.bp ** 2 / 4.0) * bracket ** 2
    sq = (resp.bq ** 2 / 4.0) * (f * bracket) ** 2
    return sp, sq


def controls_log_infcomplete(f: float, psi: float, t: float,
                             resp: ResponseModel,
                             econ: Economics) -> tuple[float, float]:
    bracket = max((1.0 - f) * (psi * np.exp(econ.theta * t) + econ.gamma), 0.0)
    return (max(resp.bp * bracket - 1.0, 0.0),
            max(resp.bq * f * bracket - 1.0, 0.0))


def _control_law(resp: ResponseModel, econ: Economics):
    law = (controls_sqrt_infcomplete if resp.form is ResponseForm.SQRT
           else controls_log_infcomplete)

    def control(t, y, psi):
        return np.array(law(float(y[0]), float(psi[0]), t, resp, econ))

    return control


def solve_optimal_infcomplete(resp: ResponseModel, econ: Economics,
                              cfg: SolverConfig = SolverConfig()) -> OptimalSolution:
    """Solve the scalar promotion problem; infinite horizons are truncated at
    t* (unpromoted gap below tail_tol) with the asymptotic terminal costate
    Psi(t*) = -gamma A/(theta + A) e^{-theta t*},  A = p0 + q0."""
    if econ.is_infinite:
        t_eff = probe_tail_time(lambda t: bass_closed_form(resp.p0, resp.q0, t),
                                cfg.tail_tol)
        grid = TimeGrid(t_eff, cfg.n_steps)
        _, psi_term = infinite_horizon_prepare(
            grid.times(), bass_closed_form(resp.p0, resp.q0, grid.times()),
            resp.p0 + resp.q0, econ.gamma, econ.theta, cfg)
    else:
        t_eff = econ.horizon
        grid = TimeGrid(t_eff, cfg.n_steps)
        psi_term = np.zeros(1)

    problem = BvpProblem(
        forward_rhs=lambda t, y, s: np.array(
            [infcomplete_rhs(float(y[0]), 0.0, t, s, resp, econ)[0]]),
        backward_rhs=lambda t, psi, y, s: np.array(
            [infcomplete_rhs(float(y[0]), float(psi[0]), t, s, resp, econ)[1]]),
        control_law=_control_law(resp, econ),
        y0=np.zeros(1),
        psi_terminal=psi_term,
        grid=grid,
        infinite_horizon=econ.is_infinite,
    )
    res = solve_bvp(problem, cfg, residual_scale=econ.gamma)

    t = grid.times()
    f0 = Trajectory(grid, bass_closed_form(resp.p0, resp.q0, t), label="f0")
    f_opt = Trajectory(grid, res.state[:, 0], label="f_opt")
    policy = PromotionPolicy(grid, res.controls[:, 0], res.controls[:, 1])

    pi0 = profit(PromotionPolicy.zero(grid), f0, econ)
    pi_opt = profit(policy, f_opt, econ)
    if econ.is_infinite:
        A = resp.p0 + resp.q0
        pi0 += discounted_tail_profit(econ.gamma, econ.theta,
                                      f0.values[-1], A, t_eff)
        r = resp.eval_p(policy.sp[-1]) + resp.eval_q(policy.sq[-1]) * f_opt.values[-1]
        pi_opt += discounted_tail_profit(econ.gamma, econ.theta,
                                         f_opt.values[-1], r, t_eff)

    sol = OptimalSolution(
        policy=policy, f_opt=f_opt, f0=f0,
        state=Trajectory(grid, res.state, label="f"),
        costate=Trajectory(grid, res.costate, label="Psi"),
        pi_opt=pi_opt, pi0=pi0, delta_pi=delta_pi(pi_opt, pi0),
        diagnostics={"method": res.method, "iterations": res.iterations,
                     "residual": res.residual, "t_eff": t_eff,
                     "infinite_horizon": econ.is_infinite,
                     "history": res.history},
    )
    sol.diagnostics["checks"] = corollary_checks(sol, resp, econ)
    return sol


def _slope_at_zero(values: np.ndarray, h: float) -> float:
    """4th-order one-sided first derivative at the left endpoint."""
    v = values
    return (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * h)


def classify_total_spend(total: np.ndarray) -> str:
    """Shape of s_p + s_q: "monotone-decreasing", "decrease-increase", or
    "decrease-increase-decrease"; sign changes below a relative noise floor
    are ignored."""
    d = np.diff(total)
    floor = _SHAPE_FLOOR * max(float(np.max(total)), 1e-300)
    signs = np.sign(np.where(np.abs(d) < floor, 0.0, d))
    signs = signs[signs != 0]
    runs = []
    for s in signs:
        if not runs or runs[-1] != s:
            runs.append(s)
    if runs in ([], [-1.0]):
        return "monotone-decreasing"
    if runs == [-1.0, 1.0]:
        return "decrease-increase"
    if runs == [-1.0, 1.0, -1.0]:
        return "decrease-increase-decrease"
    return "irregular"


def corollary_checks(sol: OptimalSolution, resp: ResponseModel,
                     econ: Economics) -> dict:
    """Numerical verification of the analytic properties of the optimum.

    Reported, never fatal: s_q(0) = 0; s_p initially decreasing; the initial
    slope identity s_p'(0) + 2 s_p(0)(q0 - theta) + sqrt(s_p(0)) theta gamma
    b_p = 0 (sqrt form, q0 > theta); the costate bounds
    -gamma e^{-theta t} <= Psi <= 0 past the adoption midpoint; vanishing
    terminal controls for unbounded horizons; and the total-spend shape.
    """
    grid = sol.policy.grid
    t = grid.times()
    sp, sq = sol.policy.sp, sol.policy.sq
    psi = sol.costate.values[:, 0]
    f = sol.f_opt.values
    checks: dict = {"sq_at_zero": float(sq[0])}

    sp_slope = _slope_at_zero(sp, grid.h)
    checks["sp_slope_at_zero"] = sp_slope
    checks["sp_initially_decreasing"] = bool(sp_slope < 0)

    if resp.form is ResponseForm.SQRT and resp.q0 > econ.theta:
        resid = (sp_slope + 2 * sp[0] * (resp.q0 - econ.theta)
                 + np.sqrt(max(sp[0], 0.0)) * econ.theta * econ.gamma * resp.bp)
        scale = max(abs(sp_slope), 1.0)
        checks["initial_slope_residual"] = float(resid)
        checks["initial_slope_ok"] = bool(abs(resid) <= 1e-3 * scale)

    late = f >= 0.5
    if np.any(late):
        lo = -econ.gamma * np.exp(-econ.theta * t[late])
        slack = 1e-8 * econ.gamma
        checks["costate_bounds_ok"] = bool(
            np.all(psi[late] >= lo - slack) and np.all(psi[late] <= slack))

    if econ.is_infinite:
        peak = max(float(np.max(sp + sq)), 1e-300)
        checks["terminal_controls_vanish"] = bool(
            (sp[-1] + sq[-1]) <= 1e-3 * peak)

    checks["total_spend_shape"] = classify_total_spend(sp + sq)
    return checks


def sweep_delta_pi_vs_T(resp: ResponseModel, econ_base: Economics,
                        T_values, cfg: SolverConfig = SolverConfig()) -> list[dict]:
    """Relative profit gain as a function of the planning horizon."""
    rows = []
    for T in T_values:
        econ = Economics(econ_base.gamma, econ_base.theta, horizon=float(T))
        row = {"T": float(T)}
        try:
            sol = solve_optimal_infcomplete(resp, econ, cfg)
            row.update(delta_pi=sol.delta_pi, pi_opt=sol.pi_opt, pi0=sol.pi0,
                       converged=True, error="")
        except Exception as exc:  # noqa: BLE001 - per-row failure report
            row.update(delta_pi=float("nan"), pi_opt=float("nan"),
                       pi0=float("nan"), converged=False, error=str(exc))
        rows.append(row)
    return rows
