"""Optimal promotion on a general network: the coupled system of all
2^M - 1 subset survival probabilities and their adjoints, with the
Hamiltonian stationarity condition solved in closed form for the sqrt
and log response shapes."""

from __future__ import annotations

import numpy as np

from .core import (ConfigError, Economics, OptimalSolution, PromotionPolicy,
                   ResponseForm, ResponseModel, TimeGrid, Trajectory,
                   delta_pi, dfdt, profit)
from .master import SubsetIndex, _rhs as master_subset_rhs
from .networks import GeneralNetwork
from .solvers import (BvpProblem, SolverConfig, discounted_tail_profit,
                      first_tail_time, rk4_integrate, solve_bvp)

#: 2 * (2^M - 1) coupled equations get expensive quickly
GENERAL_MAX_NODES = 10


def general_costate_rhs(psi: np.ndarray, S: np.ndarray, t: float, s,
                        net: GeneralNetwork, resp: ResponseModel,
                        econ: Economics,
                        index: SubsetIndex | None = None) -> np.ndarray:
    """dPsi_Omega/dt over all nonempty subsets.

    Singleton rows carry the income source gamma/M e^{-theta t}; pair rows
    carry its image under the pair-to-singleton couplings q_{m -> Omega\\{m}}.
    """
    index = index or SubsetIndex(net)
    if psi.shape != (index.n_states,) or S.shape != (index.n_states,):
        raise ValueError("costate/state not aligned to the subset index")
    g_p = float(resp.gain(s[0]))
    g_q = float(resp.gain(s[1]))
    return _costate_rhs(psi, t, g_p, g_q, index, econ)


def _costate_rhs(psi: np.ndarray, t: float, g_p: float, g_q: float,
                 index: SubsetIndex, econ: Economics) -> np.ndarray:
    disc = (econ.gamma / index.M) * np.exp(-econ.theta * t)
    src = np.zeros(index.n_states)
    src[index.singleton_idx] = disc
    coupling = index.B0 @ psi
    pair_src = index.C0.copy()
    if g_q != 0.0:
        coupling = coupling + g_q * (index.Bb @ psi)
        pair_src = pair_src + g_q * index.Cb
    return (psi - src) * index.decay(g_p, g_q) - (coupling - disc * pair_src)


def _brackets(S: np.ndarray, psi: np.ndarray, t: float, index: SubsetIndex,
              econ: Economics) -> tuple[float, float]:
    """Stationarity brackets: marginal discounted income minus the marginal
    shadow cost, per unit of response gain, for each channel."""
    e = np.exp(econ.theta * t)
    gm = econ.gamma / index.M
    sing = index.singleton_idx
    gp = gm * float(np.dot(index.net.bp, S[sing])) \
        - e * float(np.dot(psi, index.bp_sub * S))
    # D_Omega = (sum of edge coefficients into Omega) S_Omega - coupled gain
    D = index.BQ_sub * S - index.Ab @ S
    gq = gm * float(np.sum(D[sing])) - e * float(np.dot(psi, D))
    return gp, gq


def general_controls(S: np.ndarray, psi: np.ndarray, t: float,
                     index: SubsetIndex, resp: ResponseModel,
                     econ: Economics) -> tuple[float, float]:
    """Closed-form stationary controls, clamped at the s >= 0 boundary.

    The network's per-node/per-edge response coefficients live inside the
    brackets, so both channels invert the shared scalar gain shape only.
    """
    gp, gq = _brackets(S, psi, t, index, econ)
    if resp.form is ResponseForm.SQRT:
        return (max(gp, 0.0) / 2.0) ** 2, (max(gq, 0.0) / 2.0) ** 2
    return max(gp - 1.0, 0.0), max(gq - 1.0, 0.0)


def general_hamiltonian(S: np.ndarray, psi: np.ndarray, s, t: float,
                        net: GeneralNetwork, resp: ResponseModel,
                        econ: Economics,
                        index: SubsetIndex | None = None) -> dict:
    """Pointwise Hamiltonian value and its analytic partials w.r.t. the two
    spend rates; at s = 0 under the sqrt shape the derivative is unbounded
    and is reported as a boundary-active flag instead."""
    index = index or SubsetIndex(net)
    sp_v, sq_v = float(s[0]), float(s[1])
    g_p = float(resp.gain(sp_v))
    g_q = float(resp.gain(sq_v))
    dS = master_subset_rhs(S, g_p, g_q, index)
    disc = np.exp(-econ.theta * t)
    H = ((-econ.gamma / index.M) * float(np.sum(dS[index.singleton_idx]))
         - (sp_v + sq_v)) * disc + float(np.dot(psi, dS))
    gp, gq = _brackets(S, psi, t, index, econ)

    def partial(bracket, sv):
        sqrt_form = resp.form is ResponseForm.SQRT
        if sqrt_form and sv == 0.0:
            return None, True
        gain_slope = 1.0 / (2.0 * np.sqrt(sv)) if sqrt_form else 1.0 / (1.0 + sv)
        return disc * (gain_slope * bracket - 1.0), False

    dH_dsp, p_boundary = partial(gp, sp_v)
    dH_dsq, q_boundary = partial(gq, sq_v)
    return {"H": H, "dH_dsp": dH_dsp, "dH_dsq": dH_dsq,
            "sp_boundary_active": p_boundary, "sq_boundary_active": q_boundary}


def stationarity_residual(sol: OptimalSolution, net: GeneralNetwork,
                          resp: ResponseModel, econ: Economics,
                          index: SubsetIndex | None = None) -> float:
    """max_t |dH/ds| over both channels at the converged solution (boundary
    nodes with the clamp active are exempt)."""
    index = index or SubsetIndex(net)
    t = sol.policy.grid.times()
    worst = 0.0
    for i, ti in enumerate(t):
        out = general_hamiltonian(sol.state.values[i], sol.costate.values[i],
                                  (sol.policy.sp[i], sol.policy.sq[i]),
                                  ti, net, resp, econ, index)
        for key in ("dH_dsp", "dH_dsq"):
            if out[key] is not None:
                worst = max(worst, abs(out[key]))
    return worst


def baseline_survival_general(net: GeneralNetwork, resp: ResponseModel,
                              grid: TimeGrid,
                              index: SubsetIndex | None = None) -> np.ndarray:
    index = index or SubsetIndex(net)

    def rhs(t, S, _):
        return master_subset_rhs(S, 0.0, 0.0, index)

    return rk4_integrate(rhs, np.ones(index.n_states), grid)


def _probe_t_star(index: SubsetIndex, resp: ResponseModel, cfg: SolverConfig,
                  t_init: float = 50.0, t_max: float = 1e5) -> float:
    t_end = t_init
    while t_end <= t_max:
        grid = TimeGrid(t_end, 4000)
        S = baseline_survival_general(index.net, resp, grid, index)
        f0 = 1.0 - S[:, index.singleton_idx].mean(axis=1)
        t_star = first_tail_time(grid.times(), f0, cfg.tail_tol)
        if t_star is not None:
            return t_star
        t_end *= 2
    raise RuntimeError(f"unpromoted adoption never saturated by t = {t_max}")


def solve_optimal_general(net: GeneralNetwork, resp: ResponseModel,
                          econ: Economics,
                          cfg: SolverConfig = SolverConfig()) -> OptimalSolution:
    """Solve the full subset-resolved promotion problem (M <= 10).

    Infinite horizons truncate where the unpromoted adoption gap falls below
    tail_tol, with a zero terminal costate (every Psi_Omega is
    O(gamma e^{-theta t}) there).
    """
    if net.M > GENERAL_MAX_NODES:
        raise ConfigError(
            f"subset-resolved optimizer capped at M <= {GENERAL_MAX_NODES}")
    index = SubsetIndex(net)
    if econ.is_infinite:
        t_eff = _probe_t_star(index, resp, cfg)
    else:
        t_eff = econ.horizon
    grid = TimeGrid(t_eff, cfg.n_steps)

    def control(t, S, psi):
        return np.array(general_controls(S, psi, t, index, resp, econ))

    problem = BvpProblem(
        forward_rhs=lambda t, S, s: master_subset_rhs(
            S, float(resp.gain(s[0])), float(resp.gain(s[1])), index),
        backward_rhs=lambda t, psi, S, s: _costate_rhs(
            psi, t, float(resp.gain(s[0])), float(resp.gain(s[1])), index, econ),
        control_law=control,
        y0=np.ones(index.n_states),
        psi_terminal=np.zeros(index.n_states),
        grid=grid,
        infinite_horizon=econ.is_infinite,
    )
    res = solve_bvp(problem, cfg, residual_scale=econ.gamma)

    S0 = baseline_survival_general(net, resp, grid, index)
    f0 = Trajectory(grid, 1.0 - S0[:, index.singleton_idx].mean(axis=1),
                    label="f0")
    f_opt = Trajectory(grid,
                       1.0 - res.state[:, index.singleton_idx].mean(axis=1),
                       label="f_opt")
    policy = PromotionPolicy(grid, res.controls[:, 0], res.controls[:, 1])

    pi0 = profit(PromotionPolicy.zero(grid), f0, econ)
    pi_opt = profit(policy, f_opt, econ)
    if econ.is_infinite:
        pi0 += _tail_profit(f0.values, grid, econ)
        pi_opt += _tail_profit(f_opt.values, grid, econ)

    sol = OptimalSolution(
        policy=policy, f_opt=f_opt, f0=f0,
        state=Trajectory(grid, res.state, label="S_Omega"),
        costate=Trajectory(grid, res.costate, label="Psi_Omega"),
        pi_opt=pi_opt, pi0=pi0, delta_pi=delta_pi(pi_opt, pi0),
        diagnostics={"method": res.method, "iterations": res.iterations,
                     "residual": res.residual, "t_eff": t_eff,
                     "infinite_horizon": econ.is_infinite,
                     "history": res.history},
    )
    sol.diagnostics["stationarity_residual"] = stationarity_residual(
        sol, net, resp, econ, index)
    return sol


def group_costates_by_size(costate: np.ndarray, index: SubsetIndex) -> np.ndarray:
    """Sum Psi_Omega over subsets of equal size: column n-1 corresponds to
    the n-subset adjoint of the symmetry-reduced complete-network system."""
    out = np.zeros((costate.shape[0], index.M))
    for n in range(1, index.M + 1):
        cols = np.flatnonzero(index.sizes == n)
        out[:, n - 1] = costate[:, cols].sum(axis=1)
    return out


def _tail_profit(f: np.ndarray, grid: TimeGrid, econ: Economics) -> float:
    gap = max(1.0 - f[-1], 0.0)
    rate = dfdt(f, grid.h)[-1] / gap if gap > 0 else 0.0
    return discounted_tail_profit(econ.gamma, econ.theta, f[-1], rate, grid.t_end)
