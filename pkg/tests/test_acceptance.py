"""End-to-end acceptance suite: eleven numbered criteria, one line each.

Every test prints a single ``[criterion NN] PASS/FAIL`` line (visible with
``pytest -s`` or in the captured output of a failure) and then asserts.
Expensive solves are shared through module-scoped fixtures so the whole
suite stays within the stated runtime budgets.
"""

import time

import numpy as np
import pytest

from bassopt import (Economics, GeneralNetwork, PromotionPolicy,
                     ResponseModel, SimConfig, SolverConfig, SubsetIndex,
                     TimeGrid, adoption_level, complete_as_general,
                     rk4_integrate, solve_master, solve_optimal_complete,
                     solve_optimal_general, solve_optimal_hetero_targeted,
                     solve_optimal_hetero_uniform, solve_optimal_infcomplete,
                     solve_optimal_line, sweep_delta_pi_vs_T, validate_policy)
from bassopt.montecarlo import simulate
from bassopt.opt_line import costate_bounds_violation

RESP = ResponseModel("sqrt", p0=0.01, bp=0.01, q0=0.1, bq=0.1)
ECON = Economics(1000.0, 0.01)          # infinite horizon
CFG = SolverConfig(n_steps=2000)


def _report(n: int, ok: bool, detail: str) -> bool:
    print(f"[criterion {n:02d}] {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


# ------------------------------------------------------------ shared solves

@pytest.fixture(scope="module")
def complete_family():
    """delta_pi, wall time and solution for the complete-network family."""
    out = {}
    for M in (2, 3, 5, 10, 100):
        t0 = time.monotonic()
        sol = solve_optimal_complete(M, RESP, ECON, CFG)
        out[M] = (sol.delta_pi, time.monotonic() - t0, sol)
    return out


@pytest.fixture(scope="module")
def infcomplete_sol():
    return solve_optimal_infcomplete(RESP, ECON, CFG)


@pytest.fixture(scope="module")
def line_sol():
    return solve_optimal_line(RESP, ECON, CFG)


@pytest.fixture(scope="module")
def hetero_pair():
    g2 = ResponseModel("sqrt", p0=0.02, bp=0.02, q0=0.2, bq=0.2)
    uni = solve_optimal_hetero_uniform(RESP, g2, ECON, CFG)
    tgt = solve_optimal_hetero_targeted(RESP, g2, ECON, CFG)
    return uni, tgt


@pytest.fixture(scope="module")
def horizon_sweep():
    cfg = SolverConfig(n_steps=1000, damping=0.3, max_iters=2000)
    return sweep_delta_pi_vs_T(RESP, ECON, [2, 5, 8, 12, 20, 40, 320], cfg)


# ---------------------------------------------------------------- criteria

def test_criterion_01_complete_m3(complete_family):
    dpi, wall, sol = complete_family[3]
    sp, sq = sol.policy.sp, sol.policy.sq
    k = int(np.argmax(sq))
    ok = (abs(dpi - 0.12) <= 0.01
          and bool(np.all(np.diff(sp) <= 1e-12))
          and sq[0] == 0.0 and 0 < k < len(sq) - 1
          and wall < 30.0)
    assert _report(1, ok, f"M=3 delta_pi={dpi:.4f} (target 0.12+-0.01), "
                          f"s_p decreasing, s_q(0)=0 with interior max, "
                          f"runtime {wall:.1f}s < 30s")


def test_criterion_02_complete_family_trend(complete_family):
    dpis = {M: complete_family[M][0] for M in complete_family}
    total = sum(complete_family[M][1] for M in complete_family)
    Ms = sorted(dpis)
    decreasing = all(dpis[a] > dpis[b] for a, b in zip(Ms, Ms[1:]))
    ok = (abs(dpis[2] - 0.14) <= 0.01 and abs(dpis[100] - 0.086) <= 0.01
          and decreasing and total < 600.0)
    assert _report(2, ok, f"delta_pi(M=2)={dpis[2]:.4f} (0.14+-0.01), "
                          f"delta_pi(M=100)={dpis[100]:.4f} (0.086+-0.01), "
                          f"strictly decreasing over M={Ms}, "
                          f"total {total:.0f}s < 600s")


def test_criterion_03_infinite_complete(infcomplete_sol, complete_family):
    dpi = infcomplete_sol.delta_pi
    gap = abs(dpi - complete_family[100][0])
    ok = abs(dpi - 0.085) <= 0.005 and gap <= 0.01
    assert _report(3, ok, f"infinite complete delta_pi={dpi:.4f} "
                          f"(0.085+-0.005), |gap to M=100|={gap:.4f} <= 0.01")


def test_criterion_04_finite_horizon_t20():
    econ = Economics(1000.0, 0.01, horizon=20.0)
    sol = solve_optimal_infcomplete(RESP, econ, CFG)
    sp_T, sq_T = sol.policy.sp[-1], sol.policy.sq[-1]
    ok = abs(sol.delta_pi - 1.18) <= 0.05 and sp_T > 0 and sq_T > 0
    assert _report(4, ok, f"T=20 delta_pi={sol.delta_pi:.4f} (1.18+-0.05), "
                          f"s_p(T)={sp_T:.3f} > 0, s_q(T)={sq_T:.3f} > 0")


def test_criterion_05_horizon_sweep_shape(horizon_sweep, infcomplete_sol):
    rows = horizon_sweep
    assert all(r["converged"] for r in rows), rows
    d = np.array([r["delta_pi"] for r in rows])
    k = int(np.argmax(d))
    unimodal = (np.all(np.diff(d[:k + 1]) > 0)
                and np.all(np.diff(d[k:]) < 0))
    tail_gap = abs(d[-1] - infcomplete_sol.delta_pi)
    ok = unimodal and 0 < k < len(d) - 1 and d[k] > 1.0 and tail_gap <= 0.01
    assert _report(5, ok, f"delta_pi(T) unimodal with interior peak "
                          f"{d[k]:.2f} > 1.0 at T={rows[k]['T']:g}, "
                          f"large-T gap to T=inf {tail_gap:.4f} <= 0.01")


def test_criterion_06_infinite_line(line_sol, infcomplete_sol):
    dpi = line_sol.delta_pi
    ratio = dpi / infcomplete_sol.delta_pi
    ok = abs(dpi - 0.12) <= 0.01 and 1.3 <= ratio <= 1.7
    assert _report(6, ok, f"infinite line delta_pi={dpi:.4f} (0.12+-0.01), "
                          f"ratio to infinite complete {ratio:.3f} in "
                          f"[1.3, 1.7]")


def test_criterion_07_heterogeneous(hetero_pair):
    uni, tgt = hetero_pair
    ok = (abs(uni.delta_pi - 0.062) <= 0.005
          and abs(tgt.delta_pi - 0.063) <= 0.005
          and tgt.delta_pi >= uni.delta_pi - 0.003)
    assert _report(7, ok, f"uniform delta_pi={uni.delta_pi:.4f} "
                          f"(0.062+-0.005), targeted={tgt.delta_pi:.4f} "
                          f"(0.063+-0.005), targeted >= uniform - 0.003")


def test_criterion_08_reduction_equivalence():
    econ = Economics(1000.0, 0.01, horizon=50.0)
    cfg = SolverConfig(n_steps=800)
    worst = 0.0
    for M in (2, 3, 4, 5):
        a = solve_optimal_complete(M, RESP, econ, cfg)
        b = solve_optimal_general(complete_as_general(M, RESP), RESP,
                                  econ, cfg)
        worst = max(
            worst,
            np.max(np.abs(a.f_opt.values - b.f_opt.values))
            / np.max(np.abs(a.f_opt.values)),
            np.max(np.abs(a.policy.sp - b.policy.sp))
            / np.max(np.abs(a.policy.sp)),
            np.max(np.abs(a.policy.sq - b.policy.sq))
            / np.max(np.abs(a.policy.sq)),
        )
    ok = worst <= 1e-6
    assert _report(8, ok, f"complete vs subset-resolved solver, M in "
                          f"{{2..5}}: worst relative sup-norm "
                          f"{worst:.2e} <= 1e-6")


def test_criterion_09_monte_carlo_agreement():
    # random 5-node network under a prescribed time-varying policy
    rng = np.random.default_rng(99)
    M = 5
    q = rng.uniform(0.0, 0.25, (M, M))
    np.fill_diagonal(q, 0.0)
    net = GeneralNetwork(M, rng.uniform(0.02, 0.15, M), q,
                         rng.uniform(0.0, 0.03, M), 0.4 * q)
    resp = ResponseModel("sqrt", p0=0.0, bp=1.0, q0=0.0, bq=1.0)
    grid = TimeGrid(25.0, 50)
    n = grid.n_nodes
    pol = PromotionPolicy(grid, np.linspace(2.0, 0.0, n),
                          np.linspace(0.0, 1.5, n))
    ref = adoption_level(solve_master(net, resp, pol, grid,
                                      step_controls=True), SubsetIndex(net))
    rep_a = validate_policy(net, resp, pol, grid,
                            SimConfig(n_runs=100_000, seed=17), ref)

    # three-node complete network under its own optimal promotion
    sol = solve_optimal_complete(3, RESP, Economics(1000.0, 0.01, horizon=25.0),
                                 SolverConfig(n_steps=1000))
    net3 = complete_as_general(3, RESP)
    coarse = TimeGrid(25.0, 50)
    sp, sq = sol.policy.at(coarse.times())
    pol3 = PromotionPolicy(coarse, sp, sq)
    ref3 = adoption_level(solve_master(net3, RESP, pol3, coarse,
                                       step_controls=True), SubsetIndex(net3))
    rep_b = validate_policy(net3, RESP, pol3, coarse,
                            SimConfig(n_runs=100_000, seed=23), ref3)

    ok = rep_a.passed and rep_b.passed
    assert _report(9, ok, f"10^5 runs: random M=5 max|z|="
                          f"{rep_a.max_abs_z:.2f} <= 4, M=3 optimal policy "
                          f"max|z|={rep_b.max_abs_z:.2f} <= 4")


def test_criterion_10_analytic_corollaries(complete_family, infcomplete_sol,
                                           line_sol, hetero_pair):
    notes = []
    # s_q(0) = 0 across every model family
    sq0 = {
        "complete": float(complete_family[3][2].policy.sq[0]),
        "infcomplete": float(infcomplete_sol.policy.sq[0]),
        "line": float(line_sol.policy.sq[0]),
        "hetero-uniform": float(np.max(np.abs(
            np.atleast_1d(hetero_pair[0].policy.sq[0])))),
        "hetero-targeted": float(np.max(np.abs(
            np.atleast_1d(hetero_pair[1].policy.sq[0])))),
    }
    ok = all(v == 0.0 for v in sq0.values())
    notes.append(f"s_q(0)=0 all models ({ok})")

    # initial-slope identity on the infinite-complete benchmark run
    checks = infcomplete_sol.diagnostics["checks"]
    resid = abs(checks["initial_slope_residual"])
    slope = abs(checks["sp_slope_at_zero"])
    slope_ok = resid < 1e-4 * slope
    ok = ok and slope_ok
    notes.append(f"slope identity residual {resid:.1e} < 1e-4*{slope:.2f}")

    # costate bounds (infinite complete and infinite line)
    bounds_ok = bool(checks["costate_bounds_ok"])
    line_viol = costate_bounds_violation(line_sol, RESP, ECON)
    bounds_ok = bounds_ok and line_viol <= 1e-8 * ECON.gamma
    ok = ok and bounds_ok
    notes.append(f"costate bounds hold (line violation {line_viol:.1e})")

    # two equal groups must degenerate to the single-population optimum
    econ40 = Economics(1000.0, 0.01, horizon=40.0)
    tight = SolverConfig(n_steps=2000, tol=1e-11)
    homo = solve_optimal_hetero_uniform(RESP, RESP, econ40, tight)
    single = solve_optimal_infcomplete(RESP, econ40, tight)
    degen = float(np.max(np.abs(homo.f_opt.values - single.f_opt.values)))
    ok = ok and degen <= 1e-8
    notes.append(f"homogeneous degeneration {degen:.1e} <= 1e-8")

    # analytic costate tail vs a zero-terminal solve on a doubled horizon
    t_star = infcomplete_sol.diagnostics["t_eff"]
    long_sol = solve_optimal_infcomplete(
        RESP, Economics(1000.0, 0.01, horizon=2 * t_star),
        SolverConfig(n_steps=4000))
    ta = infcomplete_sol.policy.grid.times()
    tb = long_sol.policy.grid.times()
    psi_b = np.interp(ta, tb, long_sol.costate.values[:, 0])
    early = ta <= t_star / 2
    psi_a = infcomplete_sol.costate.values[early, 0]
    tail_rel = (np.max(np.abs(psi_a - psi_b[early]))
                / np.max(np.abs(psi_a)))
    ok = ok and tail_rel <= 1e-3
    notes.append(f"costate tail vs zero-terminal 2t* solve "
                 f"{tail_rel:.1e} <= 1e-3")

    assert _report(10, ok, "; ".join(notes))


def test_criterion_11_numerical_hygiene(infcomplete_sol):
    # fixed-step RK4 shows fourth-order convergence on y' = -y
    errs = []
    for n in (40, 80, 160):
        grid = TimeGrid(2.0, n)
        y = rk4_integrate(lambda t, y, z: -y, np.array([1.0]), grid)
        errs.append(abs(y[-1, 0] - np.exp(-2.0)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    order_ok = bool(np.all((orders > 3.8) & (orders < 4.2)))

    # the sweep and shooting solvers agree on the benchmark problem
    shot = solve_optimal_infcomplete(RESP, ECON,
                                     SolverConfig(method="shooting",
                                                  n_steps=2000))
    rel = max(
        np.max(np.abs(shot.policy.sp - infcomplete_sol.policy.sp))
        / np.max(np.abs(infcomplete_sol.policy.sp)),
        np.max(np.abs(shot.policy.sq - infcomplete_sol.policy.sq))
        / np.max(np.abs(infcomplete_sol.policy.sq)),
        np.max(np.abs(shot.f_opt.values - infcomplete_sol.f_opt.values))
        / np.max(np.abs(infcomplete_sol.f_opt.values)),
    )
    cross_ok = rel <= 1e-5

    # simulation reruns at a fixed seed are byte-identical
    net = complete_as_general(3, RESP)
    grid = TimeGrid(10.0, 20)
    pol = PromotionPolicy(grid, np.full(grid.n_nodes, 1.0),
                          np.full(grid.n_nodes, 0.5))
    runs = [simulate(net, RESP, pol, grid, SimConfig(n_runs=2000, seed=42))
            for _ in range(2)]
    bytes_ok = (runs[0].f_mean.tobytes() == runs[1].f_mean.tobytes()
                and runs[0].f_stderr.tobytes() == runs[1].f_stderr.tobytes())

    ok = order_ok and cross_ok and bytes_ok
    assert _report(11, ok, f"RK4 orders {np.round(orders, 2).tolist()} "
                           f"in (3.8, 4.2); sweep/shooting relative "
                           f"sup-norm {rel:.1e} <= 1e-5; fixed-seed reruns "
                           f"byte-identical ({bytes_ok})")
