"""Command-line front end: solve, sweep, simulate, and validate runs driven
by a JSON config plus flag overrides, writing delimited outputs, a JSON
summary, and rendered figures into the chosen output directory.

Exit codes: 0 success, 2 config error, 3 solver non-convergence,
4 validation failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import json
import sys
from pathlib import Path

import numpy as np

from .core import (ConfigError, Economics, PromotionPolicy, ResponseModel,
                   TimeGrid)
from .master import SubsetIndex, adoption_level, solve_master
from .montecarlo import SimConfig, dump_csv as sim_dump_csv, simulate, validate_policy
from .networks import complete_as_general, network_from_json, ring_as_general
from .opt_complete import solve_optimal_complete
from .opt_general import solve_optimal_general
from .opt_hetero import (solve_optimal_hetero_targeted,
                         solve_optimal_hetero_uniform)
from .opt_infcomplete import (classify_total_spend, solve_optimal_infcomplete)
from .opt_line import solve_optimal_line
from .solvers import ConvergenceError, SolverConfig
from . import report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VALIDATION = 4

MODELS = ("complete", "general", "infcomplete", "line",
          "hetero-uniform", "hetero-targeted")

DEFAULT_CONFIG = {
    "model": "infcomplete",
    "M": 3,
    "network": None,              # path to a JSON network file (general model)
    "response": {"form": "sqrt", "p0": 0.01, "bp": 0.01, "q0": 0.1, "bq": 0.1},
    "response2": None,            # second group (hetero models)
    "economics": {"gamma": 1000.0, "theta": 0.01, "horizon": None},
    "solver": {"method": "sweep", "tol": 1e-8, "max_iters": 500,
               "damping": 0.5, "tail_tol": 1e-4, "root_tol": None,
               "n_steps": 2000},
    "sim": {"n_runs": 10000, "seed": 0, "t_end": 20.0, "n_steps": 200,
            "ring_L": 1000, "sp_const": 0.0, "sq_const": 0.0},
    "sweep": {"axis": "T", "values": []},
    "validate": {"offset": 0.0},
    "out": "out",
}


def _deep_update(base: dict, extra: dict) -> dict:
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_update(base[k], v)
        else:
            base[k] = v
    return base


def _apply_set(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"unknown config section {part!r} in {key!r}")
        node = node[part]
    node[parts[-1]] = value


def load_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if args.config:
        try:
            user = json.loads(Path(args.config).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        _deep_update(cfg, user)
    if args.model:
        cfg["model"] = args.model
    if args.out:
        cfg["out"] = args.out
    if args.seed is not None:
        cfg["sim"]["seed"] = args.seed
    for assignment in args.set or []:
        _apply_set(cfg, assignment)
    if cfg["model"] not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {cfg['model']!r}")
    return cfg


def _response(cfg: dict, key: str = "response") -> ResponseModel:
    block = cfg.get(key)
    if block is None:
        raise ConfigError(f"missing config section {key!r}")
    for fld in ("p0", "bp", "q0", "bq"):
        if fld not in block:
            raise ConfigError(f"missing field {key}.{fld}")
    return ResponseModel(block.get("form", "sqrt"), p0=block["p0"],
                         bp=block["bp"], q0=block["q0"], bq=block["bq"])


def _economics(cfg: dict) -> Economics:
    block = cfg.get("economics") or {}
    for fld in ("gamma", "theta"):
        if fld not in block:
            raise ConfigError(f"missing field economics.{fld}")
    horizon = block.get("horizon")
    return Economics(gamma=block["gamma"], theta=block["theta"],
                     horizon=float("inf") if horizon is None else float(horizon))


def _solver_cfg(cfg: dict) -> SolverConfig:
    block = dict(cfg.get("solver") or {})
    try:
        return SolverConfig(**block)
    except TypeError as exc:
        raise ConfigError(f"bad solver config: {exc}") from exc


def _sim_cfg(cfg: dict) -> SimConfig:
    block = cfg.get("sim") or {}
    return SimConfig(n_runs=int(block.get("n_runs", 10000)),
                     seed=int(block.get("seed", 0)))


def solve_model(cfg: dict):
    model = cfg["model"]
    resp = _response(cfg)
    econ = _economics(cfg)
    scfg = _solver_cfg(cfg)
    if model == "complete":
        return solve_optimal_complete(int(cfg["M"]), resp, econ, scfg)
    if model == "general":
        if cfg.get("network"):
            net = network_from_json(cfg["network"])
        else:
            net = complete_as_general(int(cfg["M"]), resp)
        return solve_optimal_general(net, resp, econ, scfg)
    if model == "infcomplete":
        return solve_optimal_infcomplete(resp, econ, scfg)
    if model == "line":
        return solve_optimal_line(resp, econ, scfg)
    resp2 = _response(cfg, "response2")
    if model == "hetero-uniform":
        return solve_optimal_hetero_uniform(resp, resp2, econ, scfg)
    return solve_optimal_hetero_targeted(resp, resp2, econ, scfg)


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_solution_csv(sol, path) -> None:
    t = sol.policy.grid.times()
    sp, sq = sol.policy.sp, sol.policy.sq
    psi = sol.costate.values
    if psi.ndim == 1:
        psi = psi[:, None]
    header = ["t"]
    cols = [t]
    if sp.ndim == 2:
        for k in range(sp.shape[1]):
            header += [f"sp_{k + 1}", f"sq_{k + 1}"]
            cols += [sp[:, k], sq[:, k]]
    else:
        header += ["sp", "sq"]
        cols += [sp, sq]
    header += ["sp_plus_sq", "f_opt", "f0"]
    cols += [sol.policy.total_spend(), sol.f_opt.values, sol.f0.values]
    for k in range(psi.shape[1]):
        header.append(f"psi_{k + 1}")
        cols.append(psi[:, k])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(len(t)):
            fh.write(",".join(_fmt(c[i]) for c in cols) + "\n")


def _summary(sol, cfg: dict) -> dict:
    diag = {k: v for k, v in sol.diagnostics.items() if k != "history"}
    return {
        "model": cfg["model"],
        "pi_opt": sol.pi_opt,
        "pi0": sol.pi0,
        "delta_pi": sol.delta_pi,
        "scenario": classify_total_spend(sol.policy.total_spend()),
        "diagnostics": diag,
        "config": cfg,
    }


def _write_json(payload: dict, path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True,
                                     default=str) + "\n")


def cmd_solve(cfg: dict, out: Path, verbose: bool) -> int:
    sol = solve_model(cfg)
    write_solution_csv(sol, out / "solution.csv")
    _write_json(_summary(sol, cfg), out / "summary.json")
    if verbose:
        history = sol.diagnostics.get("history", [])
        with open(out / "residuals.csv", "w") as fh:
            fh.write("iteration,residual\n")
            for i, r in enumerate(history, start=2):
                fh.write(f"{i},{_fmt(r)}\n")
    report.render_solution(sol, out)
    print(f"delta_pi = {sol.delta_pi:.6f}  ({out / 'solution.csv'})")
    return EXIT_OK


def _axis_config(cfg: dict, axis: str, value) -> dict:
    row_cfg = copy.deepcopy(cfg)
    if axis == "M":
        row_cfg["M"] = int(value)
    elif axis == "T":
        row_cfg["economics"]["horizon"] = float(value)
    elif axis in ("gamma", "theta"):
        row_cfg["economics"][axis] = float(value)
    elif axis in ("p0", "bp", "q0", "bq"):
        row_cfg["response"][axis] = float(value)
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    return row_cfg


def _sweep_row(cfg: dict, axis: str, value) -> dict:
    row = {axis: value}
    try:
        sol = solve_model(_axis_config(cfg, axis, value))
        row.update(delta_pi=sol.delta_pi, pi_opt=sol.pi_opt, pi0=sol.pi0,
                   converged=True, error="")
    except Exception as exc:  # noqa: BLE001 - per-row failure report
        row.update(delta_pi=float("nan"), pi_opt=float("nan"),
                   pi0=float("nan"), converged=False, error=str(exc))
    return row


def cmd_sweep(cfg: dict, out: Path, jobs: int, verbose: bool) -> int:
    block = cfg.get("sweep") or {}
    axis = block.get("axis")
    values = block.get("values") or []
    if axis is None:
        raise ConfigError("missing field sweep.axis")
    if jobs > 1 and len(values) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, [cfg] * len(values),
                                 [axis] * len(values), values))
    else:
        rows = [_sweep_row(cfg, axis, v) for v in values]
    with open(out / "sweep.csv", "w", newline="") as fh:
        fh.write(f"{axis},delta_pi,pi_opt,pi0,converged,error\n")
        for r in rows:
            fh.write(f"{_fmt(r[axis])},{_fmt(r['delta_pi'])},"
                     f"{_fmt(r['pi_opt'])},{_fmt(r['pi0'])},"
                     f"{int(r['converged'])},{r['error']}\n")
    report.render_sweep(rows, axis, out)
    failures = [r for r in rows if not r["converged"]]
    print(f"{len(rows) - len(failures)}/{len(rows)} rows converged "
          f"({out / 'sweep.csv'})")
    return EXIT_SOLVER if failures and not (len(rows) - len(failures)) else EXIT_OK


def _finite_network(cfg: dict, resp: ResponseModel):
    model = cfg["model"]
    if model == "complete":
        return complete_as_general(int(cfg["M"]), resp)
    if model == "general":
        if cfg.get("network"):
            return network_from_json(cfg["network"])
        return complete_as_general(int(cfg["M"]), resp)
    if model == "line":
        return ring_as_general(int(cfg["sim"].get("ring_L", 1000)), resp,
                               master_use=False)
    raise ConfigError(f"model {cfg['model']!r} has no finite simulation surrogate")


def cmd_simulate(cfg: dict, out: Path, verbose: bool) -> int:
    resp = _response(cfg)
    net = _finite_network(cfg, resp)
    block = cfg.get("sim") or {}
    grid = TimeGrid(float(block.get("t_end", 20.0)),
                    int(block.get("n_steps", 200)))
    n = grid.n_nodes
    policy = PromotionPolicy(grid,
                             np.full(n, float(block.get("sp_const", 0.0))),
                             np.full(n, float(block.get("sq_const", 0.0))))
    res = simulate(net, resp, policy, grid, _sim_cfg(cfg))
    sim_dump_csv(res, out / "simulation.csv")
    report.render_simulation(res, out)
    _write_json({"model": cfg["model"], "n_runs": res.n_runs,
                 "seed": res.seed, "f_final": res.f_mean[-1],
                 "config": cfg}, out / "summary.json")
    print(f"f({grid.t_end}) = {res.f_mean[-1]:.4f} +- {res.f_stderr[-1]:.4f} "
          f"({out / 'simulation.csv'})")
    return EXIT_OK


def cmd_validate(cfg: dict, out: Path, verbose: bool) -> int:
    resp = _response(cfg)
    model = cfg["model"]
    block = cfg.get("sim") or {}
    if model == "line":
        # unpromoted ring surrogate against the deterministic line solution
        from .opt_line import line_closed_form
        net = _finite_network(cfg, resp)
        grid = TimeGrid(float(block.get("t_end", 20.0)),
                        int(block.get("n_steps", 200)))
        policy = PromotionPolicy.zero(grid)
        from .core import Trajectory
        ref_values = line_closed_form(resp.p0, resp.q0, grid.times())
        reference = Trajectory(grid, ref_values, label="f_line")
    elif model in ("complete", "general"):
        econ = _economics(cfg)
        if econ.is_infinite:
            horizon = float(block.get("t_end", 20.0))
            econ = Economics(econ.gamma, econ.theta, horizon=horizon)
            cfg = copy.deepcopy(cfg)
            cfg["economics"]["horizon"] = horizon
        sol = solve_model(cfg)
        net = _finite_network(cfg, resp)
        coarse = TimeGrid(econ.horizon, int(block.get("n_steps", 200)))
        sp_c, sq_c = sol.policy.at(coarse.times())
        policy = PromotionPolicy(coarse, sp_c, sq_c)
        traj = solve_master(net, resp, policy, coarse, step_controls=True)
        reference = adoption_level(traj, SubsetIndex(net))
        grid = coarse
    else:
        raise ConfigError(f"validate does not support model {cfg['model']!r}")

    offset = float((cfg.get("validate") or {}).get("offset", 0.0))
    if offset:
        from .core import Trajectory
        reference = Trajectory(grid, np.clip(reference.values + offset, 0, 1),
                               label=reference.label)
    rep = validate_policy(net, resp, policy, grid, _sim_cfg(cfg), reference)
    with open(out / "zscores.csv", "w", newline="") as fh:
        fh.write("t,z,f_mc,f_ref,stderr\n")
        t = grid.times()
        for i in range(grid.n_nodes):
            fh.write(f"{_fmt(t[i])},{_fmt(rep.z[i])},"
                     f"{_fmt(rep.result.f_mean[i])},"
                     f"{_fmt(reference.values[i])},"
                     f"{_fmt(rep.result.f_stderr[i])}\n")
    _write_json({"model": model, "passed": rep.passed,
                 "max_abs_z": rep.max_abs_z, "frac_above_2": rep.frac_above_2,
                 "config": cfg}, out / "report.json")
    report.render_validation(rep, out)
    print(f"{'pass' if rep.passed else 'FAIL'}: max|z| = {rep.max_abs_z:.3f}, "
          f"frac(|z|>2) = {rep.frac_above_2:.3f} ({out / 'report.json'})")
    return EXIT_OK if rep.passed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bassopt",
        description="Optimal promotion strategies for product adoption "
                    "on social networks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("solve", "solve one promotion problem and write the policy"),
            ("sweep", "solve across a parameter axis"),
            ("simulate", "run the stochastic simulator"),
            ("validate", "check a deterministic model against simulation")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--model", choices=MODELS)
        p.add_argument("--out", help="output directory")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel workers for sweep rows")
        p.add_argument("--seed", type=int)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry (dotted path)")
        p.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            return cmd_solve(cfg, out, args.verbose)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, args.jobs, args.verbose)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, args.verbose)
        return cmd_validate(cfg, out, args.verbose)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
