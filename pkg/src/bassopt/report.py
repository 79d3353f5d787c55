"""Figure rendering for the command-line report path.

Every plot lands as a PNG next to the delimited output it illustrates.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .core import OptimalSolution  # noqa: E402

_DPI = 150


def render_solution(sol: OptimalSolution, out_dir) -> list[str]:
    """Controls and adoption-level figures for a solved policy."""
    t = sol.policy.grid.times()
    sp = sol.policy.sp
    sq = sol.policy.sq

    fig, ax = plt.subplots(figsize=(7, 4.5))
    if sp.ndim == 2:
        for k in range(sp.shape[1]):
            ax.plot(t, sp[:, k], "--", label=f"$s_p$ group {k + 1}")
            ax.plot(t, sq[:, k], "-.", label=f"$s_q$ group {k + 1}")
    else:
        ax.plot(t, sp, "--", label="$s_p$")
        ax.plot(t, sq, "-.", label="$s_q$")
    ax.plot(t, sol.policy.total_spend(), "-", color="k", label="total")
    ax.set_xlabel("t")
    ax.set_ylabel("spend rate")
    ax.legend()
    fig.tight_layout()
    controls_png = str(out_dir / "controls.png")
    fig.savefig(controls_png, dpi=_DPI)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(t, sol.f_opt.values, "-", label="$f^{opt}$")
    ax.plot(t, sol.f0.values, "--", label="$f^0$")
    ax.set_xlabel("t")
    ax.set_ylabel("adoption level")
    ax.set_ylim(0, 1.02)
    ax.legend()
    fig.tight_layout()
    adoption_png = str(out_dir / "adoption.png")
    fig.savefig(adoption_png, dpi=_DPI)
    plt.close(fig)
    return [controls_png, adoption_png]


def render_sweep(rows: list[dict], axis: str, out_dir) -> list[str]:
    ok = [r for r in rows if r.get("converged")]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if ok:
        x = [r[axis] for r in ok]
        y = [100.0 * r["delta_pi"] for r in ok]
        ax.plot(x, y, "o-")
    ax.set_xlabel(axis)
    ax.set_ylabel(r"$\Delta\Pi$ [%]")
    fig.tight_layout()
    path = str(out_dir / "sweep.png")
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return [path]


def render_simulation(res, out_dir, reference=None) -> list[str]:
    t = res.grid.times()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(t, res.f_mean, "-", label="simulated mean")
    band = 2.0 * res.f_stderr
    ax.fill_between(t, res.f_mean - band, res.f_mean + band,
                    alpha=0.3, label=r"$\pm 2$ SE")
    if reference is not None:
        ax.plot(t, np.asarray(reference.values), "--", label="deterministic")
    ax.set_xlabel("t")
    ax.set_ylabel("adoption level")
    ax.legend()
    fig.tight_layout()
    path = str(out_dir / "simulation.png")
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return [path]


def render_validation(rep, out_dir) -> list[str]:
    t = rep.result.grid.times()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(t, rep.z, ".")
    for level, style in ((2, ":"), (4, "--")):
        ax.axhline(level, color="r", linestyle=style)
        ax.axhline(-level, color="r", linestyle=style)
    ax.set_xlabel("t")
    ax.set_ylabel("z score")
    ax.set_title("pass" if rep.passed else "FAIL")
    fig.tight_layout()
    path = str(out_dir / "validation.png")
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return [path]
