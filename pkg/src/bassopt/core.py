"""Shared domain types: time grids, response models, economics, promotion
policies, trajectories, and the discounted profit functional."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

#: absolute tolerance for probability / monotonicity assertions
PROB_TOL = 1e-9


class ConfigError(ValueError):
    """Invalid configuration value or constructor argument."""


class GridMismatchError(ValueError):
    """Two grid-aligned objects do not share the same time grid."""


class UndefinedBaselineError(ZeroDivisionError):
    """Relative profit gain is undefined because the baseline profit is zero."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid t_k = k*h, k = 0..n_steps, on [0, t_end]."""

    t_end: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigError(f"t_end must be positive and finite, got {self.t_end}")
        if int(self.n_steps) < 1:
            raise ConfigError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def h(self) -> float:
        return self.t_end / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)

    def refine(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_end, self.n_steps * factor)


class ResponseForm(enum.Enum):
    SQRT = "sqrt"
    LOG = "log"


@dataclass(frozen=True)
class ResponseModel:
    """Concave spend-to-rate response: p(s_p) = p0 + bp*g(s_p) and
    q(s_q) = q0 + bq*g(s_q), with g(s) = sqrt(s) or ln(1+s)."""

    form: ResponseForm = ResponseForm.SQRT
    p0: float = 0.0
    bp: float = 0.0
    q0: float = 0.0
    bq: float = 0.0

    def __post_init__(self):
        form = self.form
        if isinstance(form, str):
            form = ResponseForm(form.lower())
            object.__setattr__(self, "form", form)
        for name in ("p0", "bp", "q0", "bq"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be finite and >= 0, got {v}")

    def gain(self, s):
        """Concave transform g(s) applied to a spend rate (s >= 0)."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ConfigError("spend rates must be >= 0")
        if self.form is ResponseForm.SQRT:
            return np.sqrt(s)
        return np.log1p(s)

    def eval_p(self, sp):
        return self.p0 + self.bp * self.gain(sp)

    def eval_q(self, sq):
        return self.q0 + self.bq * self.gain(sq)


#: sentinel for an unbounded planning horizon
INFINITE = math.inf


@dataclass(frozen=True)
class Economics:
    """Income per adoption, discount rate, and planning horizon.

    ``horizon`` is either a finite positive time or ``math.inf``; the
    infinite case is handled downstream by truncation plus an analytic
    costate tail.
    """

    gamma: float
    theta: float = 0.0
    horizon: float = INFINITE

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ConfigError(f"gamma must be positive and finite, got {self.gamma}")
        if not (math.isfinite(self.theta) and self.theta >= 0):
            raise ConfigError(f"theta must be finite and >= 0, got {self.theta}")
        if self.horizon <= 0:
            raise ConfigError(f"horizon must be > 0, got {self.horizon}")

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.horizon)


@dataclass(frozen=True)
class PromotionPolicy:
    """Spend rates at grid nodes, interpreted as piecewise linear in time.

    ``sp`` / ``sq`` have shape (n_nodes,) for a uniform promotion, or
    (n_nodes, n_groups) when each group gets its own channel.
    """

    grid: TimeGrid
    sp: np.ndarray
    sq: np.ndarray

    def __post_init__(self):
        sp = np.asarray(self.sp, dtype=float)
        sq = np.asarray(self.sq, dtype=float)
        object.__setattr__(self, "sp", sp)
        object.__setattr__(self, "sq", sq)
        if sp.shape != sq.shape:
            raise ConfigError(f"sp/sq shape mismatch: {sp.shape} vs {sq.shape}")
        if sp.shape[0] != self.grid.n_nodes:
            raise ConfigError(
                f"policy length {sp.shape[0]} != grid nodes {self.grid.n_nodes}")
        if not (np.all(np.isfinite(sp)) and np.all(np.isfinite(sq))):
            raise ConfigError("policy contains non-finite spend")
        if np.any(sp < 0) or np.any(sq < 0):
            raise ConfigError("policy contains negative spend")

    @classmethod
    def zero(cls, grid: TimeGrid, n_groups: int | None = None) -> "PromotionPolicy":
        shape = (grid.n_nodes,) if n_groups is None else (grid.n_nodes, n_groups)
        return cls(grid, np.zeros(shape), np.zeros(shape))

    def total_spend(self) -> np.ndarray:
        """Per-consumer total spend rate at grid nodes.

        Group-targeted channels are averaged over the (equal-size) groups.
        """
        sp, sq = self.sp, self.sq
        if sp.ndim == 2:
            return sp.mean(axis=1) + sq.mean(axis=1)
        return sp + sq

    def at(self, t, step: bool = False):
        """(sp, sq) at time(s) t; linear interpolation, or left-endpoint
        piecewise-constant when ``step`` is True."""
        tg = self.grid.times()
        if step:
            idx = np.clip(np.searchsorted(tg, t, side="right") - 1, 0, self.grid.n_steps - 1)
            return self.sp[idx], self.sq[idx]
        if self.sp.ndim == 1:
            return np.interp(t, tg, self.sp), np.interp(t, tg, self.sq)
        sp = np.stack([np.interp(t, tg, c) for c in self.sp.T], axis=-1)
        sq = np.stack([np.interp(t, tg, c) for c in self.sq.T], axis=-1)
        return sp, sq


@dataclass(frozen=True)
class Trajectory:
    """A named vector quantity sampled at the nodes of a time grid."""

    grid: TimeGrid
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape[0] != self.grid.n_nodes:
            raise GridMismatchError(
                f"trajectory length {v.shape[0]} != grid nodes {self.grid.n_nodes}")
        if not np.all(np.isfinite(v)):
            raise ConfigError(f"trajectory {self.label!r} contains non-finite values")


@dataclass(frozen=True)
class OptimalSolution:
    """Optimal policies plus the state/costate trajectories and profit summary."""

    policy: PromotionPolicy
    f_opt: Trajectory
    f0: Trajectory
    state: Trajectory
    costate: Trajectory
    pi_opt: float
    pi0: float
    delta_pi: float
    diagnostics: dict = field(default_factory=dict)


def require_same_grid(a: TimeGrid, b: TimeGrid) -> None:
    if a.n_steps != b.n_steps or not math.isclose(a.t_end, b.t_end, rel_tol=1e-12):
        raise GridMismatchError(f"grids differ: {a} vs {b}")


def adoption_from_survival(survival: Trajectory, M: int) -> Trajectory:
    """Expected adoption level from the per-node survival probabilities:
    f = 1 - (1/M) * sum_j [S_j]."""
    S = np.asarray(survival.values, dtype=float)
    if S.ndim != 2 or S.shape[1] != M:
        raise GridMismatchError(
            f"expected (n_nodes, {M}) survival array, got shape {S.shape}")
    if np.any(S < -1e-12) or np.any(S > 1 + 1e-12):
        raise ValueError("survival probabilities outside [0, 1]")
    f = 1.0 - S.mean(axis=1)
    f = np.clip(f, 0.0, 1.0)
    return Trajectory(survival.grid, f, label="f")


def dfdt(f: np.ndarray, h: float) -> np.ndarray:
    """df/dt: centered differences on interior nodes, one-sided at the ends."""
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2 * h)
    d[0] = (f[1] - f[0]) / h
    d[-1] = (f[-1] - f[-2]) / h
    return d


def profit(policy: PromotionPolicy, f: Trajectory, econ: Economics,
           mono_tol: float = 1e-7) -> float:
    """Discounted accumulated profit per consumer on the policy grid:
    the composite-trapezoid approximation of
    integral e^{-theta t} (gamma df/dt - total spend) dt."""
    require_same_grid(policy.grid, f.grid)
    fv = np.asarray(f.values, dtype=float)
    if fv.ndim != 1:
        raise ValueError("profit expects a scalar adoption trajectory")
    if np.any(np.diff(fv) < -mono_tol):
        raise ValueError("adoption trajectory is not monotone nondecreasing")
    t = policy.grid.times()
    rate = np.exp(-econ.theta * t) * (econ.gamma * dfdt(fv, policy.grid.h)
                                      - policy.total_spend())
    return float(np.trapezoid(rate, t))


def delta_pi(pi_opt: float, pi_zero: float) -> float:
    """Relative profit increase (pi_opt - pi_zero) / pi_zero."""
    if pi_zero == 0:
        raise UndefinedBaselineError("baseline profit is zero")
    return (pi_opt - pi_zero) / pi_zero
