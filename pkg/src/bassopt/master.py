"""Exact forward solver for the master equations on a general network:
the 2^M - 1 survival probabilities [S_Omega](t)."""

from __future__ import annotations

import csv

import numpy as np
import scipy.sparse as sp

from .core import (PromotionPolicy, ResponseModel, TimeGrid, Trajectory,
                   adoption_from_survival)
from .networks import MASTER_MAX_NODES, GeneralNetwork
from .solvers import rk4_integrate

#: probability bound slack for the integrator check
BOUND_TOL = 1e-8

#: switch to sparse coupling matrices above this state count
_DENSE_STATE_LIMIT = 1 << 12


def _subset_sums(weights: np.ndarray) -> np.ndarray:
    """out[mask] = sum of weights[j] over bits j set in mask (mask 0..2^M-1)."""
    M = len(weights)
    out = np.zeros(1 << M)
    for j in range(M):
        bit = 1 << j
        for lo in range(0, 1 << M, bit << 1):
            out[lo + bit: lo + (bit << 1)] = out[lo: lo + bit] + weights[j]
    return out


class SubsetIndex:
    """Bitmask indexing of the nonempty subsets of {1..M}, plus the lookup
    tables needed by the master and costate equations.

    Subset Omega with bitmask m is stored at index m - 1.
    """

    def __init__(self, net: GeneralNetwork):
        if net.M > MASTER_MAX_NODES:
            raise ValueError(
                f"2^M-state computation capped at M <= {MASTER_MAX_NODES}")
        self.net = net
        M = self.M = net.M
        self.n_states = (1 << M) - 1
        masks = np.arange(1, (1 << M), dtype=np.int64)
        self.masks = masks
        self.sizes = np.array([m.bit_count() for m in masks.tolist()], dtype=np.int64)

        # p_Omega and its response coefficient
        self.p0_sub = _subset_sums(net.p_base)[1:]
        self.bp_sub = _subset_sums(net.bp)[1:]

        # per-source subset sums q_{k->Omega} (index by full mask, 0 included)
        q_in = np.stack([_subset_sums(net.q_base[k]) for k in range(M)])
        b_in = np.stack([_subset_sums(net.bq[k]) for k in range(M)])

        # decay coefficients: sum over k outside Omega of q_{k->Omega}
        outside = np.array([[not (m >> k) & 1 for k in range(M)]
                            for m in masks.tolist()])
        self.Q0_sub = np.sum(np.where(outside.T, q_in[:, masks], 0.0), axis=0)
        self.BQ_sub = np.sum(np.where(outside.T, b_in[:, masks], 0.0), axis=0)

        # coupling A[Omega, Omega+{k}] = q_{k->Omega}, k outside Omega
        rows, cols, v0, vb = [], [], [], []
        # costate coupling B[Omega, Omega-{m}] = q_{m->Omega-{m}}, m in Omega
        brows, bcols, bv0, bvb = [], [], [], []
        for i, m in enumerate(masks.tolist()):
            for k in range(M):
                bit = 1 << k
                if not m & bit:
                    rows.append(i)
                    cols.append((m | bit) - 1)
                    v0.append(q_in[k, m])
                    vb.append(b_in[k, m])
                elif m != bit:  # |Omega| > 1
                    brows.append(i)
                    bcols.append((m ^ bit) - 1)
                    bv0.append(q_in[k, m ^ bit])
                    bvb.append(b_in[k, m ^ bit])

        def build(r, c, v):
            mat = sp.csr_matrix((v, (r, c)), shape=(self.n_states, self.n_states))
            if self.n_states <= _DENSE_STATE_LIMIT:
                return mat.toarray()
            return mat

        self.A0 = build(rows, cols, v0)
        self.Ab = build(rows, cols, vb)
        self.B0 = build(brows, bcols, bv0)
        self.Bb = build(brows, bcols, bvb)

        # source for |Omega| = 2 rows: sum_m q_{m->Omega-{m}}
        pair = self.sizes == 2
        self.C0 = np.zeros(self.n_states)
        self.Cb = np.zeros(self.n_states)
        agg0 = sp.csr_matrix((bv0, (brows, np.zeros(len(brows), dtype=int))),
                             shape=(self.n_states, 1)).toarray()[:, 0]
        aggb = sp.csr_matrix((bvb, (brows, np.zeros(len(brows), dtype=int))),
                             shape=(self.n_states, 1)).toarray()[:, 0]
        self.C0[pair] = agg0[pair]
        self.Cb[pair] = aggb[pair]

        self.singleton_idx = np.array([(1 << j) - 1 for j in range(M)])
        self.pair_idx = np.flatnonzero(pair)

    def index_of(self, nodes) -> int:
        mask = 0
        for j in nodes:
            mask |= 1 << j
        if mask == 0:
            raise ValueError("empty subset has no index")
        return mask - 1

    def decay(self, g_p: float, g_q: float) -> np.ndarray:
        """p_Omega(s_p) + sum_{k outside} q_{k->Omega}(s_q) for every subset."""
        return (self.p0_sub + g_p * self.bp_sub
                + self.Q0_sub + g_q * self.BQ_sub)


def master_rhs(state: np.ndarray, t: float, policy: PromotionPolicy,
               net: GeneralNetwork, resp: ResponseModel,
               index: SubsetIndex | None = None) -> np.ndarray:
    """d[S_Omega]/dt for all nonempty subsets at time t."""
    index = index or SubsetIndex(net)
    if state.shape != (index.n_states,):
        raise ValueError(f"state length {state.shape} != {index.n_states}")
    sp_t, sq_t = policy.at(t)
    g_p = float(resp.gain(sp_t))
    g_q = float(resp.gain(sq_t))
    return _rhs(state, g_p, g_q, index)


def _rhs(state: np.ndarray, g_p: float, g_q: float,
         index: SubsetIndex) -> np.ndarray:
    coupling = index.A0 @ state
    if g_q != 0.0:
        coupling = coupling + g_q * (index.Ab @ state)
    return -index.decay(g_p, g_q) * state + coupling


def solve_master(net: GeneralNetwork, resp: ResponseModel,
                 policy: PromotionPolicy, grid: TimeGrid,
                 index: SubsetIndex | None = None,
                 step_controls: bool = False) -> Trajectory:
    """Integrate the master equations from [S_Omega](0) = 1 with RK4.

    ``step_controls`` switches the policy interpolation to left-endpoint
    piecewise-constant (the Monte Carlo convention).
    """
    idx = index or SubsetIndex(net)
    gains = _node_gains(policy, resp, step_controls)

    def rhs(t, y, z):
        return _rhs(y, z[0], z[1], idx)

    y0 = np.ones(idx.n_states)
    values = rk4_integrate(rhs, y0, grid, frozen=gains)
    if np.any(values < -BOUND_TOL) or np.any(values > 1 + BOUND_TOL):
        raise RuntimeError("integrator produced survival probability outside [0, 1]")
    return Trajectory(grid, values, label="S_Omega")


def _node_gains(policy: PromotionPolicy, resp: ResponseModel,
                step_controls: bool) -> np.ndarray:
    """Gain values (g_p, g_q) frozen for RK4: sampled at grid nodes (linear
    interpolation at half-steps) or, for step controls, one constant value
    per cell taken from the left endpoint."""
    if step_controls:
        return np.column_stack([resp.gain(policy.sp[:-1]),
                                resp.gain(policy.sq[:-1])])
    return np.column_stack([resp.gain(policy.sp), resp.gain(policy.sq)])


def survival_singletons(traj: Trajectory, index: SubsetIndex) -> Trajectory:
    return Trajectory(traj.grid, traj.values[:, index.singleton_idx],
                      label="S_singletons")


def adoption_level(traj: Trajectory, index: SubsetIndex) -> Trajectory:
    return adoption_from_survival(survival_singletons(traj, index), index.M)


def check_subset_monotonicity(traj: Trajectory, index: SubsetIndex,
                              tol: float = 1e-8) -> float:
    """Largest violation of Omega subset Omega' => [S_Omega'] <= [S_Omega]."""
    worst = 0.0
    vals = traj.values
    masks = index.masks.tolist()
    for i, m in enumerate(masks):
        for k in range(index.M):
            bit = 1 << k
            if not m & bit:
                j = (m | bit) - 1
                worst = max(worst, float(np.max(vals[:, j] - vals[:, i])))
    return worst


def dump_csv(traj: Trajectory, index: SubsetIndex, path, full: bool = False) -> None:
    """Write t plus one column per stored subset (singletons and pairs by
    default; every subset when ``full``)."""
    if full:
        cols = np.arange(index.n_states)
    else:
        cols = np.concatenate([index.singleton_idx, index.pair_idx])
    names = []
    for c in cols:
        nodes = [str(j) for j in range(index.M) if (index.masks[c] >> j) & 1]
        names.append("S_" + "_".join(nodes))
    t = traj.grid.times()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + names)
        for i, ti in enumerate(t):
            w.writerow([f"{ti:.17g}"] + [f"{traj.values[i, c]:.17g}" for c in cols])
