"""Network specifications for all model families, plus JSON (de)serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, ResponseModel

#: hard cap on node count for any 2^M-state computation
MASTER_MAX_NODES = 20


@dataclass(frozen=True)
class GeneralNetwork:
    """Weighted directed network with per-node external rates and an MxM
    matrix of internal rates q[k, j] = rate of influence of k on j.

    ``bp`` and ``bq`` carry the per-node / per-edge response coefficients;
    they default to the homogeneous values of a shared ResponseModel when
    built through :func:`complete_as_general` / :func:`ring_as_general`.
    """

    M: int
    p_base: np.ndarray
    q_base: np.ndarray
    bp: np.ndarray
    bq: np.ndarray

    def __post_init__(self):
        if self.M < 1:
            raise ConfigError(f"node count must be >= 1, got {self.M}")
        p = np.asarray(self.p_base, dtype=float)
        q = np.asarray(self.q_base, dtype=float)
        bp = np.asarray(self.bp, dtype=float)
        bq = np.asarray(self.bq, dtype=float)
        object.__setattr__(self, "p_base", p)
        object.__setattr__(self, "q_base", q)
        object.__setattr__(self, "bp", bp)
        object.__setattr__(self, "bq", bq)
        if p.shape != (self.M,) or bp.shape != (self.M,):
            raise ConfigError("p_base/bp must have shape (M,)")
        if q.shape != (self.M, self.M) or bq.shape != (self.M, self.M):
            raise ConfigError("q_base/bq must have shape (M, M)")
        for name, a in (("p_base", p), ("q_base", q), ("bp", bp), ("bq", bq)):
            if not np.all(np.isfinite(a)):
                raise ConfigError(f"{name} contains non-finite entries")
            if np.any(a < 0):
                raise ConfigError(f"{name} contains negative rates")
        if np.any(np.diag(q) != 0) or np.any(np.diag(bq) != 0):
            raise ConfigError("self-influence rates q[j, j] must be zero")

    def p_rates(self, g_p):
        """Per-node external rates for gain value g_p = g(s_p)."""
        return self.p_base + self.bp * g_p

    def q_rates(self, g_q):
        """Internal rate matrix for gain value g_q = g(s_q)."""
        return self.q_base + self.bq * g_q


@dataclass(frozen=True)
class CompleteHomogeneous:
    M: int

    def __post_init__(self):
        if self.M < 2:
            raise ConfigError(f"complete network needs M >= 2, got {self.M}")


@dataclass(frozen=True)
class InfiniteComplete:
    pass


@dataclass(frozen=True)
class InfiniteLine:
    pass


@dataclass(frozen=True)
class HeteroCompleteTwoGroups:
    """Infinite complete network of two equal-size homogeneous groups."""

    group1: ResponseModel
    group2: ResponseModel


#: tagged union of all supported network models
NetworkModel = (GeneralNetwork | CompleteHomogeneous | InfiniteComplete
                | InfiniteLine | HeteroCompleteTwoGroups)


def complete_as_general(M: int, resp: ResponseModel) -> GeneralNetwork:
    """Homogeneous complete network: p_j = p0, q_{k->j} = q0/(M-1)."""
    if not 2 <= M <= MASTER_MAX_NODES:
        raise ConfigError(f"complete_as_general needs 2 <= M <= {MASTER_MAX_NODES}")
    off = 1.0 - np.eye(M)
    return GeneralNetwork(
        M=M,
        p_base=np.full(M, resp.p0),
        q_base=off * (resp.q0 / (M - 1)),
        bp=np.full(M, resp.bp),
        bq=off * (resp.bq / (M - 1)),
    )


def ring_as_general(L: int, resp: ResponseModel,
                    master_use: bool = True) -> GeneralNetwork:
    """Periodic ring: each node influenced by its two neighbors at rate q0/2.

    Finite surrogate of the infinite line; ``master_use=False`` lifts the
    2^M-state cap for Monte Carlo runs.
    """
    if L < 3:
        raise ConfigError(f"ring needs L >= 3, got {L}")
    if master_use and L > MASTER_MAX_NODES:
        raise ConfigError(f"ring for master equations capped at L <= {MASTER_MAX_NODES}")
    adj = np.zeros((L, L))
    idx = np.arange(L)
    adj[idx, (idx + 1) % L] = 1.0
    adj[idx, (idx - 1) % L] = 1.0
    return GeneralNetwork(
        M=L,
        p_base=np.full(L, resp.p0),
        q_base=adj * (resp.q0 / 2),
        bp=np.full(L, resp.bp),
        bq=adj * (resp.bq / 2),
    )


def network_to_json(net: GeneralNetwork, path) -> None:
    payload = {
        "type": "general",
        "M": net.M,
        "p0": net.p_base.tolist(),
        "q0": net.q_base.tolist(),
        "bp": net.bp.tolist(),
        "bq": net.bq.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def network_from_json(path, resp: ResponseModel | None = None) -> GeneralNetwork:
    """Load a network file: {type, M or L, p0, q0, optional dense q matrix}.

    Scalar p0/q0 entries are expanded per the declared type; a ResponseModel
    is required for the scalar forms to supply response coefficients.
    """
    with open(path) as fh:
        payload = json.load(fh)
    kind = payload.get("type", "general")
    if kind == "complete":
        if resp is None:
            resp = ResponseModel(p0=payload["p0"], q0=payload["q0"])
        return complete_as_general(int(payload["M"]), resp)
    if kind == "ring":
        if resp is None:
            resp = ResponseModel(p0=payload["p0"], q0=payload["q0"])
        return ring_as_general(int(payload["L"]), resp, master_use=False)
    if kind != "general":
        raise ConfigError(f"unknown network type {kind!r}")
    M = int(payload["M"])
    p0 = payload["p0"]
    p_base = np.full(M, float(p0)) if np.isscalar(p0) else np.asarray(p0, dtype=float)
    q0 = np.asarray(payload["q0"], dtype=float)
    bp = payload.get("bp")
    bq = payload.get("bq")
    if bp is None:
        bp = np.full(M, resp.bp if resp else 0.0)
    else:
        bp = np.full(M, float(bp)) if np.isscalar(bp) else np.asarray(bp, dtype=float)
    if bq is None:
        bq = default_edge_coefficients(q0, resp.bq if resp else 0.0)
    else:
        bq = np.asarray(bq, dtype=float)
    return GeneralNetwork(M=M, p_base=p_base, q_base=q0, bp=bp, bq=bq)


def default_edge_coefficients(q_base: np.ndarray, bq_total: float) -> np.ndarray:
    """Spread a shared in-coefficient over a node's incoming edges in
    proportion to their base rates, so that sum_k bq[k, j] = bq_total
    (matching the complete/ring constructions)."""
    q_base = np.asarray(q_base, dtype=float)
    indeg = q_base.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(indeg > 0, q_base / indeg, 0.0)
    return w * bq_total
