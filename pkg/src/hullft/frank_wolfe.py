"""
Frank-Wolfe over the probability simplex for ``min ||q - P w||^2``.

Starts at the pool vertex best aligned with the query, then repeatedly
moves toward the vertex most aligned with the current residual using an
exact line search along the edge. Each step adds at most one point to the
support, so stopping early yields a sparse convex combination.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ContractError
from .geometry import CandidatePool, SimplexWeights, as_vector, reconstruction_error


class StopReason(str, Enum):
    TOLERANCE_MET = "tolerance_met"
    CAP_REACHED = "cap_reached"
    GAP_VANISHED = "gap_vanished"
    MAX_ITERS = "max_iters"


@dataclass(frozen=True)
class FWConfig:
    """Stopping rules for :func:`frank_wolfe`.

    ``support_cap=None`` (or any cap >= K) leaves the support unbounded.
    ``max_iters=None`` means ``10 * support_cap``, or 1000 when uncapped.
    """

    epsilon: float = 1e-5
    support_cap: Optional[int] = None
    max_iters: Optional[int] = None
    gap_tolerance: float = 1e-12
    forced_unique: bool = False

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ContractError("epsilon must be >= 0")
        if self.support_cap is not None and self.support_cap < 1:
            raise ContractError("support_cap must be >= 1")
        if self.max_iters is not None and self.max_iters < 1:
            raise ContractError("max_iters must be >= 1")
        if not self.gap_tolerance >= 0:
            raise ContractError("gap_tolerance must be >= 0")

    @property
    def iteration_limit(self) -> int:
        if self.max_iters is not None:
            return self.max_iters
        return 10 * self.support_cap if self.support_cap is not None else 1000

    def with_defaults_for_budget(self, budget: int) -> "FWConfig":
        """Fill an unset cap with the downstream budget N."""
        if self.support_cap is not None:
            return self
        return replace(self, support_cap=int(budget))


@dataclass(frozen=True)
class TraceRecord:
    objective: float
    vertex: int
    step_size: float
    support_size: int
    weight_sum: float
    gap: float = float("nan")


@dataclass(frozen=True)
class FWResult:
    weights: SimplexWeights
    final_error: float
    iterations: int
    stop_reason: StopReason
    trace: tuple  # record 0 is the starting vertex; one record per iteration after that

    @property
    def objectives(self) -> np.ndarray:
        return np.array([rec.objective for rec in self.trace])


def _argmax_lowest(scores: np.ndarray, allowed: Optional[np.ndarray] = None) -> int:
    # np.argmax already returns the first maximal index
    if allowed is None:
        return int(np.argmax(scores))
    candidates = np.flatnonzero(allowed)
    if candidates.size == 0:
        return -1
    return int(candidates[np.argmax(scores[candidates])])


def frank_wolfe(q, pool: CandidatePool, cfg: FWConfig = FWConfig()) -> FWResult:
    """Sparse convex approximation of ``q`` by the rows of ``pool``.

    Ties in both argmax selections go to the lowest index. The loop stops on
    the first of: error <= ``cfg.epsilon`` (skipped for ``forced_unique``),
    support size == cap, FW gap <= ``cfg.gap_tolerance``, or the iteration
    limit. With ``forced_unique`` each step may only pick a vertex that has
    never been chosen before.
    """
    q = as_vector(q, "query")
    if pool.size < 1:
        raise ContractError("empty pool")
    if q.shape[0] != pool.dim:
        raise ContractError(f"query has dimension {q.shape[0]}, pool has {pool.dim}")

    P = pool.as_float64()
    K = P.shape[0]
    cap = cfg.support_cap if cfg.support_cap is not None and cfg.support_cap < K else None
    limit = cfg.iteration_limit

    w = np.zeros(K)
    v0 = _argmax_lowest(P @ q)
    w[v0] = 1.0
    chosen = np.zeros(K, dtype=bool)
    chosen[v0] = True

    x = P[v0].copy()
    r = q - x
    err = float(r @ r)
    trace = [TraceRecord(err, v0, 1.0, 1, 1.0)]
    iterations = 0

    while True:
        support = np.flatnonzero(w > 0.0)
        if not cfg.forced_unique and err <= cfg.epsilon:
            reason = StopReason.TOLERANCE_MET
            break
        if cap is not None and support.size >= cap:
            reason = StopReason.CAP_REACHED
            break
        if iterations >= limit:
            reason = StopReason.MAX_ITERS
            break

        scores = P @ r
        if cfg.forced_unique:
            v = _argmax_lowest(scores, ~chosen)
            if v < 0:
                reason = StopReason.GAP_VANISHED
                break
        else:
            v = _argmax_lowest(scores)
        d = P[v] - x
        gap = float(r @ d)
        dd = float(d @ d)
        if gap <= cfg.gap_tolerance or dd == 0.0:
            reason = StopReason.GAP_VANISHED
            break
        gamma = min(max(gap / dd, 0.0), 1.0)

        w_new = (1.0 - gamma) * w
        w_new[v] += gamma
        support_new = np.flatnonzero(w_new > 0.0)
        x_new = w_new[support_new] @ P[support_new]
        r_new = q - x_new
        err_new = float(r_new @ r_new)
        if err_new > err:
            # rounding made the exact step uphill; w is already stationary to working precision
            reason = StopReason.GAP_VANISHED
            break

        w, x, r, err = w_new, x_new, r_new, err_new
        chosen[v] = True
        iterations += 1
        trace.append(TraceRecord(err, v, gamma, int(support_new.size), float(w.sum()), gap))

    w = np.where(w > 0.0, w, 0.0)
    weights = SimplexWeights.from_dense(w, renormalize=True)
    final_error = reconstruction_error(q, pool, weights)
    return FWResult(weights, final_error, iterations, reason, tuple(trace))
