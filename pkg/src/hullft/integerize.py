"""
Turning fractional simplex weights into an exact budget of N copies.

``integerize`` floors ``N * w``, hands out the leftover units greedily to
whichever point brings the multiset mean closest to the query, then runs
a few passes of single-unit moves between support points. ``pad_by_weights``
is the largest-remainder baseline that ignores geometry.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .geometry import CandidatePool, SimplexWeights, as_vector

BRUTE_FORCE_MAX_SUPPORT = 5
BRUTE_FORCE_MAX_BUDGET = 12


@dataclass(frozen=True)
class SupportMultiset:
    """Pool indices ``support`` with parallel integer ``counts`` summing to ``budget``.

    Zero counts are allowed and kept so the multiset stays aligned with the
    fractional support it came from.
    """

    support: tuple
    counts: tuple
    budget: int
    # (stage, objective) pairs; stage is "floor", "fill" or "swap"
    objective_log: tuple = field(default=(), compare=False, repr=False)
    # True when a swap pass made no move, i.e. the result is 1-swap locally optimal
    swap_converged: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        counts = tuple(int(c) for c in self.counts)
        if len(support) != len(counts):
            raise ContractError("support and counts must have equal length")
        if len(set(support)) != len(support):
            raise ContractError("support indices must be distinct")
        if any(c < 0 for c in counts):
            raise ContractError("counts must be nonnegative")
        if self.budget < 1 or sum(counts) != self.budget:
            raise ContractError(f"counts sum to {sum(counts)}, budget is {self.budget}")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "counts", counts)

    def nonzero(self):
        """``(index, count)`` pairs with positive count, in support order."""
        return [(i, c) for i, c in zip(self.support, self.counts) if c > 0]

    def empirical_weights(self, dimension: int) -> SimplexWeights:
        """``c_j / N`` as a simplex point over ``dimension`` pool indices."""
        entries = {i: c / self.budget for i, c in self.nonzero()}
        return SimplexWeights.from_mapping(entries, dimension)


@dataclass(frozen=True)
class FidelityReport:
    l2_distance: float
    indices: tuple
    per_index_deviation: tuple


def _support_rows(q, pool: CandidatePool, w: SimplexWeights):
    q = as_vector(q, "query")
    if q.shape[0] != pool.dim:
        raise ContractError(f"query has dimension {q.shape[0]}, pool has {pool.dim}")
    if w.dimension != pool.size:
        raise ContractError(f"weights are over {w.dimension} points, pool has {pool.size}")
    if len(w) == 0:
        raise ContractError("empty support")
    S = np.asarray(pool.vectors[list(w.indices)], dtype=np.float64)
    return q, S, np.asarray(w.values, dtype=np.float64)


def _sqnorm_rows(R):
    # plain sum of squares (no fused multiply-add) keeps mirror-image ties exact
    return np.sum(R * R, axis=-1)


def multiset_error(q, S, counts, N) -> float:
    """Distance between ``q`` and the uniform mean of ``counts`` copies of the rows of ``S``."""
    r = q - (np.asarray(counts, dtype=np.float64) @ S) / N
    return float(_sqnorm_rows(r))


def _check_budget(N):
    if int(N) != N or N < 1:
        raise ContractError(f"budget must be a positive integer, got {N!r}")
    return int(N)


def integerize(q, pool: CandidatePool, w: SimplexWeights, N: int, T: int = 2) -> SupportMultiset:
    """Exact N-point multiset over the support of ``w`` whose mean is near ``q``.

    Ties (greedy fill and swap scan) go to the lowest support position. Swap
    passes scan ordered pairs ``(j, k)`` in ascending order and apply each
    strictly improving move immediately; a pass with no move ends the loop.
    """
    N = _check_budget(N)
    if T < 0:
        raise ContractError("swap passes T must be >= 0")
    q, S, wt = _support_rows(q, pool, w)
    n = S.shape[0]

    counts = np.floor(N * wt).astype(np.int64)
    total = counts @ S
    r = q - total / N
    log = [("floor", float(_sqnorm_rows(r)))]

    for _ in range(N - int(counts.sum())):
        resid = q - (total + S) / N
        errs = _sqnorm_rows(resid)
        j = int(np.argmin(errs))
        counts[j] += 1
        total = total + S[j]
        log.append(("fill", float(errs[j])))

    err = float(_sqnorm_rows(q - total / N))
    converged = False
    for _ in range(T):
        improved = False
        for j in range(n):
            k = 0
            while counts[j] > 0 and k < n:
                moved = total - S[j] + S[k:]
                resid = q - moved / N
                errs = _sqnorm_rows(resid)
                if j >= k:
                    errs[j - k] = np.inf
                better = np.flatnonzero(errs < err)
                if better.size == 0:
                    break
                b = int(better[0])
                kk = k + b
                counts[j] -= 1
                counts[kk] += 1
                total = moved[b]
                err = float(errs[b])
                log.append(("swap", err))
                improved = True
                k = kk + 1
        if not improved:
            converged = True
            break

    return SupportMultiset(w.indices, tuple(counts.tolist()), N, tuple(log), converged)


def pad_by_weights(w: SimplexWeights, N: int) -> SupportMultiset:
    """Largest-remainder rounding of ``N * w`` (stable on remainder ties)."""
    N = _check_budget(N)
    exact = [N * x for x in w.values]
    counts = [math.floor(x) for x in exact]
    leftover = N - sum(counts)
    order = sorted(range(len(counts)), key=lambda j: -(exact[j] - counts[j]))
    for j in order[:leftover]:
        counts[j] += 1
    return SupportMultiset(w.indices, tuple(counts), N)


def _compositions_desc(N, parts):
    """All ways to write N as ``parts`` nonnegative integers, lexicographically descending."""
    if parts == 1:
        yield (N,)
        return
    for first in range(N, -1, -1):
        for rest in _compositions_desc(N - first, parts - 1):
            yield (first,) + rest


def brute_force_integerize(q, pool: CandidatePool, w: SimplexWeights, N: int) -> SupportMultiset:
    """Global minimizer of the multiset error by full enumeration.

    Only for ``|support| <= 5`` and ``N <= 12``. Among equal-error count
    vectors the lexicographically largest one wins, which favours earlier
    support positions like the greedy fill does.
    """
    N = _check_budget(N)
    if len(w) > BRUTE_FORCE_MAX_SUPPORT or N > BRUTE_FORCE_MAX_BUDGET:
        raise ContractError(
            f"enumeration limited to support <= {BRUTE_FORCE_MAX_SUPPORT} and N <= {BRUTE_FORCE_MAX_BUDGET}"
        )
    q, S, _ = _support_rows(q, pool, w)
    best, best_err = None, np.inf
    for c in _compositions_desc(N, S.shape[0]):
        e = multiset_error(q, S, c, N)
        if e < best_err:
            best, best_err = c, e
    return SupportMultiset(w.indices, best, N, (("optimum", best_err),))


def fidelity(w: SimplexWeights, ms: SupportMultiset) -> FidelityReport:
    """l2 distance between ``w`` and the empirical weights ``c_j / N``.

    Indices of ``w`` missing from ``ms`` count as empirical weight zero.
    """
    wd = w.as_dict()
    extra = set(ms.support) - set(wd)
    if extra:
        raise ContractError(f"multiset indices {sorted(extra)} are outside the weight support")
    emp = dict(zip(ms.support, ms.counts))
    indices = tuple(w.indices)
    dev = tuple(abs(emp.get(i, 0) / ms.budget - wd[i]) for i in indices)
    return FidelityReport(math.sqrt(math.fsum(x * x for x in dev)), indices, dev)


__all__ = [
    "SupportMultiset",
    "FidelityReport",
    "integerize",
    "pad_by_weights",
    "brute_force_integerize",
    "fidelity",
    "multiset_error",
]
