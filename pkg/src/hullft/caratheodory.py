"""
Exact Caratheodory reduction of a convex combination.

Any convex combination of points in R^d can be rewritten over at most d+1
of them without moving the weighted mean. Each round finds an affine
dependency among the active points and shifts weight along it until one
weight hits zero.
"""
from __future__ import annotations

import numpy as np

from .errors import ContractError, NumericalError
from .geometry import SimplexWeights

RANK_TOL = 1e-6
DROP_TOL = 1e-12


def find_affine_dependency(points) -> np.ndarray:
    """Nontrivial ``alpha`` with ``sum(alpha) == 0`` and ``alpha @ points == 0``.

    Parameters
    ----------
    points : array_like, shape (n, d)
        Requires ``n > d + 1`` so a dependency must exist.

    Returns
    -------
    alpha : ndarray, shape (n,)
        Unit-norm right singular vector for the smallest singular value of
        the points augmented with a row of ones. The sign is fixed so the
        first clearly nonzero coefficient is positive.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ContractError("points must be an (n, d) array")
    n, d = X.shape
    if n <= d + 1:
        raise ContractError(f"need more than d+1={d + 1} points for a dependency, got {n}")

    A = np.vstack([X.T, np.ones((1, n))])
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    alpha = vt[-1]
    smallest = float(np.linalg.norm(A @ alpha))
    largest = float(s[0]) if s.size else 0.0
    if smallest > RANK_TOL * largest:
        raise NumericalError(
            f"no affine dependency found: smallest singular value {smallest:.3e} vs largest {largest:.3e}"
        )
    lead = np.flatnonzero(np.abs(alpha) > 1e-12 * np.abs(alpha).max())[0]
    if alpha[lead] < 0:
        alpha = -alpha
    return alpha


def caratheodory_reduce(points, w: SimplexWeights) -> SimplexWeights:
    """Rewrite ``w`` over at most ``d + 1`` of ``points`` with the same mean.

    ``points`` has one row per index of ``w`` (``w.dimension`` rows). The
    eliminated index in each round is the argmin of ``w_i / alpha_i`` over
    positive ``alpha_i`` (lowest index on ties); any other weight that drops
    below 1e-12 in that round is removed as well.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != w.dimension:
        raise ContractError(f"need {w.dimension} points as rows, got array of shape {X.shape}")
    d = X.shape[1]
    if len(w) <= d + 1:
        return w

    active = np.array(w.indices, dtype=np.intp)
    weights = np.array(w.values, dtype=np.float64)
    while active.size > d + 1:
        alpha = find_affine_dependency(X[active])
        pos = alpha > 0
        if not pos.any():
            alpha = -alpha
            pos = alpha > 0
            if not pos.any():
                raise NumericalError("affine dependency has no nonzero coefficient")
        ratios = np.full(active.size, np.inf)
        ratios[pos] = weights[pos] / alpha[pos]
        i_star = int(np.argmin(ratios))
        gamma = ratios[i_star]
        weights = weights - gamma * alpha
        weights[i_star] = 0.0
        keep = weights >= DROP_TOL
        active, weights = active[keep], weights[keep]

    weights = weights / weights.sum()
    return SimplexWeights(tuple(active.tolist()), tuple(weights.tolist()), w.dimension)
