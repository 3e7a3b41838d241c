"""
End-to-end selection: kNN preselection, selector + integerizer, PCA variant.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .caratheodory import caratheodory_reduce
from .errors import ContractError
from .frank_wolfe import FWConfig, frank_wolfe
from .geometry import CandidatePool, SimplexWeights, as_vector, reconstruction_error
from .integerize import SupportMultiset, fidelity, integerize, pad_by_weights

SELECTORS = ("fw", "fw_no_epsilon", "caratheodory")
INTEGERIZERS = ("geometric", "pad_by_weights", "none")

# high-accuracy solve that feeds the Caratheodory reduction
CARATHEODORY_FW = FWConfig(epsilon=1e-10, support_cap=None, max_iters=5000)


def knn_preselect(corpus: CandidatePool, q, K: int, metric: str = "inner_product") -> CandidatePool:
    """The ``min(K, len(corpus))`` best-scoring rows, best first.

    Exact brute-force scan. ``metric="inner_product"`` ranks by ``<q, p>``
    (cosine on normalized pools); ``"euclidean"`` ranks by ascending
    distance. Ties keep the lower corpus index first.
    """
    q = as_vector(q, "query")
    if q.shape[0] != corpus.dim:
        raise ContractError(f"query has dimension {q.shape[0]}, corpus has {corpus.dim}")
    if K < 1:
        raise ContractError("K must be >= 1")
    X = corpus.as_float64()
    if metric == "inner_product":
        key = -(X @ q)
    elif metric == "euclidean":
        diff = X - q
        key = np.einsum("ij,ij->i", diff, diff)
    else:
        raise ContractError(f"unknown metric {metric!r}")
    order = np.argsort(key, kind="stable")[: min(K, corpus.size)]
    return corpus.subset(order)


@dataclass(frozen=True)
class SelectionRequest:
    query: np.ndarray
    budget: int
    fw_config: FWConfig = field(default_factory=FWConfig)
    swap_passes: int = 2
    selector: str = "fw"
    integerizer: str = "geometric"
    pca_dim: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "query", as_vector(self.query, "query"))
        if int(self.budget) != self.budget or self.budget < 1:
            raise ContractError("budget must be a positive integer")
        if self.swap_passes < 0:
            raise ContractError("swap_passes must be >= 0")
        if self.selector not in SELECTORS:
            raise ContractError(f"selector must be one of {SELECTORS}")
        if self.integerizer not in INTEGERIZERS:
            raise ContractError(f"integerizer must be one of {INTEGERIZERS}")
        if self.pca_dim is not None and not 1 <= self.pca_dim <= self.query.shape[0]:
            raise ContractError(f"pca_dim must be in [1, {self.query.shape[0]}]")


@dataclass(frozen=True)
class SelectionResult:
    multiset: Optional[SupportMultiset]
    fractional: SimplexWeights
    metrics: dict
    iterations: int
    stop_reason: str
    warning: Optional[str] = None
    timings: dict = field(default_factory=dict, compare=False)


def _select_weights(q, pool: CandidatePool, req: SelectionRequest):
    if req.selector == "caratheodory":
        fw = frank_wolfe(q, pool, CARATHEODORY_FW)
        w = caratheodory_reduce(pool.as_float64(), fw.weights)
        return w, fw
    cfg = req.fw_config.with_defaults_for_budget(req.budget)
    if req.selector == "fw_no_epsilon":
        cfg = replace(cfg, forced_unique=True)
    fw = frank_wolfe(q, pool, cfg)
    return fw.weights, fw


def _run(q, pool: CandidatePool, req: SelectionRequest) -> SelectionResult:
    t0 = time.perf_counter()
    w, fw = _select_weights(q, pool, req)
    t1 = time.perf_counter()

    ms, warning = None, None
    if req.integerizer == "geometric":
        ms = integerize(q, pool, w, req.budget, req.swap_passes)
    elif req.integerizer == "pad_by_weights":
        ms = pad_by_weights(w, req.budget)
    else:
        warning = f"integerizer=none: returning fractional weights, budget {req.budget} not applied"
    t2 = time.perf_counter()

    metrics = {
        "fw_error": reconstruction_error(q, pool, w),
        "integer_error": None,
        "fidelity_l2": None,
        "support_size": len(w),
    }
    if ms is not None:
        metrics["integer_error"] = reconstruction_error(q, pool, ms.empirical_weights(pool.size))
        metrics["fidelity_l2"] = fidelity(w, ms).l2_distance
        metrics["support_size"] = len(ms.nonzero())
    timings = {"select": t1 - t0, "integerize": t2 - t1}
    return SelectionResult(ms, w, metrics, fw.iterations, fw.stop_reason.value, warning, timings)


def hullft_select(req: SelectionRequest, pool: CandidatePool) -> SelectionResult:
    """Run the configured selector, then the configured integerizer.

    ``caratheodory`` solves to high accuracy with uncapped FW before
    reducing the support to at most d+1 points; ``fw_no_epsilon`` is FW
    with forced-unique vertices and no error-based early stop.
    """
    if req.pca_dim is not None:
        return pca_select(req, pool)
    if req.query.shape[0] != pool.dim:
        raise ContractError(f"query has dimension {req.query.shape[0]}, pool has {pool.dim}")
    return _run(req.query, pool, req)


@dataclass(frozen=True)
class PCAProjection:
    mean: np.ndarray
    components: np.ndarray  # (d', d); rows beyond the data rank are zero

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) @ self.components.T


def fit_pca(X, n_components: int) -> PCAProjection:
    """Top principal directions of the rows of ``X`` via SVD.

    Each direction is signed so its largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    _, _, vt = np.linalg.svd(X - mean, full_matrices=False)
    comps = np.zeros((n_components, X.shape[1]))
    k = min(n_components, vt.shape[0])
    comps[:k] = vt[:k]
    for row in comps[:k]:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PCAProjection(mean, comps)


def pca_select(req: SelectionRequest, pool: CandidatePool) -> SelectionResult:
    """Select in a PCA subspace fitted on the pool plus the query.

    The selected indices are identical in both spaces, so the support maps
    straight back to the original pool. Metrics carry the errors measured
    in both spaces (``reduced_*`` and ``original_*``); ``fw_error`` and
    ``integer_error`` are the reduced-space values.
    """
    if req.pca_dim is None:
        raise ContractError("pca_select needs pca_dim")
    q = req.query
    if q.shape[0] != pool.dim:
        raise ContractError(f"query has dimension {q.shape[0]}, pool has {pool.dim}")
    if not 1 <= req.pca_dim <= pool.dim:
        raise ContractError(f"pca_dim must be in [1, {pool.dim}]")

    t0 = time.perf_counter()
    P = pool.as_float64()
    proj = fit_pca(np.vstack([P, q[None, :]]), req.pca_dim)
    reduced_pool = CandidatePool(proj.transform(P), ids=pool.ids)
    reduced_q = proj.transform(q)
    t1 = time.perf_counter()

    inner = replace(req, query=reduced_q, pca_dim=None)
    res = _run(reduced_q, reduced_pool, inner)

    metrics = dict(res.metrics)
    metrics["reduced_fw_error"] = res.metrics["fw_error"]
    metrics["reduced_integer_error"] = res.metrics["integer_error"]
    metrics["original_fw_error"] = reconstruction_error(q, pool, res.fractional)
    metrics["original_integer_error"] = None
    if res.multiset is not None:
        metrics["original_integer_error"] = reconstruction_error(
            q, pool, res.multiset.empirical_weights(pool.size)
        )
    metrics["pca_dim"] = req.pca_dim
    timings = dict(res.timings, pca=t1 - t0)
    return replace(res, metrics=metrics, timings=timings)
