"""
Pool and weight containers plus the reconstruction-error primitive.

Embedding vectors are plain 1-D ``float64`` numpy arrays; ``as_vector``
validates them. A ``CandidatePool`` holds K such vectors row-major with
stable identifiers, and ``SimplexWeights`` is a sparse point of the
probability simplex over pool indices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractError

SIMPLEX_SUM_TOL = 1e-9


def as_vector(values, name="vector") -> np.ndarray:
    """Return ``values`` as a finite 1-D float64 array of length >= 1."""
    v = np.array(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ContractError(f"{name} must be a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ContractError(f"{name} has non-finite entries")
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class CandidatePool:
    """Immutable K x d matrix of embeddings with unique ids.

    ``vectors`` keeps whatever float precision it was built with (float32
    pools loaded from disk stay float32); every computation upcasts to
    float64.
    """

    vectors: np.ndarray
    ids: tuple = None
    unit_normalized: bool = False

    def __post_init__(self):
        vecs = np.asarray(self.vectors)
        if vecs.dtype not in (np.float32, np.float64):
            vecs = vecs.astype(np.float64)
        if vecs.ndim != 2 or vecs.shape[0] < 1 or vecs.shape[1] < 1:
            raise ContractError(f"pool must be a non-empty K x d matrix, got shape {vecs.shape}")
        if not np.all(np.isfinite(vecs)):
            raise ContractError("pool has non-finite entries")
        vecs = np.ascontiguousarray(vecs)
        if vecs is self.vectors or np.shares_memory(vecs, self.vectors):
            vecs = vecs.copy()
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)

        ids = tuple(range(vecs.shape[0])) if self.ids is None else tuple(self.ids)
        if len(ids) != vecs.shape[0]:
            raise ContractError(f"got {len(ids)} ids for {vecs.shape[0]} vectors")
        if len(set(ids)) != len(ids):
            raise ContractError("pool ids must be unique")
        object.__setattr__(self, "ids", ids)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.size

    def as_float64(self) -> np.ndarray:
        return np.asarray(self.vectors, dtype=np.float64)

    def subset(self, indices: Sequence[int]) -> "CandidatePool":
        """Rows ``indices`` (in that order) with their ids."""
        idx = np.asarray(indices, dtype=np.intp)
        return CandidatePool(
            self.vectors[idx],
            ids=[self.ids[i] for i in idx],
            unit_normalized=self.unit_normalized,
        )

    def __eq__(self, other):
        if not isinstance(other, CandidatePool):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.vectors.dtype == other.vectors.dtype
            and np.array_equal(self.vectors, other.vectors)
        )

    __hash__ = None


@dataclass(frozen=True)
class SimplexWeights:
    """Sparse simplex point: strictly positive ``values`` at sorted ``indices``."""

    indices: tuple
    values: tuple
    dimension: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        vals = tuple(float(x) for x in self.values)
        if len(idx) != len(vals):
            raise ContractError("indices and values must have equal length")
        if not idx:
            raise ContractError("simplex weights need at least one positive entry")
        if list(idx) != sorted(set(idx)):
            raise ContractError("indices must be distinct and ascending")
        if idx[0] < 0 or idx[-1] >= self.dimension:
            raise ContractError(f"index out of range for dimension {self.dimension}")
        if any(not (v > 0.0) or not np.isfinite(v) for v in vals):
            raise ContractError("stored weights must be finite and > 0")
        total = float(np.sum(vals))
        if abs(total - 1.0) > SIMPLEX_SUM_TOL:
            raise ContractError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_dense(cls, w, *, drop_below: float = 0.0, renormalize: bool = False) -> "SimplexWeights":
        """Build from a dense length-K vector, keeping entries ``> drop_below``."""
        w = np.asarray(w, dtype=np.float64)
        keep = np.flatnonzero(w > drop_below)
        vals = w[keep]
        if renormalize and keep.size:
            vals = vals / vals.sum()
        return cls(tuple(keep.tolist()), tuple(vals.tolist()), int(w.size))

    @classmethod
    def from_mapping(cls, entries: Mapping[int, float], dimension: int) -> "SimplexWeights":
        items = sorted((int(k), float(v)) for k, v in entries.items())
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items), dimension)

    @classmethod
    def vertex(cls, i: int, dimension: int) -> "SimplexWeights":
        return cls((int(i),), (1.0,), dimension)

    @property
    def support(self) -> tuple:
        return self.indices

    def as_dict(self) -> dict:
        return dict(zip(self.indices, self.values))

    def dense(self) -> np.ndarray:
        w = np.zeros(self.dimension)
        w[list(self.indices)] = self.values
        return w

    def __len__(self):
        return len(self.indices)


def _check_compatible(q, pool: CandidatePool, w: SimplexWeights):
    if q.shape[0] != pool.dim:
        raise ContractError(f"query has dimension {q.shape[0]}, pool has {pool.dim}")
    if w.dimension != pool.size:
        raise ContractError(f"weights are over {w.dimension} points, pool has {pool.size}")


def combination(pool: CandidatePool, w: SimplexWeights) -> np.ndarray:
    """The convex combination ``P w`` in float64."""
    idx = np.asarray(w.indices, dtype=np.intp)
    rows = np.asarray(pool.vectors[idx], dtype=np.float64)
    return np.asarray(w.values, dtype=np.float64) @ rows


def reconstruction_error(q, pool: CandidatePool, w: SimplexWeights) -> float:
    """Squared distance ``||q - P w||^2`` between the query and the weighted mean."""
    q = as_vector(q, "query")
    _check_compatible(q, pool, w)
    r = q - combination(pool, w)
    return float(np.sum(r * r))


def normalize_rows(pool: CandidatePool) -> CandidatePool:
    """Scale every row to unit l2 norm; ids are kept."""
    x = pool.as_float64()
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ContractError(f"cannot normalize zero vector at pool index {int(zero[0])} (id {pool.ids[zero[0]]!r})")
    return CandidatePool(x / norms[:, None], ids=pool.ids, unit_normalized=True)

