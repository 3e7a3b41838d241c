import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hullft import CandidatePool, ContractError, SimplexWeights, normalize_rows, reconstruction_error


def test_reconstruction_error_examples(midpoint):
    _, pool = midpoint
    assert reconstruction_error([1, 0], pool, SimplexWeights.vertex(0, 2)) == 0.0
    assert reconstruction_error([0.5, 0.5], pool, SimplexWeights.vertex(0, 2)) == 0.5
    assert reconstruction_error([0.5, 0.5], pool, SimplexWeights((0, 1), (0.5, 0.5), 2)) == 0.0


def test_reconstruction_error_contract(midpoint):
    _, pool = midpoint
    with pytest.raises(ContractError):
        reconstruction_error([1, 0, 0], pool, SimplexWeights.vertex(0, 2))
    with pytest.raises(ContractError):
        reconstruction_error([1, 0], pool, SimplexWeights.vertex(2, 3))
    with pytest.raises(ContractError):
        SimplexWeights.vertex(2, 2)


@pytest.mark.parametrize(
    "indices, values",
    [((0, 1), (0.5, 0.6)), ((0,), (0.0,)), ((1, 0), (0.5, 0.5)), ((), ())],
)
def test_simplex_weights_rejects_invalid(indices, values):
    with pytest.raises(ContractError):
        SimplexWeights(indices, values, 3)


def test_pool_rejects_duplicates_and_nonfinite():
    with pytest.raises(ContractError):
        CandidatePool(np.eye(2), ids=["a", "a"])
    with pytest.raises(ContractError):
        CandidatePool(np.array([[np.nan, 0.0]]))
    with pytest.raises(ContractError):
        CandidatePool(np.zeros((0, 3)))


def test_pool_is_immutable_copy():
    x = np.eye(2)
    pool = CandidatePool(x)
    x[0, 0] = 7.0
    assert pool.vectors[0, 0] == 1.0
    with pytest.raises(ValueError):
        pool.vectors[0, 0] = 3.0


def test_normalize_rows():
    pool = normalize_rows(CandidatePool(np.array([[3.0, 4.0], [1.0, 0.0]]), ids=["x", "y"]))
    assert np.allclose(pool.vectors, [[0.6, 0.8], [1.0, 0.0]], atol=1e-15)
    assert pool.ids == ("x", "y")
    assert np.all(np.abs(np.linalg.norm(pool.vectors, axis=1) - 1) <= 1e-12)


def test_normalize_rows_zero_vector_names_index():
    with pytest.raises(ContractError, match="index 1"):
        normalize_rows(CandidatePool(np.array([[1.0, 0.0], [0.0, 0.0]])))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-100, 100))
def test_translation_invariance(seed, shift):
    rng = np.random.default_rng(seed)
    K, d = rng.integers(1, 8), rng.integers(1, 6)
    P = rng.standard_normal((K, d))
    q = rng.standard_normal(d)
    w = SimplexWeights.from_dense(rng.dirichlet(np.ones(K)), renormalize=True)
    t = shift * rng.standard_normal(d)
    a = reconstruction_error(q, CandidatePool(P), w)
    b = reconstruction_error(q + t, CandidatePool(P + t), w)
    assert a >= 0
    assert abs(a - b) <= 1e-9 * max(1.0, abs(shift)) ** 2
