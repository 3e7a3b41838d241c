import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def midpoint():
    from hullft import CandidatePool

    return np.array([0.5, 0.5]), CandidatePool(np.eye(2))


def random_hull_instance(rng, max_k=6, max_d=3):
    """Random pool (K x d) with a query drawn inside its convex hull."""
    K = int(rng.integers(1, max_k + 1))
    d = int(rng.integers(1, max_d + 1))
    P = rng.standard_normal((K, d))
    q = rng.dirichlet(np.ones(K)) @ P
    return q, P
