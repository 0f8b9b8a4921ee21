import numpy as np
import pytest

from mbsarah.data import Dataset, Example, SyntheticSpec, generate_synthetic, normalize_rows
from mbsarah.harness import compute_reference, default_reference_policy
from mbsarah.linalg import SparseVector
from mbsarah.objective import LogisticL2, RidgeL2

SYNTH_LAMBDA = 0.01


def make_dataset(X, y, name="toy"):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return Dataset(tuple(Example(SparseVector.from_dense(row), float(t)) for row, t in zip(X, y)),
                   X.shape[1], name)


def toy_logistic(n=6, d=3, lam=0.1, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = np.where(rng.standard_normal(n) > 0, 1.0, -1.0)
    return LogisticL2(make_dataset(X, y), lam)


def scalar_quadratic(curvature=1.0, y=0.0):
    """f(w) = curvature/2 * w^2 via ridge on the single example x = [1]."""
    return RidgeL2(make_dataset([[1.0]], [y]), curvature - 1.0)


@pytest.fixture
def toy():
    return toy_logistic()


@pytest.fixture(scope="session")
def synth_dataset():
    return normalize_rows(generate_synthetic(SyntheticSpec(n=1000, d=20, seed=0)))


@pytest.fixture(scope="session")
def synth_obj(synth_dataset):
    return LogisticL2(synth_dataset, SYNTH_LAMBDA)


@pytest.fixture(scope="session")
def synth_reference(synth_obj, tmp_path_factory):
    cache = tmp_path_factory.mktemp("reference_cache")
    return compute_reference(synth_obj, default_reference_policy(synth_obj.n, tolerance=1e-16), cache_dir=cache)
