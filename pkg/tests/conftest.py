import numpy as np
import pytest

from dissolvegp import DissolutionDataset, LsgpHyperparams


@pytest.fixture
def make_dataset():
    def _make(values, times=None, label="R"):
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if times is None:
            times = np.arange(1.0, values.shape[1] + 1.0)
        ids = tuple(f"u{i}" for i in range(values.shape[0]))
        return DissolutionDataset(label, np.asarray(times, float), values, ids)

    return _make


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_hyperparams(rng, tau2_range=(1e-6, 1e-2)):
    """Random but numerically tame hyperparameters for property tests."""
    return LsgpHyperparams(
        alpha1=rng.uniform(40.0, 120.0),
        alpha2=rng.uniform(5.0, 150.0),
        beta=rng.uniform(0.05, 0.6),
        tau2=np.exp(rng.uniform(np.log(tau2_range[0]), np.log(tau2_range[1]))),
        a=rng.uniform(-2.0, 2.0),
        b=rng.uniform(-0.05, 0.05),
    )


def random_grid(rng, max_p=12, lo=1.0, hi=90.0):
    p = rng.integers(2, max_p + 1)
    pts = np.sort(rng.uniform(lo, hi, size=p))
    while np.any(np.diff(pts) < 1e-3):
        pts = np.sort(rng.uniform(lo, hi, size=p))
    return pts
