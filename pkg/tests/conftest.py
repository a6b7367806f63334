"""
Shared fixtures: seeded generators and small multi-view datasets.
"""

import numpy as np
import pytest

from kafuse.core.config import OuterConfig, SolverConfig, SyntheticSpec
from kafuse.core.dataset import MultiViewDataset, ViewMatrix, normalize, synth_generate


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_dataset(rng):
    """Two views, n=8, two balanced classes."""
    views = [
        ViewMatrix(data=rng.standard_normal((4, 8)), view_name="a"),
        ViewMatrix(data=rng.standard_normal((3, 8)), view_name="b"),
    ]
    labels = np.array([1, 2, 1, 2, 1, 2, 1, 2])
    return MultiViewDataset(views=views, labels=labels, name="tiny")


@pytest.fixture
def small_spec():
    return SyntheticSpec(n=24, classes=3, views=2, informative=3, duplicates=2,
                         nonlinear=2, noise=2, seed=3)


@pytest.fixture
def small_synth(small_spec):
    return normalize(synth_generate(small_spec), 'minmax')


@pytest.fixture
def quick_config():
    return SolverConfig(k=4, outer=OuterConfig(tol=1e-6, max_iter=5), seed=1)


def project_simplex(v):
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ind = np.arange(1, len(v) + 1)
    rho = np.nonzero(u * ind > (css - 1.0))[0][-1]
    tau = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


@pytest.fixture
def simplex_projection():
    return project_simplex
