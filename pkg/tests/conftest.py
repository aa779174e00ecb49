import numpy as np
import pytest

from vesselacs import imaging, sampling
from vesselacs.sampling import SampleSet


def make_sample_set(X, y):
    n = len(y)
    return SampleSet(image_ids=["fix"] * n, coords=np.zeros((n, 2), dtype=int),
                     X=np.asarray(X, dtype=float), y=np.asarray(y, dtype=int))


def planted_samples(seed, n=200):
    """One class-determining feature (column 0), 13 noise features."""
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    X = rng.uniform(0.0, 1.0, (n, 14))
    X[:, 0] = y + rng.normal(0.0, 0.05, n)
    return make_sample_set(X, y)


def gaussian_samples(seed, n=200):
    """Two overlapping Gaussian classes, all features continuous."""
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    shift = rng.uniform(-1.0, 1.0, 14)
    X = rng.normal(0.0, 1.0, (n, 14)) + y[:, None] * shift[None, :]
    return make_sample_set(X, y)


@pytest.fixture(scope="session")
def synth_entry():
    return imaging.synth_retina(1, 128, 128, 6)


@pytest.fixture(scope="session")
def synth_training_samples():
    train = [imaging.synth_retina(10 + i, 128, 128, 6) for i in range(5)]
    plan = sampling.SamplePlan(seed=0)
    return sampling.combine(sampling.stratified_sample(e, plan) for e in train)
