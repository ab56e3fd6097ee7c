import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def make_blobs(n_per_class, n_classes, dim, separation, seed):
    """Gaussian blobs with unit noise and class means on scaled axes."""
    rng = np.random.default_rng(seed)
    means = np.zeros((n_classes, dim))
    for c in range(n_classes):
        means[c, c] = separation
    X = np.vstack([means[c] + rng.standard_normal((n_per_class, dim)) for c in range(n_classes)])
    y = np.repeat(np.arange(n_classes), n_per_class)
    return X, y


@pytest.fixture
def blobs():
    return make_blobs
