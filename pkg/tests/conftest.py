import numpy as np
import pytest

from convclust.points import PointMatrix, SPATIAL, VECTOR, scale_to_range


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def vector_matrix(values, scaled=False):
    """Wrap raw values as a vector-mode PointMatrix (optionally scaled)."""
    values = np.asarray(values, dtype=np.float64)
    pm = PointMatrix(values=values, mode=VECTOR, origin_shape=tuple(values.shape))
    return scale_to_range(pm) if scaled else pm


def spatial_matrix(values, origin_shape):
    values = np.asarray(values, dtype=np.float64)
    return PointMatrix(values=values, mode=SPATIAL, origin_shape=tuple(origin_shape))
