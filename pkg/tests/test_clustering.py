import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cofib.clustering import ClusterModel, assign, kmeans


def brute_nearest(centroids, v):
    return int(np.argmin([np.sum((c - v) ** 2) for c in centroids]))


def test_k1_is_mean():
    x = np.random.default_rng(0).normal(size=(50, 4))
    m = kmeans(x, 1, seed=0)
    np.testing.assert_allclose(m.centroids[0], x.mean(0), atol=1e-12)
    assert np.all(m.assignments == 0)


def test_k_equals_distinct():
    x = np.repeat(np.eye(4), 3, axis=0)
    m = kmeans(x, 4, seed=1)
    assert np.allclose(m.centroids[m.assignments], x)


def test_two_blobs():
    rng = np.random.default_rng(2)
    for trial in range(100):
        a = rng.normal(0, 1, (40, 3))
        b = rng.normal(0, 1, (40, 3)) + [10, 0, 0]
        x = np.vstack([a, b])
        m = kmeans(x, 2, seed=trial)
        labels = m.assignments
        assert len(set(labels[:40])) == 1 and len(set(labels[40:])) == 1
        assert labels[0] != labels[40]


def test_too_few_vectors():
    with pytest.raises(ValueError):
        kmeans(np.zeros((2, 3)), 3)
    with pytest.raises(ValueError):
        kmeans(np.zeros((5, 3)), 2)  # a single distinct vector


def test_deterministic():
    x = np.random.default_rng(3).normal(size=(300, 5))
    a, b = kmeans(x, 4, seed=9), kmeans(x, 4, seed=9)
    assert np.array_equal(a.centroids, b.centroids)
    assert np.array_equal(a.assignments, b.assignments)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_kmeans_properties(seed, k):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(60, 3)) * rng.uniform(0.1, 3, size=3)
    m = kmeans(x, k, seed=seed)
    assert np.all(m.sizes() > 0)
    d = ((x[:, None, :] - m.centroids[None]) ** 2).sum(2)
    assert np.all(d[np.arange(len(x)), m.assignments] <= d.min(1) + 1e-9)
    h = np.array(m.inertia_history)
    assert np.all(np.diff(h) <= 1e-9 * max(1.0, h[0]))


def test_assign():
    m = ClusterModel(np.array([[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]]), np.array([0, 1, 2]))
    assert assign(m, [5.0, 5.0]) == 2
    assert assign(m, [1.0, 0.0]) == 0  # equidistant from 0 and 1
    with pytest.raises(ValueError):
        assign(m, [1.0, 2.0, 3.0])
    rng = np.random.default_rng(4)
    for _ in range(200):
        v = rng.normal(size=2) * 4
        assert assign(m, v) == brute_nearest(m.centroids, v)
