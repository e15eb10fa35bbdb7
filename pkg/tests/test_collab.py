import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cofib.collab import (
    collab_weights,
    denoise_cluster,
    nearest_patches,
    neighbor_table,
    update_lambda,
)
from cofib.dictlearn import Dictionary
from cofib.pipeline import DenoiseConfig
from cofib.sparsebayes import bmp_batch


def test_nearest_boundary():
    x = np.random.default_rng(0).normal(size=(5, 3))
    idx, dist = nearest_patches(x, 2, 1)
    assert len(idx) == 0 and len(dist) == 0
    with pytest.raises(ValueError):
        nearest_patches(x, 0, 6)


def test_nearest_picks_closest():
    x = np.array([[0.0, 0.0], [0.5, 0.0], [2.0, 0.0]])
    idx, dist = nearest_patches(x, 0, 2)
    assert idx.tolist() == [1] and dist.tolist() == [0.5]


def test_nearest_ties_to_lower_index():
    x = np.array([[0.0], [1.0], [-1.0], [1.0]])
    idx, _ = nearest_patches(x, 0, 3)
    assert idx.tolist() == [1, 2]


def test_nearest_matches_brute_force():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(50, 6))
    for p in range(50):
        idx, dist = nearest_patches(x, p, 10)
        d = np.sqrt(((x - x[p]) ** 2).sum(1))
        brute = sorted((d[j], j) for j in range(50) if j != p)[:9]
        assert idx.tolist() == [j for _, j in brute]
        np.testing.assert_allclose(dist, [v for v, _ in brute])


def test_neighbor_table_matches_single_query():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(70, 4))
    x[10] = x[3]  # a duplicate
    idx, dist = neighbor_table(x, 6, chunk=16)
    for p in range(70):
        i1, d1 = nearest_patches(x, p, 6)
        assert idx[p].tolist() == i1.tolist()
        np.testing.assert_allclose(dist[p], d1, atol=1e-12)


def test_weights_hand_case():
    np.testing.assert_allclose(collab_weights([1.0, 2.0]), [1 / 3, 1 / 6, 0.5], atol=1e-12)
    np.testing.assert_allclose(collab_weights([0.7, 0.7]), [0.25, 0.25, 0.5], atol=1e-12)
    np.testing.assert_array_equal(collab_weights([]), [1.0])


def test_weights_zero_distance_floor():
    w = collab_weights([0.0, 1.0])
    assert np.all(np.isfinite(w))
    assert w[0] > w[1]
    assert w.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(0, 100)))
def test_weight_properties(d):
    w = collab_weights(d)
    assert w[-1] == 0.5
    assert abs(w.sum() - 1) <= 1e-12
    order = np.argsort(d, kind="stable")
    nbr = w[:-1][order]
    assert np.all(np.diff(nbr) <= 1e-15)


def test_update_lambda_hand_case():
    out = update_lambda([[0.4, 0.6]], [0.8, 0.2], [0.5, 0.5])
    np.testing.assert_allclose(out, [0.6, 0.4], atol=1e-12)


def test_update_lambda_fixed_point():
    lam = np.array([0.1, 0.7, 0.3])
    out = update_lambda([lam, lam, lam], lam, collab_weights([0.3, 1.0, 2.0]))
    np.testing.assert_allclose(out, lam, atol=1e-15)


def test_update_lambda_length_mismatch():
    with pytest.raises(ValueError):
        update_lambda([[0.1, 0.2]], [0.3, 0.4], [0.2, 0.3, 0.5])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 9), st.integers(1, 10))
def test_update_lambda_convex_and_permutation_invariant(seed, t1, m):
    rng = np.random.default_rng(seed)
    nbr = rng.uniform(0, 1, (t1, m))
    own = rng.uniform(0, 1, m)
    dist = rng.uniform(0, 5, t1)
    out = update_lambda(nbr, own, collab_weights(dist))
    stack = np.vstack([nbr, own])
    assert np.all(out >= stack.min(0) - 1e-12) and np.all(out <= stack.max(0) + 1e-12)
    perm = rng.permutation(t1)
    again = update_lambda(nbr[perm], own, collab_weights(dist[perm]))
    np.testing.assert_allclose(again, out, atol=1e-12)


def small_cfg(**kw):
    base = dict(patch_n=3, dict_atoms=12, max_support=3, collab_t=4, expected_sparsity=2)
    base.update(kw)
    return DenoiseConfig(**base)


def test_denoise_cluster_identical_patches():
    rng = np.random.default_rng(3)
    d = Dictionary.from_matrix(rng.standard_normal((9, 12)))
    x = np.tile(d.atoms[:, 4] / np.abs(d.atoms[:, 4]).max(), (8, 1))
    sols = denoise_cluster(x, d, np.full(8, 1e-6), small_cfg(), coeff_variance=1.0)
    supports = {tuple(s.support) for s in sols}
    assert supports == {(4,)}
    assert all(s.posterior_lambda[4] >= 0.99 for s in sols)


def test_denoise_cluster_without_collaboration_is_baseline():
    rng = np.random.default_rng(4)
    d = Dictionary.from_matrix(rng.standard_normal((9, 12)))
    x = rng.standard_normal((20, 9))
    nv = np.full(20, 0.05)
    base = bmp_batch(d, x, 2 / 12, 1.0, nv, 3, 4)
    for cfg in (small_cfg(collab_t=1), small_cfg(collab_rounds=0)):
        sols = denoise_cluster(x, d, nv, cfg, coeff_variance=1.0)
        np.testing.assert_array_equal(sols.coeffs, base.coeffs)


def test_denoise_cluster_collaboration_runs():
    rng = np.random.default_rng(5)
    d = Dictionary.from_matrix(rng.standard_normal((9, 12)))
    x = rng.standard_normal((30, 9))
    sols = denoise_cluster(x, d, np.full(30, 0.05), small_cfg(collab_rounds=2))
    assert len(sols) == 30
    assert np.all((sols.posterior_lambda >= 0) & (sols.posterior_lambda <= 1))
