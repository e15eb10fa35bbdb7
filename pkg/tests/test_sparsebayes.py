import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cofib.dictlearn import Dictionary, omp
from cofib.sparsebayes import (
    ActivityPrior,
    bmp_batch,
    bmp_estimate,
    support_log_posterior,
    support_posterior_exhaustive,
)


def instance(rng, r=5, m=8, max_true=2, snr_db=20.0):
    d = Dictionary.from_matrix(rng.standard_normal((r, m)))
    k = int(rng.integers(1, max_true + 1))
    x = np.zeros(m)
    x[rng.choice(m, k, replace=False)] = rng.standard_normal(k)
    clean = d.atoms @ x
    nv = float(np.mean(clean ** 2)) / 10 ** (snr_db / 10)
    y = clean + rng.standard_normal(r) * np.sqrt(nv)
    return d, y, nv


def test_noiseless_single_atom():
    rng = np.random.default_rng(0)
    d = Dictionary.from_matrix(rng.standard_normal((6, 10)))
    y = 2 * d.atoms[:, 3]
    prior = ActivityPrior.uniform(10, 0.1, 1.0, 1e-6)
    sol = bmp_estimate(d, y, prior, max_support=3)
    assert sol.support.tolist() == [3]
    assert sol.coeffs[3] == pytest.approx(2.0, rel=1e-5)
    assert sol.posterior_lambda[3] >= 0.99
    post, map_support = support_posterior_exhaustive(d, y, prior, 3)
    assert map_support == (3,) and post[3] >= 0.99


def test_prior_restricts_support():
    rng = np.random.default_rng(1)
    d = Dictionary.from_matrix(rng.standard_normal((6, 10)))
    lam = np.zeros(10)
    lam[5] = 0.3
    sol = bmp_estimate(d, rng.standard_normal(6), ActivityPrior(lam, 1.0, 0.01), 4)
    assert set(sol.support) <= {5}
    assert np.all(sol.posterior_lambda[lam == 0] == 0)


def test_errors():
    d = Dictionary.from_matrix(np.random.default_rng(2).standard_normal((4, 6)))
    with pytest.raises(ValueError):
        bmp_estimate(d, np.ones(4), ActivityPrior(np.zeros(6), 1.0, 1.0), 2)
    with pytest.raises(ValueError):
        bmp_estimate(d, np.ones(3), ActivityPrior.uniform(6, 0.1, 1.0, 1.0), 2)
    with pytest.raises(ValueError):
        ActivityPrior(np.full(6, 1.5), 1.0, 1.0)
    with pytest.raises(ValueError):
        ActivityPrior(np.full(6, 0.5), 0.0, 1.0)
    with pytest.raises(ValueError):
        support_posterior_exhaustive(Dictionary.from_matrix(np.ones((4, 17)) + np.eye(4, 17)), np.ones(4),
                                     ActivityPrior.uniform(17, 0.1, 1.0, 1.0), 2)


def test_exhaustive_two_orthonormal_atoms():
    d = Dictionary(np.eye(3)[:, :2])
    prior = ActivityPrior.uniform(2, 0.2, 1.0, 1e-6)
    post, map_support = support_posterior_exhaustive(d, np.array([1.0, 0.0, 0.0]), prior, 2)
    assert map_support == (0,)
    assert post[0] == pytest.approx(1.0, abs=1e-9)
    # the unused atom is not pulled above its prior level
    assert post[1] <= 0.2


def test_exhaustive_null_signal():
    d = Dictionary.from_matrix(np.random.default_rng(3).standard_normal((4, 6)))
    _, map_support = support_posterior_exhaustive(d, np.zeros(4), ActivityPrior.uniform(6, 0.01, 1.0, 0.1), 3)
    assert map_support == ()


def test_exhaustive_normalization():
    rng = np.random.default_rng(4)
    d, y, nv = instance(rng)
    prior = ActivityPrior.uniform(8, 0.2, 1.0, nv)
    scores = [support_log_posterior(d.atoms, y, S, prior.lam, 1.0, nv)
              for k in range(4) for S in itertools.combinations(range(8), k)]
    w = np.exp(np.array(scores) - max(scores))
    w /= w.sum()
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    post, _ = support_posterior_exhaustive(d, y, prior, 3)
    assert np.all((post >= 0) & (post <= 1))


def test_log_evidence_matches_direct_formula():
    rng = np.random.default_rng(5)
    for _ in range(20):
        d, y, nv = instance(rng)
        prior = ActivityPrior(rng.uniform(0.05, 0.6, 8), 1.0, nv)
        sol = bmp_estimate(d, y, prior, 3)
        direct = support_log_posterior(d.atoms, y, sol.support, prior.lam, 1.0, nv)
        assert sol.log_evidence == pytest.approx(direct, rel=1e-8, abs=1e-8)


def test_coefficients_are_ridge_solution():
    rng = np.random.default_rng(6)
    d, y, nv = instance(rng)
    cv = 2.0
    sol = bmp_estimate(d, y, ActivityPrior.uniform(8, 0.25, cv, nv), 3)
    S = sol.support
    Ds = d.atoms[:, S]
    ridge = np.linalg.solve(Ds.T @ Ds + nv / cv * np.eye(len(S)), Ds.T @ y)
    np.testing.assert_allclose(sol.coeffs[S], ridge, rtol=1e-9)


def test_oracle_agreement_rate():
    rng = np.random.default_rng(7)
    agree = 0
    for _ in range(200):
        d, y, nv = instance(rng)
        prior = ActivityPrior.uniform(8, 0.25, 1.0, nv)
        sol = bmp_estimate(d, y, prior, 3, beam_width=4)
        _, map_support = support_posterior_exhaustive(d, y, prior, 3)
        agree += set(sol.support) == set(map_support)
    assert agree / 200 >= 0.95


def test_first_atom_matches_omp_in_low_noise_limit():
    rng = np.random.default_rng(8)
    for _ in range(50):
        d = Dictionary.from_matrix(rng.standard_normal((6, 12)))
        y = rng.standard_normal(6)
        sol = bmp_estimate(d, y, ActivityPrior.uniform(12, 0.2, 1.0, 1e-10), 1, beam_width=1)
        assert sol.support.tolist() == np.flatnonzero(omp(d, y, 1)).tolist()


def test_batch_matches_single():
    rng = np.random.default_rng(9)
    d = Dictionary.from_matrix(rng.standard_normal((8, 16)))
    Y = rng.standard_normal((40, 8))
    lam = rng.uniform(0.0, 0.5, (40, 16))
    nv = rng.uniform(0.01, 0.2, 40)
    batch = bmp_batch(d, Y, lam, 1.5, nv, max_support=4, chunk=7)
    for i in range(40):
        one = bmp_estimate(d, Y[i], ActivityPrior(lam[i], 1.5, nv[i]), 4)
        np.testing.assert_allclose(batch[i].coeffs, one.coeffs, atol=1e-12)
        np.testing.assert_allclose(batch[i].posterior_lambda, one.posterior_lambda, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 7), st.floats(0.3, 0.95))
def test_raising_prior_keeps_atom_in_map(seed, i, boost):
    rng = np.random.default_rng(seed)
    d, y, nv = instance(rng)
    lam = rng.uniform(0.05, 0.3, 8)
    _, before = support_posterior_exhaustive(d, y, ActivityPrior(lam, 1.0, nv), 3)
    if i not in before:
        return
    raised = lam.copy()
    raised[i] = max(lam[i], boost)
    _, after = support_posterior_exhaustive(d, y, ActivityPrior(raised, 1.0, nv), 3)
    assert i in after


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_posterior_is_valid(seed):
    rng = np.random.default_rng(seed)
    d, y, nv = instance(rng, r=6, m=14)
    lam = rng.uniform(0, 1, 14)
    lam[rng.random(14) < 0.3] = 0.0
    if not lam.any():
        lam[0] = 0.5
    sol = bmp_estimate(d, y, ActivityPrior(lam, 1.0, nv), 4)
    assert np.all((sol.posterior_lambda >= 0) & (sol.posterior_lambda <= 1))
    assert np.all(sol.posterior_lambda[lam == 0] == 0)
    assert not set(sol.support) & set(np.flatnonzero(lam == 0))
