"""Bayesian matching pursuit under a Bernoulli-Gaussian prior with per-atom activity probabilities.

Model for one signal ``y`` (length R) and dictionary ``D`` (R x M)::

    s_i ~ Bernoulli(lambda_i)            (atom i active)
    x_S ~ N(0, coeff_variance * I)       (coefficients of the active atoms)
    y   = D_S x_S + N(0, noise_variance * I)

The score of a support ``S`` is log p(y | S) + log p(S). The solver grows a
beam of supports one atom at a time, scoring every one-atom extension in
closed form (Schur complement updates of the ridge Gram inverse), and stops
as soon as no extension beats the best support found so far.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .dictlearn import Dictionary

# priors of exactly 1 would make every support lacking the atom impossible
LAMBDA_MAX = 1.0 - 1e-9
_HASH_KEYS = np.random.default_rng(0x5EED).integers(1, 2**63, size=4096, dtype=np.uint64)


@dataclass(frozen=True)
class ActivityPrior:
    lam: np.ndarray
    coeff_variance: float
    noise_variance: float

    def __post_init__(self):
        lam = np.array(self.lam, dtype=np.float64)
        if lam.ndim != 1 or np.any(~np.isfinite(lam)) or np.any((lam < 0) | (lam > 1)):
            raise ValueError("lambda entries must lie in [0, 1]")
        if not (self.coeff_variance > 0 and self.noise_variance > 0):
            raise ValueError("coeff_variance and noise_variance must be positive")
        object.__setattr__(self, "lam", lam)

    @classmethod
    def uniform(cls, num_atoms: int, value: float, coeff_variance: float,
                noise_variance: float) -> ActivityPrior:
        return cls(np.full(num_atoms, value), coeff_variance, noise_variance)


@dataclass(frozen=True)
class SparseSolution:
    coeffs: np.ndarray
    posterior_lambda: np.ndarray
    log_evidence: float

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.coeffs)


@dataclass(frozen=True)
class SparseBatch:
    """Solutions for a batch of signals, stored row-wise.

    Behaves as a sequence of :class:`SparseSolution`.
    """

    coeffs: np.ndarray
    posterior_lambda: np.ndarray
    log_evidence: np.ndarray

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, i: int) -> SparseSolution:
        return SparseSolution(self.coeffs[i], self.posterior_lambda[i], float(self.log_evidence[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def _clip_lambda(lam: np.ndarray) -> np.ndarray:
    return np.clip(lam, 0.0, LAMBDA_MAX)


def support_log_posterior(D: np.ndarray, y: np.ndarray, support, lam: np.ndarray,
                          coeff_variance: float, noise_variance: float) -> float:
    """Unnormalized log p(y, S) evaluated directly from the marginal covariance of y."""
    S = list(support)
    lam = _clip_lambda(np.asarray(lam, dtype=np.float64))
    active = np.zeros(len(lam), dtype=bool)
    active[S] = True
    if np.any(lam[active] == 0):
        return -math.inf
    with np.errstate(divide="ignore"):
        log_prior = np.log(lam[active]).sum() + np.log1p(-lam[~active]).sum()
    Ds = D[:, S]
    cov = noise_variance * np.eye(len(y)) + coeff_variance * Ds @ Ds.T
    _, logdet = np.linalg.slogdet(cov)
    quad = y @ np.linalg.solve(cov, y)
    return float(-0.5 * (quad + logdet + len(y) * math.log(2 * math.pi)) + log_prior)


def support_posterior_exhaustive(d: Dictionary, signal, prior: ActivityPrior,
                                 max_support: int) -> tuple[np.ndarray, tuple[int, ...]]:
    """Exact activity marginals and MAP support by enumerating every support of size <= max_support.

    Limited to M <= 16 atoms and max_support <= 4.
    """
    D = d.atoms
    M = d.num_atoms
    y = np.asarray(signal, dtype=np.float64)
    if M > 16 or max_support > 4:
        raise ValueError("enumeration bound exceeded (M <= 16, max_support <= 4)")
    if y.shape != (d.atom_dim,) or prior.lam.shape != (M,):
        raise ValueError("dimension mismatch")
    supports, scores = [], []
    for k in range(max_support + 1):
        for S in itertools.combinations(range(M), k):
            supports.append(S)
            scores.append(support_log_posterior(D, y, S, prior.lam, prior.coeff_variance,
                                                prior.noise_variance))
    scores = np.array(scores)
    weights = np.exp(scores - logsumexp(scores))
    post = np.zeros(M)
    for S, w in zip(supports, weights):
        post[list(S)] += w
    return np.clip(post, 0.0, 1.0), supports[int(np.argmax(scores))]


def _top_unique(scores: np.ndarray, hashes: np.ndarray, width: int):
    """Per row, positions of the ``width`` best finite candidates with distinct hashes."""
    P, C = scores.shape
    take = min(C, width * width)
    order = np.argsort(-scores, axis=1, kind="stable")[:, :take]
    s = np.take_along_axis(scores, order, axis=1)
    h = np.take_along_axis(hashes, order, axis=1)
    earlier = np.tril(np.ones((take, take), dtype=bool), k=-1)
    dup = ((h[:, :, None] == h[:, None, :]) & earlier).any(axis=2)
    keep = np.isfinite(s) & ~dup
    first = np.argsort(~keep, axis=1, kind="stable")[:, :width]
    pos = np.take_along_axis(order, first, axis=1)
    return pos, np.take_along_axis(keep, first, axis=1)


def _blank(P, B, tail=(), dtype=np.float64):
    return np.zeros((P, B) + tail, dtype=dtype)


def _bmp_chunk(D, G, Y, lam, coeff_var, noise_var, K, B):
    P, R = Y.shape
    M = D.shape[1]
    rows = np.arange(P)
    lam = _clip_lambda(lam)
    with np.errstate(divide="ignore"):
        logit = np.log(lam) - np.log1p(-lam)
        base = np.log1p(-lam).sum(1)
    rho = noise_var / coeff_var
    log_rho = np.log(rho)
    beta = Y @ D
    yy = (Y * Y).sum(1)
    keys = _HASH_KEYS[:M]
    gdiag = np.diag(G)

    score0 = -0.5 * yy / noise_var
    best = score0.copy()
    best_sup = np.zeros((P, K), dtype=np.int64)
    best_k = np.zeros(P, dtype=np.int64)
    levels = []  # (scores (P, B), supports (P, B, k))

    sup = np.zeros((P, 1, 0), dtype=np.int64)
    ainv = np.zeros((P, 1, 0, 0))
    bs = np.zeros((P, 1, 0))
    q = np.zeros((P, 1))
    ld = np.zeros((P, 1))
    lp = np.zeros((P, 1))
    hsh = np.zeros((P, 1), dtype=np.uint64)
    valid = np.ones((P, 1), dtype=bool)
    live = np.isfinite(logit).any(1)

    for k in range(K):
        act = np.flatnonzero(live)
        if len(act) == 0:
            break
        nb = sup.shape[1]
        S = sup[act]
        a = G[S]  # (A, nb, k, M)
        W = ainv[act] @ a
        s = np.maximum(gdiag + rho[act, None, None] - (a * W).sum(2), 1e-12 * rho[act, None, None])
        r = beta[act, None, :] - np.einsum("abkm,abk->abm", W, bs[act])
        qn = q[act, :, None] + r * r / s
        ldn = ld[act, :, None] + np.log(s)
        cand = (-0.5 * (yy[act, None, None] - qn) / noise_var[act, None, None] - 0.5 * ldn
                + 0.5 * (k + 1) * log_rho[act, None, None] + lp[act, :, None] + logit[act, None, :])
        chosen = np.zeros(cand.shape, dtype=bool)
        if k:
            np.put_along_axis(chosen, S, True, axis=2)
        cand = np.where(chosen | ~valid[act, :, None], -np.inf, cand)

        flat = cand.reshape(len(act), nb * M)
        hflat = (hsh[act, :, None] ^ keys[None, None, :]).reshape(len(act), nb * M)
        pos, ok = _top_unique(flat, hflat, B)
        top = np.take_along_axis(flat, pos, axis=1)
        top = np.where(ok, top, -np.inf)
        improved = top[:, 0] > best[act]
        live[act[~improved]] = False
        if not improved.any():
            break
        sel = act[improved]
        pos, ok, top = pos[improved], ok[improved], top[improved]
        parent, atom = pos // M, pos % M
        ii = np.flatnonzero(improved)[:, None]

        w = np.take_along_axis(W[ii[:, 0]], parent[:, :, None, None], axis=1)  # (n, B, k, M)
        w = np.take_along_axis(w, atom[:, :, None, None], axis=3)[..., 0]  # (n, B, k)
        sv = s[ii, parent, atom]
        old = ainv[sel[:, None], parent]
        new = np.zeros((len(sel), B, k + 1, k + 1))
        new[:, :, :k, :k] = old + w[..., :, None] * w[..., None, :] / sv[..., None, None]
        new[:, :, :k, k] = -w / sv[..., None]
        new[:, :, k, :k] = -w / sv[..., None]
        new[:, :, k, k] = 1.0 / sv

        n_sup = np.concatenate([sup[sel[:, None], parent], atom[..., None]], axis=2)
        n_bs = np.concatenate([bs[sel[:, None], parent], beta[sel[:, None], atom][..., None]], axis=2)

        sup_next = _blank(P, B, (k + 1,), np.int64)
        ainv_next = _blank(P, B, (k + 1, k + 1))
        bs_next = _blank(P, B, (k + 1,))
        q_next, ld_next, lp_next = _blank(P, B), _blank(P, B), _blank(P, B)
        h_next = _blank(P, B, (), np.uint64)
        valid_next = _blank(P, B, (), bool)

        sup_next[sel], ainv_next[sel], bs_next[sel] = n_sup, new, n_bs
        q_next[sel] = qn[ii, parent, atom]
        ld_next[sel] = ldn[ii, parent, atom]
        lp_next[sel] = lp[sel[:, None], parent] + logit[sel[:, None], atom]
        h_next[sel] = hsh[sel[:, None], parent] ^ keys[atom]
        valid_next[sel] = ok
        sup, ainv, bs, q, ld, lp, hsh, valid = (sup_next, ainv_next, bs_next, q_next, ld_next,
                                                 lp_next, h_next, valid_next)

        lvl = np.full((P, B), -np.inf)
        lvl[sel] = top
        levels.append((lvl, sup.copy()))
        best[sel] = top[:, 0]
        best_sup[sel, :k + 1] = n_sup[:, 0]
        best_k[sel] = k + 1

    # activity marginals over every support kept in the beam
    all_scores = np.concatenate([score0[:, None]] + [lv for lv, _ in levels], axis=1)
    norm = logsumexp(all_scores, axis=1)
    post = np.zeros((P, M))
    for lv, sp in levels:
        w = np.exp(lv - norm[:, None])
        for c in range(sp.shape[2]):
            np.add.at(post, (rows[:, None].repeat(sp.shape[1], 1), sp[:, :, c]), w)
    post = np.clip(post, 0.0, 1.0)

    coeffs = np.zeros((P, M))
    for k in range(1, K + 1):
        idx = np.flatnonzero(best_k == k)
        if len(idx) == 0:
            continue
        S = best_sup[idx, :k]
        gram = G[S[:, :, None], S[:, None, :]] + rho[idx, None, None] * np.eye(k)
        rhs = np.take_along_axis(beta[idx], S, axis=1)
        coeffs[idx[:, None], S] = np.linalg.solve(gram, rhs[..., None])[..., 0]

    const = -0.5 * R * np.log(2 * np.pi * noise_var) + base
    return coeffs, post, best + const


def bmp_batch(d: Dictionary, signals, lam, coeff_variance, noise_variance,
              max_support: int = 8, beam_width: int = 4, chunk: int = 1024) -> SparseBatch:
    """Run the beam search for every row of ``signals``.

    ``lam`` is (N, M) or (M,); the variances are scalars or length-N arrays.
    Rows whose prior is all zero get the empty support.
    """
    D = d.atoms
    R, M = D.shape
    Y = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    N = len(Y)
    if Y.shape[1] != R:
        raise ValueError(f"signal length {Y.shape[1]} does not match atom dimension {R}")
    if not 1 <= max_support <= R:
        raise ValueError(f"max_support must lie in [1, {R}]")
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    if M > len(_HASH_KEYS):
        raise ValueError(f"at most {len(_HASH_KEYS)} atoms supported")
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (N, M))
    cv = np.broadcast_to(np.asarray(coeff_variance, dtype=np.float64), (N,))
    nv = np.broadcast_to(np.asarray(noise_variance, dtype=np.float64), (N,))
    if np.any(cv <= 0) or np.any(nv <= 0):
        raise ValueError("variances must be positive")
    G = D.T @ D
    coeffs = np.zeros((N, M))
    post = np.zeros((N, M))
    logev = np.zeros(N)
    for s in range(0, N, chunk):
        sl = slice(s, s + chunk)
        coeffs[sl], post[sl], logev[sl] = _bmp_chunk(D, G, Y[sl], lam[sl], cv[sl], nv[sl],
                                                     max_support, beam_width)
    return SparseBatch(coeffs, post, logev)


def bmp_estimate(d: Dictionary, signal, prior: ActivityPrior, max_support: int = 8,
                 beam_width: int = 4) -> SparseSolution:
    """Sparse estimate of one signal with per-atom activity posteriors."""
    y = np.asarray(signal, dtype=np.float64)
    if y.shape != (d.atom_dim,) or prior.lam.shape != (d.num_atoms,):
        raise ValueError("dimension mismatch between signal, prior and dictionary")
    if not np.any(prior.lam > 0):
        raise ValueError("at least one activity probability must be positive")
    batch = bmp_batch(d, y[None, :], prior.lam, prior.coeff_variance, prior.noise_variance,
                      max_support, beam_width)
    return batch[0]
