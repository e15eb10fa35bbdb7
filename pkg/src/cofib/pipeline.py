"""End-to-end denoiser: patches -> clusters -> per-cluster dictionaries -> collaborative coding -> image."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import collab
from .clustering import count_distinct, kmeans
from .dictlearn import Dictionary, ksvd_train
from .imagekit import Image
from .patches import aggregate, denormalize, extract_patches

log = logging.getLogger(__name__)

ESTIMATE = "estimate"
# keeps the solver's noise model proper on noiseless inputs (intensity units, relative to range_max)
MIN_SIGMA_FRACTION = 1e-3


@dataclass
class DenoiseConfig:
    patch_n: int = 7
    clusters_k: int = 5
    collab_t: int = 10
    collab_rounds: int = 1
    dict_atoms: int | None = None
    ksvd_iters: int = 20
    ksvd_sparsity: int = 4
    max_support: int = 8
    beam_width: int = 4
    noise_sigma: float | str = ESTIMATE
    seed: int = 0
    train_sample_cap: int = 20000
    expected_sparsity: float = 4.0
    coeff_variance: float | None = None
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-4

    def __post_init__(self):
        if self.dict_atoms is None:
            self.dict_atoms = 2 * self.patch_n ** 2
        self.validate()

    def validate(self) -> None:
        if self.patch_n < 3 or self.patch_n % 2 == 0:
            raise ValueError("patch_n must be odd and >= 3")
        if self.clusters_k < 1 or self.collab_t < 1 or self.collab_rounds < 0:
            raise ValueError("clusters_k and collab_t must be >= 1, collab_rounds >= 0")
        if self.dict_atoms <= self.patch_n ** 2:
            raise ValueError("dict_atoms must exceed patch_n**2 (overcomplete)")
        if not 1 <= self.max_support <= self.patch_n ** 2:
            raise ValueError("max_support must lie in [1, patch_n**2]")
        if self.ksvd_iters < 1 or self.ksvd_sparsity < 1 or self.beam_width < 1:
            raise ValueError("ksvd_iters, ksvd_sparsity and beam_width must be >= 1")
        if self.train_sample_cap < self.dict_atoms:
            raise ValueError("train_sample_cap must be at least dict_atoms")
        if not self.expected_sparsity > 0:
            raise ValueError("expected_sparsity must be positive")
        if self.coeff_variance is not None and not self.coeff_variance > 0:
            raise ValueError("coeff_variance must be positive")
        if isinstance(self.noise_sigma, str):
            if self.noise_sigma != ESTIMATE:
                raise ValueError(f"noise_sigma must be a number or {ESTIMATE!r}")
        elif not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> DenoiseConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> DenoiseConfig:
        with open(path) as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class DenoiseReport:
    denoised: Image
    per_cluster_sizes: list
    wall_time_s: float
    config_echo: DenoiseConfig
    sigma: float = 0.0
    dictionaries: list = field(default_factory=list, repr=False)


def estimate_sigma(noisy: Image) -> float:
    """Noise sd from the median absolute finest-scale diagonal detail (MAD / 0.6745)."""
    p = noisy.pixels
    if min(p.shape) < 2:
        raise ValueError("image too small to estimate noise")
    hp = (p[:-1, :-1] - p[:-1, 1:] - p[1:, :-1] + p[1:, 1:]) / 2.0
    return float(np.median(np.abs(hp)) / 0.6745)


def _threads() -> int:
    env = os.environ.get("COFIB_THREADS")
    if env is None:
        return os.cpu_count() or 1
    try:
        n = int(env)
    except ValueError:
        n = 0
    if n < 1:
        raise ValueError(f"COFIB_THREADS must be a positive integer, got {env!r}")
    return n


def _training_set(vectors: np.ndarray, members: np.ndarray, centroid: np.ndarray,
                  cfg: DenoiseConfig, rng: np.random.Generator) -> np.ndarray:
    """Training corpus for one cluster: a capped random sample of its members.

    Clusters too small to seed the dictionary borrow the patches nearest to
    their centroid from the whole image; seeded random directions top up
    images with too few distinct patches.
    """
    M = cfg.dict_atoms
    if len(members) > cfg.train_sample_cap:
        members = np.sort(rng.choice(members, cfg.train_sample_cap, replace=False))
    train = vectors[members]
    if count_distinct(train) >= M + 1:
        return train
    d = ((vectors - centroid) ** 2).sum(1)
    nearest = np.argsort(d, kind="stable")[: max(4 * M, len(members))]
    train = vectors[np.union1d(members, nearest)]
    missing = M + 1 - count_distinct(train)
    if missing > 0:
        extra = rng.standard_normal((missing, vectors.shape[1]))
        train = np.vstack([train, extra / np.abs(extra).max(1, keepdims=True)])
    return train


def _denoise_one_cluster(c, vectors, members, centroid, noise_var, cfg):
    rng = np.random.default_rng([cfg.seed, c])
    train = _training_set(vectors, members, centroid, cfg, rng)
    d = ksvd_train(train, cfg.dict_atoms, cfg.ksvd_sparsity, cfg.ksvd_iters,
                   seed=int(rng.integers(2**31)))
    x = vectors[members]
    sol = collab.denoise_cluster(x, d, noise_var[members], cfg, coeff_variance=cfg.coeff_variance)
    return d, sol.coeffs @ d.atoms.T


def denoise_image(noisy: Image, cfg: DenoiseConfig | None = None) -> DenoiseReport:
    cfg = cfg or DenoiseConfig()
    cfg.validate()
    start = time.perf_counter()
    if min(noisy.shape) < cfg.patch_n:
        raise ValueError(f"image {noisy.shape} smaller than a {cfg.patch_n}x{cfg.patch_n} patch")

    sigma = estimate_sigma(noisy) if cfg.noise_sigma == ESTIMATE else float(cfg.noise_sigma)
    sigma_eff = max(sigma, MIN_SIGMA_FRACTION * noisy.range_max)

    ps = extract_patches(noisy, cfg.patch_n)
    k = min(cfg.clusters_k, count_distinct(ps.vectors))
    model = kmeans(ps.vectors, k, cfg.seed, cfg.kmeans_max_iter, cfg.kmeans_tol)
    noise_var = (sigma_eff / ps.scales) ** 2
    log.info("sigma=%.4g, cluster sizes %s", sigma, model.sizes().tolist())

    clusters = [model.members(c) for c in range(k)]
    with ThreadPoolExecutor(max_workers=min(_threads(), k)) as pool:
        results = list(pool.map(
            lambda c: _denoise_one_cluster(c, ps.vectors, clusters[c], model.centroids[c],
                                           noise_var, cfg),
            range(k)))

    est = np.empty_like(ps.vectors)
    for members, (_, vecs) in zip(clusters, results):
        est[members] = vecs
    out = aggregate(ps, noisy.shape, denormalize(est, ps.scales), noisy.range_max)
    return DenoiseReport(
        denoised=out,
        per_cluster_sizes=[len(m) for m in clusters],
        wall_time_s=time.perf_counter() - start,
        config_echo=dataclasses.replace(cfg),
        sigma=sigma,
        dictionaries=[d for d, _ in results],
    )
