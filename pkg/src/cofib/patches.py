"""Per-pixel patch extraction, max-abs normalization and overlap-averaged reconstruction.

Patches are vectorized column-major: entry ``j * n + i`` of a vector holds
row ``i``, column ``j`` of the n x n window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagekit import Image


@dataclass
class PatchSet:
    """One patch per pixel of the source image.

    Attributes:
        n: patch side (odd).
        vectors: (N, n*n) normalized patch vectors.
        centers: (N, 2) integer (row, col) of each patch's center pixel.
        scales: (N,) max-abs value each patch was divided by (1 for all-zero patches).
        shape: (height, width) of the source image.
    """

    n: int
    vectors: np.ndarray
    centers: np.ndarray
    scales: np.ndarray
    shape: tuple[int, int]

    @property
    def patch_dim(self) -> int:
        return self.n * self.n

    def __len__(self) -> int:
        return len(self.vectors)

    def with_vectors(self, vectors: np.ndarray) -> PatchSet:
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.shape != self.vectors.shape:
            raise ValueError(f"expected vectors of shape {self.vectors.shape}, got {vectors.shape}")
        return PatchSet(self.n, vectors, self.centers, self.scales, self.shape)


def pad_width(n: int) -> int:
    """Padding needed so every pixel gets a centered n x n patch: (sqrt(R) - 1) / 2."""
    if n < 1 or n % 2 == 0:
        raise ValueError(f"patch side must be odd and positive, got {n}")
    return (n - 1) // 2


def pad_reflect(image: Image, pad: int) -> Image:
    """Mirror-pad without repeating the edge pixel ([a, b, c] -> [b, a, b, c, b] for pad 1)."""
    if pad < 0:
        raise ValueError("pad must be non-negative")
    if pad >= min(image.shape):
        raise ValueError(f"pad {pad} too large for a {image.height}x{image.width} image")
    if pad == 0:
        return image
    return image.with_pixels(np.pad(image.pixels, pad, mode="reflect"))


def _windows(padded: np.ndarray, n: int) -> np.ndarray:
    # (h, w, n, n) -> (h*w, n*n) with column-major patch order
    win = np.lib.stride_tricks.sliding_window_view(padded, (n, n))
    h, w = win.shape[:2]
    return win.transpose(0, 1, 3, 2).reshape(h * w, n * n)


def normalize(vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vectors = np.asarray(vectors, dtype=np.float64)
    scales = np.max(np.abs(vectors), axis=-1)
    scales = np.where(scales > 0, scales, 1.0)
    return vectors / scales[..., None], scales


def extract_patches(image: Image, n: int = 7) -> PatchSet:
    pad = pad_width(n)
    if n < 3 or n > min(image.shape):
        raise ValueError(f"patch side {n} must lie in [3, {min(image.shape)}]")
    padded = pad_reflect(image, pad).pixels
    vectors, scales = normalize(_windows(padded, n))
    rows, cols = np.indices(image.shape)
    centers = np.stack([rows.ravel(), cols.ravel()], axis=1)
    return PatchSet(n, vectors, centers, scales, image.shape)


def denormalize(vector: np.ndarray, scale) -> np.ndarray:
    scale = np.asarray(scale, dtype=np.float64)
    if np.any(scale <= 0):
        raise ValueError("scale must be positive")
    vector = np.asarray(vector, dtype=np.float64)
    if scale.ndim:
        return vector * scale[..., None]
    return vector * scale


def aggregate(patches: PatchSet, out_dims: tuple[int, int], raw: np.ndarray | None = None,
              range_max: float = 255.0) -> Image:
    """Average overlapping (denormalized) patches back into an image.

    ``raw`` holds the denormalized vectors, in patch order; by default the
    stored vectors are denormalized with their scales. Contributions falling
    into the padding are discarded.
    """
    h, w = out_dims
    if (h, w) != tuple(patches.shape) or len(patches) != h * w:
        raise ValueError(f"patch geometry {patches.shape} does not match output {out_dims}")
    if raw is None:
        raw = denormalize(patches.vectors, patches.scales)
    n = patches.n
    pad = pad_width(n)
    # patches are stored in pixel order, so centers map to a (h, w) grid
    grid = raw.reshape(h, w, n, n)  # [..., col, row] because of column-major order
    acc = np.zeros((h + 2 * pad, w + 2 * pad))
    count = np.zeros_like(acc)
    for i in range(n):
        for j in range(n):
            acc[i:i + h, j:j + w] += grid[:, :, j, i]
            count[i:i + h, j:j + w] += 1.0
    inner = (slice(pad, pad + h), slice(pad, pad + w))
    return Image(acc[inner] / count[inner], range_max)
