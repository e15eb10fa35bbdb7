"""Image sources for the experiment scripts: a PGM path, or a scikit-image sample as fallback."""

import numpy as np

from cofib.imagekit import Image, load_pgm

SAMPLES = ("camera", "astronaut", "coins", "moon", "brick", "grass")


def load(source: str) -> Image:
    if source.lower().endswith((".pgm", ".pnm")):
        return load_pgm(source)
    from skimage import data  # optional; only needed for the bundled samples

    raw = getattr(data, source)()
    if raw.ndim == 3:
        raw = raw[..., :3] @ np.array([0.299, 0.587, 0.114])
    return Image(raw.astype(np.float64))
