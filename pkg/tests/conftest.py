import numpy as np
import pytest

from cofib.bench import box_downsample
from cofib.imagekit import Image


def natural_image(side: int, name: str = "camera") -> Image:
    """A standard test photograph, box-downsampled to side x side."""
    skdata = pytest.importorskip("skimage.data")
    raw = getattr(skdata, name)()
    if raw.ndim == 3:
        raw = raw[..., :3] @ np.array([0.299, 0.587, 0.114])
    return box_downsample(Image(raw.astype(np.float64)), side)


@pytest.fixture
def camera64():
    return natural_image(64)
