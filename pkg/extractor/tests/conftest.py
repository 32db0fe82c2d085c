import numpy as np
import pytest
from PIL import Image


def synthetic_image(rng: np.random.Generator, size=(100, 100)) -> Image.Image:
    """A structured random image: smooth gradients plus blocky texture, so
    low-frequency content survives mild transforms."""
    w, h = size
    yy, xx = np.mgrid[0:h, 0:w]
    base = np.stack([
        128 + 100 * np.sin(2 * np.pi * xx / w * rng.uniform(0.5, 2.0)),
        128 + 100 * np.cos(2 * np.pi * yy / h * rng.uniform(0.5, 2.0)),
        rng.uniform(0, 255) * np.ones((h, w)),
    ], axis=-1)
    blocks = rng.integers(0, 80, size=(h // 10 + 1, w // 10 + 1, 3))
    noise = np.kron(blocks, np.ones((10, 10, 1)))[:h, :w]
    return Image.fromarray(np.clip(base + noise, 0, 255).astype(np.uint8), "RGB")


@pytest.fixture
def rng():
    return np.random.default_rng(777)


@pytest.fixture
def images_dir(tmp_path, rng):
    d = tmp_path / "images"
    d.mkdir()
    for i in range(12):
        synthetic_image(rng).save(d / f"img_{i:03d}.png")
    return d
