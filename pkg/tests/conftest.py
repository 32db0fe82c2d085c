import numpy as np
import pytest

from provreg.hashing import PerceptualHash


def random_hashes(rng: np.random.Generator, count: int, k: int = 96):
    bits = rng.integers(0, 2, size=(count, k), dtype=np.uint8)
    return [PerceptualHash(row) for row in bits]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
