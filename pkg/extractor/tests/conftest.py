import numpy as np
import pytest
from PIL import Image


@pytest.fixture
def frames_dir_factory(tmp_path):
    def make(sizes, seed=0):
        d = tmp_path / "frames"
        d.mkdir(exist_ok=True)
        rng = np.random.default_rng(seed)
        for i, (h, w) in enumerate(sizes, start=1):
            arr = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
            Image.fromarray(arr).save(d / f"frame_{i:05d}.png")
        return d

    return make
