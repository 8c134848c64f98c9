import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from maskflow import MemoryQueue, TrackerConfig, normalize_features, update_memory

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def golden_dir():
    return GOLDEN_DIR


def make_queue(ref_feats, ref_masks, cfg=None, num_classes=None):
    """Build a memory queue from raw feature/mask arrays (features are
    normalized on the way in, as track_video would)."""
    cfg = cfg or TrackerConfig()
    queue = MemoryQueue(capacity=max(len(ref_feats), cfg.memory),
                        anchor_first=cfg.anchor_first_frame)
    for i, (f, m) in enumerate(zip(ref_feats, ref_masks), start=1):
        update_memory(queue, normalize_features(f), m, cfg,
                      num_classes=num_classes, frame_index=i)
    return queue


def random_case(seed, hf=None, wf=None, c=None, k=None, frames=None):
    """Continuous random tracking inputs driven by a single seed."""
    rng = np.random.default_rng(seed)
    hf = hf or int(rng.integers(3, 10))
    wf = wf or int(rng.integers(3, 10))
    c = c or int(rng.integers(2, 8))
    k = k or int(rng.integers(2, 5))
    frames = frames or int(rng.integers(2, 5))
    feats = [rng.standard_normal((hf, wf, c)) for _ in range(frames)]
    first = rng.integers(0, k, (hf, wf))
    return feats, first, k
