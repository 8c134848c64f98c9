"""Deterministic stand-in backbone with the production shape contract.

Features are area-pooled frame colours pushed through a fixed seeded
projection per level, plus timestep-scaled noise keyed by (seed, frame
index). No weights, no torch; useful for pipeline tests, format validation
and dry runs on machines without the pretrained backbones.
"""

from __future__ import annotations

import numpy as np

from ..config import LEVEL_TABLE, SCHEDULER_MAX_TIMESTEP


def _pool(frame, factor: int):
    h, w, c = frame.shape
    return frame.reshape(h // factor, factor, w // factor, factor, c).mean(axis=(1, 3))


class SyntheticBackbone:
    name = "synthetic"
    supports_levels = True

    def grid_features(self, frame, *, timestep: int, level: int, prompt: str,
                      seed: int, frame_index: int):
        factor, channels = LEVEL_TABLE[level]
        pooled = _pool(frame, factor)
        proj_rng = np.random.Generator(
            np.random.Philox(key=np.array([0x5DFEA7, level], dtype=np.uint64))
        )
        proj = proj_rng.standard_normal((pooled.shape[-1], channels)).astype(np.float32)
        feat = pooled.astype(np.float32) @ proj
        noise_rng = np.random.Generator(
            np.random.Philox(key=np.array([seed & 0xFFFFFFFFFFFFFFFF, frame_index],
                                          dtype=np.uint64))
        )
        scale = np.float32(0.1 * timestep / SCHEDULER_MAX_TIMESTEP)
        feat = feat + scale * noise_rng.standard_normal(feat.shape, dtype=np.float32)
        return feat
