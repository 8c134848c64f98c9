"""Deterministic synthetic sequences with analytic ground truth.

Frame 1 partitions the grid into K rectangles of orthonormal prototype
features; later frames translate the label field by a fixed per-frame motion
with class-0 fill. Noise comes from a counter-based generator (Philox) keyed
by (seed, frame), so output is identical across platforms and runs.

The partition layout adapts to the motion direction so that translated
sequences stay exactly recoverable by windowed propagation: freshly filled
background pixels only carry class-0 features, so class 0's rectangle must
sit against the edges where fill appears. Strips handle single-axis motion;
diagonal motion gets a large class-0 corner block whose far sides stay
within reach of every fill pixel (requires a window radius of at least
min(H, W) // 4 for exact recovery, beyond radius >= |motion|).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .tensorstore import (
    DatasetManifest,
    ManifestFrame,
    ManifestVideo,
    PaletteEntry,
    save_manifest,
    write_feature_map,
    write_mask,
)


@dataclass(frozen=True)
class SynthConfig:
    height: int = 64
    width: int = 64
    channels: int = 16
    num_classes: int = 4
    frames: int = 20
    noise: float = 0.0
    motion: tuple = (1, 1)  # (dy, dx) per frame
    seed: int = 0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ConfigError(f"grid must be >= 1x1, got {self.height}x{self.width}")
        if self.num_classes < 1:
            raise ConfigError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.num_classes > self.channels:
            raise ConfigError(
                f"orthogonal prototypes need channels >= classes, "
                f"got C={self.channels} < K={self.num_classes}"
            )
        if self.frames < 1:
            raise ConfigError(f"frames must be >= 1, got {self.frames}")
        if self.noise < 0:
            raise ConfigError(f"noise must be >= 0, got {self.noise}")
        dy, dx = self.motion
        if abs(dy) * (self.frames - 1) >= self.height or \
                abs(dx) * (self.frames - 1) >= self.width:
            raise ConfigError(
                f"motion {self.motion} over {self.frames} frames leaves the "
                f"{self.height}x{self.width} grid"
            )
        _first_frame_labels(self)  # validates partition feasibility


def _strip_bounds(extent: int, parts: int):
    return np.linspace(0, extent, parts + 1).astype(int)


def _first_frame_labels(cfg: SynthConfig):
    """K rectangles arranged so class 0 borders every edge where fill appears."""
    h, w, k = cfg.height, cfg.width, cfg.num_classes
    dy, dx = cfg.motion
    labels = np.zeros((h, w), np.int64)
    if k == 1:
        return labels
    if dy != 0 and dx != 0:
        # class 0 = large corner block against the two fill edges; the
        # remaining L splits into K-1 strip blocks
        q = max(1, min(h, w) // 4)
        nb = (k - 1) // 2
        nr = (k - 1) - nb
        bh = h - q if nb else h
        if w - q < 1 or bh < nr or (nb and w < nb):
            raise ConfigError(
                f"grid {h}x{w} too small for a {k}-class diagonal partition"
            )
        ys = _strip_bounds(bh, nr)
        for i in range(nr):
            labels[ys[i]:ys[i + 1], w - q:] = 1 + i
        if nb:
            xs = _strip_bounds(w, nb)
            for i in range(nb):
                labels[h - q:, xs[i]:xs[i + 1]] = 1 + nr + i
    elif dy != 0 or (dy == 0 and dx == 0 and h >= w):
        if h < k:
            raise ConfigError(f"strip partition needs height >= {k}")
        ys = _strip_bounds(h, k)
        for i in range(k):
            labels[ys[i]:ys[i + 1], :] = i
    else:
        if w < k:
            raise ConfigError(f"strip partition needs width >= {k}")
        xs = _strip_bounds(w, k)
        for i in range(k):
            labels[:, xs[i]:xs[i + 1]] = i
    # class 0 must sit against the fill edges; flip for negative motion
    if dy < 0:
        labels = labels[::-1, :]
    if dx < 0:
        labels = labels[:, ::-1]
    return np.ascontiguousarray(labels)


def _shift_with_fill(labels, dy: int, dx: int, fill: int = 0):
    out = np.full_like(labels, fill)
    h, w = labels.shape
    ys_src = slice(max(0, -dy), min(h, h - dy))
    ys_dst = slice(max(0, dy), min(h, h + dy))
    xs_src = slice(max(0, -dx), min(w, w - dx))
    xs_dst = slice(max(0, dx), min(w, w + dx))
    out[ys_dst, xs_dst] = labels[ys_src, xs_src]
    return out


def gen_sequence(cfg: SynthConfig):
    """Generate (features, masks): N frames of (Hf, Wf, C) float32 and (Hf, Wf)
    labels. Features are the label's prototype (standard basis direction) plus
    Gaussian noise of the configured scale."""
    protos = np.eye(cfg.num_classes, cfg.channels, dtype=np.float32)
    base = _first_frame_labels(cfg)
    dy, dx = cfg.motion
    features, masks = [], []
    for i in range(cfg.frames):
        labels = _shift_with_fill(base, dy * i, dx * i) if i else base
        feat = protos[labels]
        if cfg.noise > 0:
            gen = np.random.Generator(
                np.random.Philox(key=np.array([cfg.seed, i], dtype=np.uint64))
            )
            feat = feat + cfg.noise * gen.standard_normal(
                feat.shape, dtype=np.float32
            )
        masks.append(labels)
        features.append(np.ascontiguousarray(feat))
    return features, masks


_PALETTE_COLORS = [
    (0, 0, 0), (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 190), (0, 128, 128), (230, 190, 255),
]


def write_dataset(cfg: SynthConfig, out_dir, video_id: str = "synth") -> Path:
    """Write a self-contained dataset: feature files, ground-truth masks, a
    manifest, and a sidecar JSON describing the generator config. Returns the
    manifest path."""
    out = Path(out_dir)
    os.makedirs(out / "features", exist_ok=True)
    os.makedirs(out / "masks", exist_ok=True)
    features, masks = gen_sequence(cfg)
    frames = []
    for i, (feat, mask) in enumerate(zip(features, masks), start=1):
        fp = f"features/feat_{i:05d}.fmap"
        mp = f"masks/mask_{i:05d}.lmsk"
        write_feature_map(out / fp, feat)
        write_mask(out / mp, mask, cfg.num_classes)
        frames.append(ManifestFrame(index=i, features=fp, mask=mp))
    palette = {
        c: PaletteEntry(f"class_{c}", _PALETTE_COLORS[c % len(_PALETTE_COLORS)])
        for c in range(cfg.num_classes)
    }
    manifest = DatasetManifest(
        name=f"synth-{video_id}",
        palette=palette,
        videos={video_id: ManifestVideo(video_id, tuple(frames))},
        root=out,
    )
    manifest_path = out / "manifest.json"
    save_manifest(manifest, manifest_path)
    with open(out / "synth_config.json", "w", encoding="utf-8") as f:
        json.dump(
            {
                "height": cfg.height,
                "width": cfg.width,
                "channels": cfg.channels,
                "num_classes": cfg.num_classes,
                "frames": cfg.frames,
                "noise": cfg.noise,
                "motion": list(cfg.motion),
                "seed": cfg.seed,
            },
            f,
            indent=2,
        )
        f.write("\n")
    return manifest_path
