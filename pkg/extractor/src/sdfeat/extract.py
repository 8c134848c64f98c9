"""Batch extraction: frames directory -> feature files + manifest fragment."""

from __future__ import annotations

import json
import os
from pathlib import Path

from .backbones import create_backbone
from .config import BASELINE_BACKBONES, ExtractConfig, ExtractError
from .frames import list_frames, load_frame, pad_frame
from .store import write_feature_map


def extract_features(frames_dir, cfg: ExtractConfig, out_dir):
    """Extract one feature file per frame; returns the manifest fragment path.

    Deterministic for a fixed config: the forward-noise draw is keyed by
    (seed, frame index), not by run.
    """
    backbone = create_backbone(cfg)
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    frame_paths = list_frames(frames_dir)
    entries = []
    for index, path in enumerate(frame_paths, start=1):
        frame = load_frame(path)
        orig_h, orig_w = frame.shape[:2]
        padded, pads = pad_frame(frame)
        feat = backbone.grid_features(
            padded, timestep=cfg.timestep, level=cfg.level, prompt=cfg.prompt,
            seed=cfg.seed, frame_index=index,
        )
        feat_name = f"feat_{index:05d}.fmap"
        write_feature_map(out / feat_name, feat)
        entries.append({
            "index": index,
            "image": str(path),
            "features": feat_name,
            "original_size": [orig_h, orig_w],
            "padded_size": list(padded.shape[:2]),
            "pad": list(pads),
        })
    fragment = {
        "backbone": cfg.backbone,
        "timestep": cfg.timestep,
        "level": cfg.level if backbone.supports_levels else None,
        "prompt": cfg.prompt,
        "seed": cfg.seed,
        "frames": entries,
    }
    fragment_path = out / "features_manifest.json"
    with open(fragment_path, "w", encoding="utf-8") as f:
        json.dump(fragment, f, indent=2, sort_keys=True)
        f.write("\n")
    return fragment_path


def extract_baseline(frames_dir, backbone: str, out_dir, *, weights=None,
                     seed: int = 0, device: str = "cpu"):
    """Penultimate-layer baseline extraction (self-distilled, vision-language
    or masked-autoencoder ViT); emits the same file contract."""
    if backbone not in BASELINE_BACKBONES:
        raise ExtractError(
            f"unknown baseline backbone {backbone!r}; supported: "
            f"{', '.join(BASELINE_BACKBONES)}"
        )
    cfg = ExtractConfig(backbone=backbone, seed=seed, weights=weights, device=device)
    return extract_features(frames_dir, cfg, out_dir)
