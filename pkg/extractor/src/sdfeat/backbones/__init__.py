"""Backbone registry: id -> feature extractor factory."""

from __future__ import annotations

from ..config import (
    BASELINE_BACKBONES,
    DIFFUSION_BACKBONES,
    KNOWN_BACKBONES,
    SYNTHETIC_BACKBONE,
    ExtractError,
)


def create_backbone(cfg):
    """Instantiate the backbone named by the config.

    Diffusion and ViT baselines need their support libraries and local
    weights; the synthetic backbone always works and is meant for pipeline
    tests and dry runs.
    """
    if cfg.backbone == SYNTHETIC_BACKBONE:
        from .synthetic import SyntheticBackbone

        return SyntheticBackbone()
    if cfg.backbone in DIFFUSION_BACKBONES:
        from .diffusion import DiffusionBackbone

        return DiffusionBackbone.load(cfg.backbone, cfg.weights, cfg.device)
    if cfg.backbone in BASELINE_BACKBONES:
        from .vit import VitBackbone

        return VitBackbone.load(cfg.backbone, cfg.weights, cfg.device)
    raise ExtractError(
        f"unknown backbone {cfg.backbone!r}; supported: {', '.join(KNOWN_BACKBONES)}"
    )
