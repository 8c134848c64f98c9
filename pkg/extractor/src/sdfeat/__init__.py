"""sdfeat: dense per-frame feature extraction for the maskflow engine."""

__version__ = "0.1.0"

from .config import (
    BASELINE_BACKBONES,
    DIFFUSION_BACKBONES,
    KNOWN_BACKBONES,
    LEVEL_TABLE,
    ExtractConfig,
    ExtractError,
    WeightsError,
    level_shape,
    pad_amounts,
)
from .extract import extract_baseline, extract_features
from .store import write_feature_map

__all__ = [
    "BASELINE_BACKBONES",
    "DIFFUSION_BACKBONES",
    "ExtractConfig",
    "ExtractError",
    "KNOWN_BACKBONES",
    "LEVEL_TABLE",
    "WeightsError",
    "extract_baseline",
    "extract_features",
    "level_shape",
    "pad_amounts",
    "write_feature_map",
]
