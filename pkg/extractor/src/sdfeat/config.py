"""Extraction configuration and the decoder level table.

For an input frame of h x w pixels, the latent grid is h/8 x w/8 and the four
UNet decoder levels emit:

    level 1: h/32 x w/32 x 1280
    level 2: h/16 x w/16 x 1280
    level 3: h/8  x w/8  x 640
    level 4: h/8  x w/8  x 320

Frames are center-padded with zeros up to the next multiple of 32 so every
level grid is integral; pad amounts are recorded per frame in the manifest
fragment.
"""

from __future__ import annotations

from dataclasses import dataclass


class ExtractError(Exception):
    """Configuration or input problem in the extraction pipeline."""


class WeightsError(ExtractError):
    """Backbone weights (or their support libraries) are not available."""


SCHEDULER_MAX_TIMESTEP = 1000

# level -> (downsampling factor relative to the input frame, channels)
LEVEL_TABLE = {
    1: (32, 1280),
    2: (16, 1280),
    3: (8, 640),
    4: (8, 320),
}

PAD_MULTIPLE = 32

DIFFUSION_BACKBONES = ("sd-2.1", "sd-2.0", "sd-1.5", "sd-1.4")
BASELINE_BACKBONES = ("dino", "clip", "mae")
SYNTHETIC_BACKBONE = "synthetic"
KNOWN_BACKBONES = DIFFUSION_BACKBONES + BASELINE_BACKBONES + (SYNTHETIC_BACKBONE,)


@dataclass(frozen=True)
class ExtractConfig:
    backbone: str = "sd-2.1"
    timestep: int = 200
    level: int = 3
    prompt: str = ""
    seed: int = 0
    weights: str | None = None
    device: str = "cpu"

    def __post_init__(self):
        if self.backbone not in KNOWN_BACKBONES:
            raise ExtractError(
                f"unknown backbone {self.backbone!r}; supported: "
                f"{', '.join(KNOWN_BACKBONES)}"
            )
        if not 1 <= self.timestep <= SCHEDULER_MAX_TIMESTEP:
            raise ExtractError(
                f"timestep must lie in [1, {SCHEDULER_MAX_TIMESTEP}], "
                f"got {self.timestep}"
            )
        if self.level not in LEVEL_TABLE:
            raise ExtractError(f"decoder level must be one of 1..4, got {self.level}")


def level_shape(height: int, width: int, level: int):
    """Feature dims for a (padded) frame size at a decoder level."""
    factor, channels = LEVEL_TABLE[level]
    if height % factor or width % factor:
        raise ExtractError(
            f"frame {height}x{width} not divisible by the level-{level} "
            f"factor {factor}"
        )
    return height // factor, width // factor, channels


def pad_amounts(height: int, width: int, multiple: int = PAD_MULTIPLE):
    """Centered (top, bottom, left, right) padding to the next multiple."""
    ph = (multiple - height % multiple) % multiple
    pw = (multiple - width % multiple) % multiple
    return ph // 2, ph - ph // 2, pw // 2, pw - pw // 2
