"""Hook and conversion logic of the diffusion backbone, exercised with a
hand-built miniature UNet that reproduces the production decoder structure
(same resolutions and channel counts per level, tiny 1x1 convolutions)."""

from types import SimpleNamespace

import numpy as np
import pytest

torch = pytest.importorskip("torch")
from torch import nn

from sdfeat.backbones.diffusion import DiffusionBackbone
from sdfeat.config import LEVEL_TABLE


class MiniVae(nn.Module):
    def __init__(self, latent_channels=4):
        super().__init__()
        self.proj = nn.Conv2d(3, latent_channels, 1)
        self.config = SimpleNamespace(scaling_factor=0.18215)

    def encode(self, x):
        latent = self.proj(nn.functional.avg_pool2d(x, 8))

        class Dist:
            def __init__(self, value):
                self._value = value

            def mode(self):
                return self._value

        return SimpleNamespace(latent_dist=Dist(latent))


class MiniUpBlock(nn.Module):
    def __init__(self, in_ch, out_ch, upsample):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, 1)
        self.upsample = upsample

    def forward(self, x):
        x = self.conv(x)
        if self.upsample:
            x = nn.functional.interpolate(x, scale_factor=2, mode="nearest")
        return x


class MiniUnet(nn.Module):
    """Four decoder blocks with the production output structure: latent/4
    (1280), latent/2 (1280), latent (640), latent (320). The encoder only
    pools by 4 so small latents stay integral."""

    def __init__(self, latent_channels=4):
        super().__init__()
        self.inproj = nn.Conv2d(latent_channels, 8, 1)
        self.up_blocks = nn.ModuleList([
            MiniUpBlock(8, 1280, upsample=False),
            MiniUpBlock(1280, 1280, upsample=True),
            MiniUpBlock(1280, 640, upsample=True),
            MiniUpBlock(640, 320, upsample=False),
        ])

    def forward(self, sample, timestep, encoder_hidden_states=None):
        x = nn.functional.avg_pool2d(self.inproj(sample), 4)
        for block in self.up_blocks:
            x = block(x)
        return x


class MiniTokenizer:
    model_max_length = 77

    def __call__(self, prompt, **kwargs):
        return SimpleNamespace(input_ids=torch.zeros(1, 77, dtype=torch.long))


class MiniTextEncoder(nn.Module):
    def __init__(self, dim=16):
        super().__init__()
        self.emb = nn.Embedding(4, dim)

    def forward(self, tokens):
        return (self.emb(tokens),)


@pytest.fixture(scope="module")
def backbone():
    torch.manual_seed(0)
    return DiffusionBackbone(MiniVae(), MiniUnet(), MiniTextEncoder(),
                             MiniTokenizer(), name="mini")


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_hooked_levels_match_table(backbone, level):
    h, w = 64, 96
    frame = np.random.default_rng(level).random((h, w, 3)).astype(np.float32)
    feat = backbone.grid_features(frame, timestep=200, level=level, prompt="",
                                  seed=0, frame_index=1)
    factor, channels = LEVEL_TABLE[level]
    assert feat.shape == (h // factor, w // factor, channels)
    assert feat.dtype == np.float32
    assert np.isfinite(feat).all()


def test_deterministic_per_seed_and_frame(backbone):
    frame = np.random.default_rng(7).random((64, 64, 3)).astype(np.float32)
    a = backbone.grid_features(frame, timestep=200, level=3, prompt="",
                               seed=5, frame_index=2)
    b = backbone.grid_features(frame, timestep=200, level=3, prompt="",
                               seed=5, frame_index=2)
    c = backbone.grid_features(frame, timestep=200, level=3, prompt="",
                               seed=5, frame_index=3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_timestep_changes_noise_level(backbone):
    frame = np.random.default_rng(8).random((64, 64, 3)).astype(np.float32)
    lo = backbone.grid_features(frame, timestep=1, level=3, prompt="",
                                seed=0, frame_index=1)
    hi = backbone.grid_features(frame, timestep=999, level=3, prompt="",
                                seed=0, frame_index=1)
    assert not np.array_equal(lo, hi)
