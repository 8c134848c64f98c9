"""Penultimate-layer features from ViT-family baselines.

The token grid of the second-to-last encoder layer (class token dropped) is
reshaped to (H/patch, W/patch, hidden). Position embeddings are interpolated
so arbitrary (patch-aligned) frame sizes work.
"""

from __future__ import annotations

import numpy as np

from ..config import ExtractError, WeightsError

_BASELINE_KINDS = {
    "dino": "vit",  # self-distilled ViT
    "mae": "vit",   # masked-autoencoder ViT encoder
    "clip": "clip_vision",  # contrastive vision-language ViT tower
}


class VitBackbone:
    supports_levels = False

    def __init__(self, model, patch_size: int, device="cpu", name="dino"):
        import torch

        self._torch = torch
        self.name = name
        self.device = device
        self.model = model.to(device).eval()
        self.patch_size = int(patch_size)

    @classmethod
    def load(cls, name, weights, device="cpu"):
        if name not in _BASELINE_KINDS:
            raise ExtractError(
                f"unknown baseline backbone {name!r}; supported: "
                f"{', '.join(sorted(_BASELINE_KINDS))}"
            )
        if weights is None:
            raise WeightsError(
                f"backbone {name!r} needs --weights pointing at a local "
                f"checkpoint directory"
            )
        try:
            import torch  # noqa: F401

            if _BASELINE_KINDS[name] == "clip_vision":
                from transformers import CLIPVisionModel as Model
            else:
                from transformers import ViTModel as Model
        except ImportError as e:
            raise WeightsError(
                f"backbone {name!r} needs torch and transformers installed: {e}"
            ) from e
        try:
            model = Model.from_pretrained(weights, local_files_only=True)
        except (OSError, EnvironmentError) as e:
            raise WeightsError(f"missing weights for {name!r} under {weights}: {e}") from e
        return cls(model, model.config.patch_size, device, name)

    def grid_features(self, frame, *, timestep: int, level: int, prompt: str,
                      seed: int, frame_index: int):
        torch = self._torch
        h, w = frame.shape[:2]
        if h % self.patch_size or w % self.patch_size:
            raise ExtractError(
                f"frame {h}x{w} not divisible by patch size {self.patch_size}"
            )
        x = torch.from_numpy(np.ascontiguousarray(frame)).permute(2, 0, 1)[None]
        x = x.to(self.device)
        with torch.no_grad():
            out = self.model(
                pixel_values=x,
                output_hidden_states=True,
                interpolate_pos_encoding=True,
            )
        tokens = out.hidden_states[-2][0, 1:]  # penultimate layer, CLS dropped
        gh, gw = h // self.patch_size, w // self.patch_size
        if tokens.shape[0] != gh * gw:
            raise ExtractError(
                f"expected {gh * gw} patch tokens, got {tokens.shape[0]}"
            )
        return tokens.reshape(gh, gw, -1).float().cpu().numpy()
