"""Latent-diffusion decoder features.

Pipeline per frame: VAE-encode the (padded) frame to a latent, apply the
forward noising process at the configured timestep with a per-frame-seeded
noise draw, run the denoising UNet conditioned on the (null) prompt, and
capture the output of upsampling decoder block `level` through a forward
hook. Decoder block n yields the level-n grid of the table in config.py.

Loading the pretrained modules goes through the diffusers layout
(vae/, unet/, text_encoder/, tokenizer/ subfolders of a local checkpoint
directory); weights are never downloaded here.
"""

from __future__ import annotations

import numpy as np

from ..config import ExtractError, WeightsError, level_shape
from ..schedule import alphas_cumprod

_VERSION_REPOS = {
    "sd-2.1": "stabilityai/stable-diffusion-2-1",
    "sd-2.0": "stabilityai/stable-diffusion-2",
    "sd-1.5": "runwayml/stable-diffusion-v1-5",
    "sd-1.4": "CompVis/stable-diffusion-v1-4",
}


class DiffusionBackbone:
    supports_levels = True

    def __init__(self, vae, unet, text_encoder, tokenizer, device="cpu",
                 name="sd-2.1", latent_scale=None):
        import torch  # deferred: only the loaded paths need it

        self._torch = torch
        self.name = name
        self.device = device
        self.vae = vae.to(device).eval()
        self.unet = unet.to(device).eval()
        self.text_encoder = text_encoder.to(device).eval()
        self.tokenizer = tokenizer
        if latent_scale is None:
            latent_scale = float(getattr(vae.config, "scaling_factor", 0.18215))
        self.latent_scale = latent_scale
        self._abar = alphas_cumprod()
        self._prompt_cache = {}

    @classmethod
    def load(cls, name, weights, device="cpu"):
        if weights is None:
            raise WeightsError(
                f"backbone {name!r} needs --weights pointing at a local "
                f"checkpoint directory (diffusers layout, e.g. a local copy "
                f"of {_VERSION_REPOS.get(name, 'the model repo')})"
            )
        try:
            import torch  # noqa: F401
            from diffusers import AutoencoderKL, UNet2DConditionModel
            from transformers import CLIPTextModel, CLIPTokenizer
        except ImportError as e:
            raise WeightsError(
                f"backbone {name!r} needs torch, diffusers and transformers "
                f"installed: {e}"
            ) from e
        try:
            vae = AutoencoderKL.from_pretrained(weights, subfolder="vae",
                                                local_files_only=True)
            unet = UNet2DConditionModel.from_pretrained(weights, subfolder="unet",
                                                        local_files_only=True)
            text_encoder = CLIPTextModel.from_pretrained(weights, subfolder="text_encoder",
                                                         local_files_only=True)
            tokenizer = CLIPTokenizer.from_pretrained(weights, subfolder="tokenizer",
                                                      local_files_only=True)
        except (OSError, EnvironmentError) as e:
            raise WeightsError(f"missing weights for {name!r} under {weights}: {e}") from e
        return cls(vae, unet, text_encoder, tokenizer, device, name)

    def _prompt_embedding(self, prompt: str):
        if prompt not in self._prompt_cache:
            torch = self._torch
            tokens = self.tokenizer(
                prompt, padding="max_length",
                max_length=self.tokenizer.model_max_length,
                truncation=True, return_tensors="pt",
            ).input_ids.to(self.device)
            with torch.no_grad():
                self._prompt_cache[prompt] = self.text_encoder(tokens)[0]
        return self._prompt_cache[prompt]

    def grid_features(self, frame, *, timestep: int, level: int, prompt: str,
                      seed: int, frame_index: int):
        torch = self._torch
        h, w = frame.shape[:2]
        expected = level_shape(h, w, level)
        x = torch.from_numpy(np.ascontiguousarray(frame)).permute(2, 0, 1)[None]
        x = (x * 2.0 - 1.0).to(self.device)  # VAE expects [-1, 1]

        with torch.no_grad():
            posterior = self.vae.encode(x).latent_dist
            latent = posterior.mode() * self.latent_scale  # deterministic encode

            gen = torch.Generator(device="cpu").manual_seed(
                (seed + 0x9E3779B9 * frame_index) & 0x7FFFFFFF
            )
            noise = torch.randn(latent.shape, generator=gen).to(self.device)
            abar = float(self._abar[timestep - 1])
            noisy = abar ** 0.5 * latent + (1.0 - abar) ** 0.5 * noise

            captured = {}

            def hook(_module, _inputs, output):
                captured["feat"] = output

            handle = self.unet.up_blocks[level - 1].register_forward_hook(hook)
            try:
                self.unet(
                    noisy,
                    torch.tensor([timestep], device=self.device),
                    encoder_hidden_states=self._prompt_embedding(prompt),
                )
            finally:
                handle.remove()

        if "feat" not in captured:
            raise ExtractError(f"decoder block {level} produced no output")
        feat = captured["feat"]
        if isinstance(feat, (tuple, list)):
            feat = feat[0]
        out = feat[0].permute(1, 2, 0).float().cpu().numpy()
        if out.shape != expected:
            raise ExtractError(
                f"level {level} produced {out.shape}, expected {expected}; "
                f"backbone architecture does not match the level table"
            )
        return out
