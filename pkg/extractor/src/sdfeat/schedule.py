"""Forward-diffusion noising schedule.

Scaled-linear beta schedule over 1000 steps (the training schedule of the
latent diffusion backbones): beta_i = (sqrt(b0) + i/(T-1) (sqrt(bT) -
sqrt(b0)))^2 with b0 = 0.00085, bT = 0.012. The forward process maps a clean
latent to step t as

    z_t = sqrt(abar_t) z_0 + sqrt(1 - abar_t) eps,  eps ~ N(0, I)

with abar the cumulative product of (1 - beta). Timesteps are 1-based here
(t = 1 is the least noisy step).
"""

from __future__ import annotations

import numpy as np

from .config import SCHEDULER_MAX_TIMESTEP

BETA_START = 0.00085
BETA_END = 0.012


def alphas_cumprod(num_steps: int = SCHEDULER_MAX_TIMESTEP):
    sqrt_betas = np.linspace(BETA_START ** 0.5, BETA_END ** 0.5, num_steps)
    betas = sqrt_betas ** 2
    return np.cumprod(1.0 - betas)


_ABAR = alphas_cumprod()


def add_noise(latent, noise, timestep: int):
    """Noisy latent at the given 1-based timestep."""
    abar = _ABAR[timestep - 1]
    return np.sqrt(abar) * latent + np.sqrt(1.0 - abar) * noise
