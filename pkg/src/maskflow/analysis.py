"""Feature-map diagnostics: PCA rendering as RGB and temporal consistency.

The PCA basis is fit jointly over all pixels of all provided frames so the
same structure keeps the same colour across a clip. Images are written as
binary PPM (P6, 8-bit), viewable everywhere without extra dependencies.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class PcaBasis:
    """Top-k principal directions of pixel features.

    components rows are orthonormal, ordered by decreasing variance, each
    with its largest-magnitude coordinate made positive. variance_fractions
    are eigenvalue shares of the total variance, zero for degenerate input.
    """

    mean: np.ndarray  # (C,)
    components: np.ndarray  # (k, C)
    variance_fractions: np.ndarray  # (k,)


def fit_pca(grids, k: int = 3) -> PcaBasis:
    """Fit the top-k PCA basis over all pixels of all frames jointly."""
    if not grids:
        raise DimensionError("at least one feature map is required")
    mats = []
    c = np.asarray(grids[0]).shape[-1]
    for g in grids:
        g = np.asarray(g)
        if g.ndim != 3 or g.shape[-1] != c:
            raise DimensionError(f"feature maps must share channel count {c}")
        mats.append(g.reshape(-1, c).astype(np.float64))
    x = np.concatenate(mats, axis=0)
    if c < k:
        raise DimensionError(f"need at least {k} channels, got {c}")
    if x.shape[0] < k:
        raise DimensionError(f"need at least {k} pixels, got {x.shape[0]}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / x.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    components = eigvecs[:, order].T.copy()
    for i in range(k):
        j = np.argmax(np.abs(components[i]))
        if components[i, j] < 0:
            components[i] = -components[i]
    total = float(np.trace(cov))
    if total < 1e-20:
        fractions = np.zeros(k)
    else:
        fractions = np.maximum(eigvals[order], 0.0) / total
    return PcaBasis(mean=mean, components=components, variance_fractions=fractions)


def project(grid, basis: PcaBasis):
    """(Hf, Wf, k) projections of a feature map onto the basis directions."""
    grid = np.asarray(grid)
    if grid.shape[-1] != basis.mean.shape[0]:
        raise DimensionError(
            f"grid has {grid.shape[-1]} channels, basis expects {basis.mean.shape[0]}"
        )
    return (grid.astype(np.float64) - basis.mean) @ basis.components.T


def render_pca_rgb(grid, basis: PcaBasis):
    """Render the top-3 projections as an RGB image in [0, 1].

    Each channel is min-max normalized over the image; channels with no
    spread render as 0.
    """
    proj = project(grid, basis)[..., :3]
    out = np.zeros_like(proj)
    for ch in range(proj.shape[-1]):
        p = proj[..., ch]
        lo, hi = p.min(), p.max()
        if hi - lo > 1e-12:
            out[..., ch] = (p - lo) / (hi - lo)
    return out


def write_ppm(path, image) -> None:
    """Write an (H, W, 3) image with values in [0, 1] as binary PPM (P6)."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[-1] != 3:
        raise DimensionError(f"image must be (H, W, 3), got shape {image.shape}")
    data = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    h, w, _ = data.shape
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_ppm(path):
    """Read a binary P6 PPM back into a (H, W, 3) uint8 array."""
    with open(path, "rb") as f:
        if f.readline().strip() != b"P6":
            raise DimensionError(f"not a P6 PPM: {path}")
        dims = f.readline().split()
        maxval = int(f.readline())
        w, h = int(dims[0]), int(dims[1])
        if maxval != 255:
            raise DimensionError(f"unsupported maxval {maxval}: {path}")
        data = np.frombuffer(f.read(w * h * 3), np.uint8)
    return data.reshape(h, w, 3)


def temporal_consistency_score(grids, masks) -> dict:
    """Per class, mean cosine similarity of class-mean features across
    consecutive frames. Classes not present in both frames of a pair are
    skipped for that pair; classes with no valid pair are omitted."""
    if len(grids) != len(masks):
        raise DimensionError(
            f"{len(grids)} feature maps but {len(masks)} masks"
        )
    means = []
    for g, m in zip(grids, masks):
        g = np.asarray(g, dtype=np.float64)
        m = np.asarray(m)
        if m.shape != g.shape[:2]:
            raise DimensionError(
                f"mask {m.shape} does not align to feature grid {g.shape[:2]}"
            )
        frame_means = {}
        for c in np.unique(m):
            frame_means[int(c)] = g[m == c].mean(axis=0)
        means.append(frame_means)
    sums: dict = {}
    counts: dict = {}
    for prev, cur in zip(means, means[1:]):
        for c in set(prev) & set(cur):
            u, v = prev[c], cur[c]
            nu, nv = np.linalg.norm(u), np.linalg.norm(v)
            if nu < 1e-12 or nv < 1e-12:
                continue
            sums[c] = sums.get(c, 0.0) + float(u @ v / (nu * nv))
            counts[c] = counts.get(c, 0) + 1
    return {c: sums[c] / counts[c] for c in sorted(sums)}
