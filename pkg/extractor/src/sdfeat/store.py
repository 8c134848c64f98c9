"""Feature-map file writer.

Independent implementation of the binary contract consumed by the tracking
engine; the two packages share only bytes, never code. Layout:

    magic "FMAP" | version u8=1 | dtype u8=1 (f32 LE) | ndim u8=3 |
    reserved u8=0 | H, W, C as u32 LE | H*W*C float32, channel fastest
"""

from __future__ import annotations

import struct

import numpy as np

from .config import ExtractError

_HEADER = struct.Struct("<4sBBBBIII")


def write_feature_map(path, grid) -> None:
    grid = np.ascontiguousarray(grid, dtype="<f4")
    if grid.ndim != 3:
        raise ExtractError(f"feature grid must be 3-dimensional, got {grid.shape}")
    if not np.isfinite(grid).all():
        raise ExtractError("non-finite value in extracted features")
    h, w, c = grid.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(b"FMAP", 1, 1, 3, 0, h, w, c))
        f.write(grid.tobytes())
