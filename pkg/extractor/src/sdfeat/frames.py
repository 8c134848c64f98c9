"""Frame loading and padding."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .config import PAD_MULTIPLE, ExtractError, pad_amounts

FRAME_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def list_frames(frames_dir):
    d = Path(frames_dir)
    if not d.is_dir():
        raise FileNotFoundError(f"not a directory: {d}")
    paths = sorted(p for p in d.iterdir() if p.suffix.lower() in FRAME_SUFFIXES)
    if not paths:
        raise ExtractError(f"no frame images in {d}")
    return paths


def load_frame(path):
    """RGB float32 array in [0, 1], shape (H, W, 3)."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return arr


def pad_frame(frame, multiple: int = PAD_MULTIPLE):
    """Center-pad with zeros to the next multiple; returns (padded, pads)."""
    h, w = frame.shape[:2]
    top, bottom, left, right = pad_amounts(h, w, multiple)
    if (top, bottom, left, right) == (0, 0, 0, 0):
        return frame, (0, 0, 0, 0)
    padded = np.pad(frame, ((top, bottom), (left, right), (0, 0)))
    return padded, (top, bottom, left, right)
