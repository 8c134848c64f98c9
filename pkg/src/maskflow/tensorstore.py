"""Binary file formats for feature maps and label masks, plus dataset manifests.

Two fixed little-endian formats, pinned by golden fixtures in the test suite:

Feature map (.fmap)
    magic     4 bytes  b"FMAP"
    version   u8       1
    dtype     u8       1 = 32-bit little-endian IEEE-754 float
    ndim      u8       3
    reserved  u8       0
    dims      3 x u32  H, W, C
    payload   H*W*C float32, row-major, channel fastest

Label mask (.lmsk)
    magic        4 bytes  b"LMSK"
    version      u8       1
    num_classes  u16      K
    dims         2 x u32  H, W
    payload      H*W u16 labels, row-major

Reads are pure and thread-safe; writers need exclusive access to their path.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

FMAP_MAGIC = b"FMAP"
LMSK_MAGIC = b"LMSK"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 1

_FMAP_HEADER = struct.Struct("<4sBBBBIII")
_LMSK_HEADER = struct.Struct("<4sBHII")


def write_feature_map(path, grid) -> None:
    """Serialize a (H, W, C) float grid. Rejects non-finite values."""
    grid = np.asarray(grid)
    if grid.ndim != 3:
        raise FormatError(f"feature map must be 3-dimensional, got shape {grid.shape}")
    if any(d < 1 for d in grid.shape):
        raise FormatError(f"feature map dims must be >= 1, got shape {grid.shape}")
    grid = np.ascontiguousarray(grid, dtype="<f4")
    if not np.isfinite(grid).all():
        raise FormatError("non-finite value in feature map")
    h, w, c = grid.shape
    header = _FMAP_HEADER.pack(FMAP_MAGIC, FORMAT_VERSION, DTYPE_FLOAT32, 3, 0, h, w, c)
    with open(path, "wb") as f:
        f.write(header)
        f.write(grid.tobytes())


def read_feature_map(path):
    """Read a .fmap file back into a (H, W, C) float32 array."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _FMAP_HEADER.size or raw[:4] != FMAP_MAGIC:
        raise FormatError(f"not a feature file: {path}")
    magic, version, dtype, ndim, _, h, w, c = _FMAP_HEADER.unpack_from(raw)
    if version != FORMAT_VERSION or dtype != DTYPE_FLOAT32 or ndim != 3:
        raise FormatError(
            f"unsupported feature file (version={version}, dtype={dtype}, ndim={ndim}): {path}"
        )
    expected = _FMAP_HEADER.size + 4 * h * w * c
    if len(raw) != expected:
        raise FormatError(
            f"length mismatch in {path}: expected {expected} bytes, got {len(raw)}"
        )
    grid = np.frombuffer(raw, dtype="<f4", offset=_FMAP_HEADER.size)
    return grid.reshape(h, w, c).copy()


def write_mask(path, mask, num_classes: int) -> None:
    """Serialize a (H, W) integer label mask with its class count K."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise FormatError(f"label mask must be 2-dimensional, got shape {mask.shape}")
    if num_classes < 1:
        raise FormatError(f"num_classes must be >= 1, got {num_classes}")
    if num_classes > 0xFFFF:
        raise FormatError(f"num_classes {num_classes} exceeds u16 range")
    if mask.size and (mask.min() < 0 or mask.max() >= num_classes):
        raise FormatError(
            f"label out of range: labels must lie in [0, {num_classes})"
        )
    data = np.ascontiguousarray(mask, dtype="<u2")
    h, w = data.shape
    header = _LMSK_HEADER.pack(LMSK_MAGIC, FORMAT_VERSION, num_classes, h, w)
    with open(path, "wb") as f:
        f.write(header)
        f.write(data.tobytes())


def read_mask(path):
    """Read a .lmsk file; returns (mask, num_classes)."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _LMSK_HEADER.size or raw[:4] != LMSK_MAGIC:
        raise FormatError(f"not a label mask file: {path}")
    magic, version, num_classes, h, w = _LMSK_HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported label mask version {version}: {path}")
    expected = _LMSK_HEADER.size + 2 * h * w
    if len(raw) != expected:
        raise FormatError(
            f"length mismatch in {path}: expected {expected} bytes, got {len(raw)}"
        )
    mask = np.frombuffer(raw, dtype="<u2", offset=_LMSK_HEADER.size)
    mask = mask.reshape(h, w).astype(np.int64)
    if num_classes < 1:
        raise FormatError(f"invalid num_classes {num_classes}: {path}")
    if mask.size and mask.max() >= num_classes:
        raise FormatError(f"label out of range in {path}")
    return mask, num_classes


def read_mask_header(path):
    """Read only (H, W, num_classes) from a .lmsk file without the payload."""
    with open(path, "rb") as f:
        raw = f.read(_LMSK_HEADER.size)
    if len(raw) < _LMSK_HEADER.size or raw[:4] != LMSK_MAGIC:
        raise FormatError(f"not a label mask file: {path}")
    _, version, num_classes, h, w = _LMSK_HEADER.unpack(raw)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported label mask version {version}: {path}")
    return h, w, num_classes


@dataclass(frozen=True)
class PaletteEntry:
    name: str
    color: tuple  # (r, g, b) 0..255


@dataclass(frozen=True)
class ManifestFrame:
    index: int
    features: str
    image: str | None = None
    mask: str | None = None


@dataclass(frozen=True)
class ManifestVideo:
    video_id: str
    frames: tuple  # ordered ManifestFrame entries


@dataclass
class DatasetManifest:
    name: str
    palette: dict  # label id -> PaletteEntry
    videos: dict = field(default_factory=dict)  # video id -> ManifestVideo
    root: Path = field(default_factory=Path)

    @property
    def num_classes(self) -> int:
        return len(self.palette)

    def resolve(self, relpath: str) -> Path:
        return self.root / relpath

    def video(self, video_id=None) -> ManifestVideo:
        if video_id is None:
            if len(self.videos) != 1:
                raise FormatError(
                    f"manifest has {len(self.videos)} videos; a video id is required"
                )
            return next(iter(self.videos.values()))
        if video_id not in self.videos:
            raise FormatError(f"unknown video id {video_id!r}")
        return self.videos[video_id]


def load_manifest(path) -> DatasetManifest:
    """Load and validate a dataset manifest.

    Validation: JSON well-formed, frame indices strictly increasing per video,
    every referenced path exists, palette ids form the contiguous range
    0..K-1, and every mask file's class count fits inside the palette.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"malformed manifest {path}: {e}") from e

    if not isinstance(doc, dict):
        raise FormatError(f"malformed manifest {path}: top level must be an object")
    root = path.parent

    palette_doc = doc.get("palette")
    if not isinstance(palette_doc, list) or not palette_doc:
        raise FormatError(f"malformed manifest {path}: missing palette")
    palette = {}
    for entry in palette_doc:
        try:
            label = int(entry["label"])
            palette[label] = PaletteEntry(str(entry["name"]), tuple(entry["color"]))
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"malformed palette entry in {path}: {entry!r}") from e
    if sorted(palette) != list(range(len(palette))):
        raise FormatError(
            f"palette gap in {path}: label ids must be exactly 0..{len(palette) - 1}"
        )

    videos_doc = doc.get("videos")
    if not isinstance(videos_doc, list) or not videos_doc:
        raise FormatError(f"malformed manifest {path}: missing videos")
    videos = {}
    for vdoc in videos_doc:
        try:
            vid = str(vdoc["id"])
            frames_doc = vdoc["frames"]
        except (KeyError, TypeError) as e:
            raise FormatError(f"malformed video entry in {path}") from e
        frames = []
        prev_index = None
        for fdoc in frames_doc:
            try:
                frame = ManifestFrame(
                    index=int(fdoc["index"]),
                    features=str(fdoc["features"]),
                    image=fdoc.get("image"),
                    mask=fdoc.get("mask"),
                )
            except (KeyError, TypeError, ValueError) as e:
                raise FormatError(f"malformed frame entry in {path}: {fdoc!r}") from e
            if prev_index is not None and frame.index <= prev_index:
                raise FormatError(
                    f"frame order violation in video {vid!r}: "
                    f"index {frame.index} after {prev_index}"
                )
            prev_index = frame.index
            for rel in (frame.features, frame.image, frame.mask):
                if rel is not None and not (root / rel).exists():
                    raise FileNotFoundError(
                        f"manifest {path} references missing path: {rel}"
                    )
            if frame.mask is not None:
                _, _, k = read_mask_header(root / frame.mask)
                if k > len(palette):
                    raise FormatError(
                        f"palette of {len(palette)} entries cannot cover mask "
                        f"{frame.mask} with {k} classes"
                    )
            frames.append(frame)
        videos[vid] = ManifestVideo(vid, tuple(frames))

    return DatasetManifest(
        name=str(doc.get("dataset", path.stem)),
        palette=palette,
        videos=videos,
        root=root,
    )


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Write a manifest JSON document (paths stored relative to its directory)."""
    doc = {
        "dataset": manifest.name,
        "palette": [
            {"label": label, "name": e.name, "color": list(e.color)}
            for label, e in sorted(manifest.palette.items())
        ],
        "videos": [
            {
                "id": v.video_id,
                "frames": [
                    {
                        k: val
                        for k, val in {
                            "index": f.index,
                            "image": f.image,
                            "features": f.features,
                            "mask": f.mask,
                        }.items()
                        if val is not None
                    }
                    for f in v.frames
                ],
            }
            for v in manifest.videos.values()
        ],
    }
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
