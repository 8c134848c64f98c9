"""Segmentation quality metrics: Jaccard, F-score (pixel and boundary), accuracy.

Per-class values use np.nan for classes excluded from a frame (absent from
both prediction and ground truth); means are taken over evaluated classes
only. Aggregation averages frames within a video, then videos with equal
weight.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError


def _check_pair(pred, gt):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise DimensionError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    if pred.ndim != 2:
        raise DimensionError(f"masks must be 2-dimensional, got shape {pred.shape}")
    return pred, gt


def _confusion(pred, gt, num_classes):
    idx = gt.astype(np.int64).ravel() * num_classes + pred.astype(np.int64).ravel()
    return np.bincount(idx, minlength=num_classes * num_classes).reshape(
        num_classes, num_classes
    )


def jaccard_per_class(pred, gt, num_classes: int):
    """Per-class intersection over union; nan where the union is empty."""
    pred, gt = _check_pair(pred, gt)
    conf = _confusion(pred, gt, num_classes)
    tp = np.diag(conf).astype(np.float64)
    fp = conf.sum(axis=0) - tp
    fn = conf.sum(axis=1) - tp
    union = tp + fp + fn
    with np.errstate(invalid="ignore", divide="ignore"):
        j = np.where(union > 0, tp / union, np.nan)
    return j


def pixel_f_score(pred, gt, num_classes: int):
    """Per-class pixel F1 = 2TP / (2TP + FP + FN); nan where the union is empty."""
    pred, gt = _check_pair(pred, gt)
    conf = _confusion(pred, gt, num_classes)
    tp = np.diag(conf).astype(np.float64)
    fp = conf.sum(axis=0) - tp
    fn = conf.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(denom > 0, 2 * tp / denom, np.nan)
    return f


def _boundary_map(binary):
    """Pixels of a binary region with at least one differing 4-neighbour."""
    b = np.zeros_like(binary, dtype=bool)
    b[:-1, :] |= binary[:-1, :] != binary[1:, :]
    b[1:, :] |= binary[1:, :] != binary[:-1, :]
    b[:, :-1] |= binary[:, :-1] != binary[:, 1:]
    b[:, 1:] |= binary[:, 1:] != binary[:, :-1]
    return b & binary


def _chebyshev_dilate(mask, radius: int):
    if radius <= 0:
        return mask.copy()
    h, w = mask.shape
    out = np.zeros_like(mask)
    for dy in range(-radius, radius + 1):
        ys = slice(max(0, dy), min(h, h + dy))
        yd = slice(max(0, -dy), min(h, h - dy))
        for dx in range(-radius, radius + 1):
            xs = slice(max(0, dx), min(w, w + dx))
            xd = slice(max(0, -dx), min(w, w - dx))
            out[yd, xd] |= mask[ys, xs]
    return out


def boundary_f_score(pred, gt, num_classes: int, tolerance_px: int = 1):
    """Per-class contour F-measure with Chebyshev pixel tolerance.

    Boundary pixels are 4-connectivity label transitions. Precision counts
    predicted boundary pixels within tolerance of the ground-truth boundary,
    recall the converse. Classes whose boundaries are empty on both sides are
    excluded (nan).
    """
    pred, gt = _check_pair(pred, gt)
    if tolerance_px < 0:
        raise DimensionError(f"tolerance must be >= 0, got {tolerance_px}")
    out = np.full(num_classes, np.nan)
    for c in range(num_classes):
        pb = _boundary_map(pred == c)
        gb = _boundary_map(gt == c)
        np_, ng = pb.sum(), gb.sum()
        if np_ == 0 and ng == 0:
            continue
        if np_ == 0 or ng == 0:
            out[c] = 0.0
            continue
        gd = _chebyshev_dilate(gb, tolerance_px)
        pd = _chebyshev_dilate(pb, tolerance_px)
        precision = (pb & gd).sum() / np_
        recall = (gb & pd).sum() / ng
        out[c] = 0.0 if precision + recall == 0 else \
            2 * precision * recall / (precision + recall)
    return out


def pixel_accuracy(pred, gt) -> float:
    """Fraction of matching pixels over all classes."""
    pred, gt = _check_pair(pred, gt)
    return float((pred == gt).mean())


@dataclass(frozen=True)
class FrameScore:
    """Scores of one predicted frame against its ground truth."""

    video_id: str
    frame_index: int
    jaccard: np.ndarray  # (K,) with nan for excluded classes
    f_score: np.ndarray  # (K,) same convention
    pixel_acc: float
    gt_classes: tuple  # classes present in the ground truth

    @property
    def jaccard_mean(self) -> float:
        return float(np.nanmean(self.jaccard))

    @property
    def f_mean(self) -> float:
        return float(np.nanmean(self.f_score))


def score_frame(pred, gt, num_classes: int, *, video_id: str = "video",
                frame_index: int = 2, f_variant: str = "pixel",
                boundary_tolerance: int = 1) -> FrameScore:
    """Score one frame with the chosen F variant ('pixel' or 'boundary')."""
    if f_variant == "pixel":
        f = pixel_f_score(pred, gt, num_classes)
    elif f_variant == "boundary":
        f = boundary_f_score(pred, gt, num_classes, boundary_tolerance)
    else:
        raise DimensionError(f"unknown f_variant {f_variant!r}")
    return FrameScore(
        video_id=video_id,
        frame_index=frame_index,
        jaccard=jaccard_per_class(pred, gt, num_classes),
        f_score=f,
        pixel_acc=pixel_accuracy(pred, gt),
        gt_classes=tuple(np.unique(np.asarray(gt)).tolist()),
    )


@dataclass(frozen=True)
class VideoScore:
    video_id: str
    jaccard_mean: float
    f_mean: float
    pixel_acc: float
    frames_scored: int


@dataclass
class EvalReport:
    """Dataset-level means over equally weighted per-video means."""

    jaccard_mean: float
    f_mean: float
    pixel_acc: float
    videos: dict  # video id -> VideoScore
    frames: list = field(default_factory=list)  # FrameScore entries
    config: dict = field(default_factory=dict)

    @property
    def frames_scored(self) -> int:
        return sum(v.frames_scored for v in self.videos.values())

    def to_json_dict(self) -> dict:
        return {
            "dataset": {
                "J_m": self.jaccard_mean,
                "F_m": self.f_mean,
                "P_acc": self.pixel_acc,
                "videos": len(self.videos),
                "frames_scored": self.frames_scored,
            },
            "videos": {
                vid: {
                    "J_m": v.jaccard_mean,
                    "F_m": v.f_mean,
                    "P_acc": v.pixel_acc,
                    "frames_scored": v.frames_scored,
                }
                for vid, v in sorted(self.videos.items())
            },
            "frames": [
                {
                    "video": fs.video_id,
                    "index": fs.frame_index,
                    "J": fs.jaccard_mean,
                    "F": fs.f_mean,
                    "P_acc": fs.pixel_acc,
                }
                for fs in self.frames
            ],
            "config": self.config,
        }


def aggregate(frames, config: dict | None = None) -> EvalReport:
    """Frame scores -> per-video means -> equally weighted dataset means.

    Frame 1 entries are the user-provided input and are dropped; videos left
    with no scored frames are excluded with a warning.
    """
    frames = list(frames)
    if not frames:
        raise DimensionError("no frame scores to aggregate")
    by_video: dict = {}
    for fs in frames:
        if fs.frame_index == 1:
            warnings.warn(
                f"frame 1 of video {fs.video_id!r} is the given input; excluded",
                stacklevel=2,
            )
            continue
        by_video.setdefault(fs.video_id, []).append(fs)
    videos = {}
    kept_frames = []
    for vid, group in by_video.items():
        if not group:
            continue
        group.sort(key=lambda fs: fs.frame_index)
        videos[vid] = VideoScore(
            video_id=vid,
            jaccard_mean=float(np.mean([fs.jaccard_mean for fs in group])),
            f_mean=float(np.mean([fs.f_mean for fs in group])),
            pixel_acc=float(np.mean([fs.pixel_acc for fs in group])),
            frames_scored=len(group),
        )
        kept_frames.extend(group)
    if not videos:
        warnings.warn("no videos with scored frames", stacklevel=2)
        raise DimensionError("nothing evaluated: every video had only frame 1")
    return EvalReport(
        jaccard_mean=float(np.mean([v.jaccard_mean for v in videos.values()])),
        f_mean=float(np.mean([v.f_mean for v in videos.values()])),
        pixel_acc=float(np.mean([v.pixel_acc for v in videos.values()])),
        videos=videos,
        frames=kept_frames,
        config=dict(config or {}),
    )
