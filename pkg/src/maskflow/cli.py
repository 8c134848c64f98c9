"""Command-line entry point: track, eval, viz-pca, synth, ablate.

Flag defaults reproduce the reference configuration (tau 0.2, window 50,
memory 10). Every command appends one RunRecord line to runs.jsonl in its
output directory. Exit codes: 0 success, 1 usage/config, 2 data/format,
3 internal. MASKFLOW_THREADS overrides the --workers flag.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import fit_pca, render_pca_rgb, temporal_consistency_score, write_ppm
from .engine import TrackerConfig, track_video_iter
from .errors import ConfigError, FormatError, MaskflowError
from .metrics import aggregate, score_frame
from .synth import SynthConfig, write_dataset
from .tensorstore import (
    load_manifest,
    read_feature_map,
    read_mask,
    write_mask,
)


class _UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _append_run_record(out_dir, record: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    record = {"tool_version": __version__, **record}
    with open(Path(out_dir) / "runs.jsonl", "a", encoding="utf-8") as f:
        f.write(json.dumps(record, sort_keys=True) + "\n")


def _tracker_config(args) -> TrackerConfig:
    return TrackerConfig(
        tau=args.tau,
        window=args.window,
        memory=args.memory,
        memory_mode=args.memory_mode,
        anchor_first_frame=args.anchor_first,
    )


def _add_tracking_flags(p):
    p.add_argument("--tau", type=float, default=0.2)
    p.add_argument("--window", type=int, default=50)
    p.add_argument("--memory", type=int, default=10)
    p.add_argument("--memory-mode", choices=("hard", "soft"), default="hard")
    p.add_argument("--anchor-first", action="store_true", default=False)
    p.add_argument("--workers", type=int, default=1,
                   help="pixel-parallel worker threads (MASKFLOW_THREADS overrides)")


def _run_track_on_video(manifest, video, cfg, workers, first_mask_path=None):
    """Track one manifest video; returns (num_classes, list of (index, mask),
    per-frame seconds)."""
    frames = video.frames
    if first_mask_path is None:
        if frames[0].mask is None:
            raise FormatError(
                f"video {video.video_id!r} has no frame-1 mask and no "
                f"--first-mask was given"
            )
        first_mask_path = manifest.resolve(frames[0].mask)
    first_mask, num_classes = read_mask(first_mask_path)
    features = [read_feature_map(manifest.resolve(f.features)) for f in frames]
    outputs = []
    timings = []
    t_prev = time.perf_counter()
    for pos, (_, labels) in enumerate(
        track_video_iter(features, first_mask, num_classes, cfg, workers), start=1
    ):
        now = time.perf_counter()
        timings.append(now - t_prev)
        t_prev = now
        outputs.append((frames[pos].index, labels))
    return num_classes, outputs, timings


def cmd_track(args) -> int:
    cfg = _tracker_config(args)
    manifest = load_manifest(args.manifest)
    video = manifest.video(args.video)
    out_dir = Path(args.out)
    os.makedirs(out_dir, exist_ok=True)
    num_classes, outputs, timings = _run_track_on_video(
        manifest, video, cfg, args.workers, args.first_mask
    )
    paths = []
    for index, labels in outputs:
        p = out_dir / f"mask_{index:05d}.lmsk"
        write_mask(p, labels, num_classes)
        paths.append(str(p))
    _append_run_record(out_dir, {
        "command": "track",
        "config": {
            "tau": cfg.tau, "window": cfg.window, "memory": cfg.memory,
            "memory_mode": cfg.memory_mode,
            "anchor_first_frame": cfg.anchor_first_frame,
            "workers": args.workers, "video": video.video_id,
        },
        "manifest_sha256": _sha256(args.manifest),
        "per_frame_seconds": timings,
        "outputs": paths,
    })
    print(f"tracked {len(paths)} frames of video {video.video_id!r} -> {out_dir}")
    return 0


def _collect_masks(directory) -> dict:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"not a directory: {d}")
    return {p.name: p for p in sorted(d.glob("*.lmsk"))}


def _score_directories(pred_dir, gt_dir, f_variant, boundary_tol, video_id="video"):
    """Pair predicted and ground-truth masks by filename; ground-truth-only
    files are skipped (the first frame is the given input), prediction-only
    files are an error."""
    preds = _collect_masks(pred_dir)
    gts = _collect_masks(gt_dir)
    extra = sorted(set(preds) - set(gts))
    if extra:
        raise FormatError(
            f"frame-count mismatch: predictions without ground truth: {extra}"
        )
    common = sorted(set(preds) & set(gts))
    if not common:
        raise FormatError(f"no overlapping mask files between {pred_dir} and {gt_dir}")
    scores = []
    for pos, name in enumerate(common, start=2):
        pred, kp = read_mask(preds[name])
        gt, kg = read_mask(gts[name])
        k = max(kp, kg)
        scores.append(score_frame(
            pred, gt, k, video_id=video_id, frame_index=pos,
            f_variant=f_variant, boundary_tolerance=boundary_tol,
        ))
    return scores


def cmd_eval(args) -> int:
    pred_root, gt_root = Path(args.pred), Path(args.gt)
    pred_subdirs = sorted(p for p in pred_root.iterdir() if p.is_dir()) \
        if pred_root.is_dir() else []
    frame_scores = []
    if pred_subdirs and not list(pred_root.glob("*.lmsk")):
        for sub in pred_subdirs:
            gt_sub = gt_root / sub.name
            frame_scores.extend(_score_directories(
                sub, gt_sub, args.f_variant, args.boundary_tol, video_id=sub.name
            ))
    else:
        frame_scores = _score_directories(
            pred_root, gt_root, args.f_variant, args.boundary_tol
        )
    report = aggregate(frame_scores, config={
        "f_variant": args.f_variant, "boundary_tol": args.boundary_tol,
        "pred": str(pred_root), "gt": str(gt_root),
    })
    doc = report.to_json_dict()
    report_path = Path(args.report)
    os.makedirs(report_path.parent or Path("."), exist_ok=True)
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["video", "frame", "J", "F", "P_acc"])
            for fs in report.frames:
                w.writerow([fs.video_id, fs.frame_index,
                            f"{fs.jaccard_mean:.6f}", f"{fs.f_mean:.6f}",
                            f"{fs.pixel_acc:.6f}"])
    _append_run_record(report_path.parent or Path("."), {
        "command": "eval",
        "config": doc["config"],
        "outputs": [str(report_path)],
    })
    print(f"J_m={report.jaccard_mean:.5f} F_m={report.f_mean:.5f} "
          f"P_acc={report.pixel_acc:.5f} ({report.frames_scored} frames)")
    return 0


def cmd_viz_pca(args) -> int:
    feat_dir = Path(args.features)
    paths = sorted(feat_dir.glob("*.fmap"))
    if not paths:
        raise FileNotFoundError(f"no .fmap files in {feat_dir}")
    grids = [read_feature_map(p) for p in paths]
    basis = fit_pca(grids, k=3)
    out_dir = Path(args.out)
    os.makedirs(out_dir, exist_ok=True)
    outputs = []
    for p, g in zip(paths, grids):
        img = render_pca_rgb(g, basis)
        dest = out_dir / (p.stem + ".ppm")
        write_ppm(dest, img)
        outputs.append(str(dest))
    if args.masks:
        mask_paths = sorted(Path(args.masks).glob("*.lmsk"))
        if len(mask_paths) != len(paths):
            raise FormatError(
                f"{len(paths)} feature files but {len(mask_paths)} masks"
            )
        masks = [read_mask(p)[0] for p in mask_paths]
        scores = temporal_consistency_score(grids, masks)
        dest = out_dir / "consistency.json"
        with open(dest, "w", encoding="utf-8") as f:
            json.dump({str(c): v for c, v in scores.items()}, f, indent=2, sort_keys=True)
            f.write("\n")
        outputs.append(str(dest))
    _append_run_record(out_dir, {
        "command": "viz-pca",
        "config": {"features": str(feat_dir),
                   "variance_fractions": basis.variance_fractions.tolist()},
        "outputs": outputs,
    })
    print(f"wrote {len(outputs)} files -> {out_dir}")
    return 0


def cmd_synth(args) -> int:
    try:
        dy, dx = (int(v) for v in args.motion.split(","))
    except ValueError:
        raise _UsageError(f"--motion must be 'dy,dx', got {args.motion!r}")
    cfg = SynthConfig(
        height=args.h, width=args.w, channels=args.c,
        num_classes=args.classes, frames=args.frames,
        noise=args.noise, motion=(dy, dx), seed=args.seed,
    )
    manifest_path = write_dataset(cfg, args.out)
    _append_run_record(args.out, {
        "command": "synth",
        "config": {
            "height": cfg.height, "width": cfg.width, "channels": cfg.channels,
            "num_classes": cfg.num_classes, "frames": cfg.frames,
            "noise": cfg.noise, "motion": list(cfg.motion), "seed": cfg.seed,
        },
        "outputs": [str(manifest_path)],
    })
    print(f"wrote synthetic dataset -> {manifest_path}")
    return 0


_ABLATE_PARAMS = ("tau", "window", "memory")


def cmd_ablate(args) -> int:
    if args.param not in _ABLATE_PARAMS:
        raise _UsageError(
            f"unknown parameter {args.param!r}; choose from {', '.join(_ABLATE_PARAMS)}"
        )
    raw_values = [v for v in args.values.split(",") if v.strip()]
    if not raw_values:
        raise _UsageError("--values must list at least one value")
    cast = float if args.param == "tau" else int
    try:
        values = [cast(v) for v in raw_values]
    except ValueError:
        raise _UsageError(f"--values for {args.param} must be {cast.__name__}s")

    manifest = load_manifest(args.manifest)
    out_dir = Path(args.out)
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for value in values:
        overrides = {args.param: value}
        cfg = TrackerConfig(
            tau=overrides.get("tau", args.tau),
            window=overrides.get("window", args.window),
            memory=overrides.get("memory", args.memory),
            memory_mode=args.memory_mode,
            anchor_first_frame=args.anchor_first,
        )
        frame_scores = []
        for vid, video in sorted(manifest.videos.items()):
            num_classes, outputs, _ = _run_track_on_video(
                manifest, video, cfg, args.workers
            )
            run_dir = out_dir / f"{args.param}={value}" / vid
            os.makedirs(run_dir, exist_ok=True)
            gt_by_index = {f.index: f.mask for f in video.frames}
            for index, labels in outputs:
                write_mask(run_dir / f"mask_{index:05d}.lmsk", labels, num_classes)
                gt_rel = gt_by_index.get(index)
                if gt_rel is None:
                    raise FormatError(
                        f"video {vid!r} frame {index} has no ground-truth mask; "
                        f"ablation needs fully annotated videos"
                    )
                gt, _ = read_mask(manifest.resolve(gt_rel))
                frame_scores.append(score_frame(
                    labels, gt, num_classes, video_id=vid, frame_index=index,
                ))
        report = aggregate(frame_scores, config={args.param: value})
        rows.append((value, report.jaccard_mean, report.f_mean, report.pixel_acc))
        print(f"{args.param}={value}: J_m={report.jaccard_mean:.5f} "
              f"F_m={report.f_mean:.5f} P_acc={report.pixel_acc:.5f}")
    csv_path = out_dir / "ablation.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow([args.param, "J_m", "F_m", "P_acc"])
        for value, j, fm, p in rows:
            w.writerow([value, f"{j:.6f}", f"{fm:.6f}", f"{p:.6f}"])
    _append_run_record(out_dir, {
        "command": "ablate",
        "config": {"param": args.param, "values": values},
        "manifest_sha256": _sha256(args.manifest),
        "outputs": [str(csv_path)],
    })
    print(f"wrote {csv_path}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="maskflow",
        description="Training-free temporal mask tracking over dense feature maps.",
        epilog="Sweeps of upstream extraction parameters (diffusion timestep, "
               "decoder level) require re-extracting features and live in the "
               "extractor tool; ablate covers tau, window and memory.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="propagate a first-frame mask through a video")
    p.add_argument("--manifest", required=True)
    p.add_argument("--video", default=None)
    p.add_argument("--first-mask", default=None,
                   help="frame-1 mask file (defaults to the manifest entry)")
    p.add_argument("--out", required=True)
    _add_tracking_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--f-variant", choices=("pixel", "boundary"), default="pixel")
    p.add_argument("--boundary-tol", type=int, default=1)
    p.add_argument("--report", required=True)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("viz-pca", help="render feature maps as PCA RGB images")
    p.add_argument("--features", required=True)
    p.add_argument("--masks", default=None,
                   help="label masks aligned to the features; adds per-class "
                        "temporal consistency scores to the output")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_viz_pca)

    p = sub.add_parser("synth", help="write a synthetic dataset with exact ground truth")
    p.add_argument("--h", type=int, default=64)
    p.add_argument("--w", type=int, default=64)
    p.add_argument("--c", type=int, default=16)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--motion", default="1,1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ablate", help="sweep one parameter, tracking and scoring per value")
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_tracking_flags(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except _UsageError as e:
        print(f"error [config] {e}", file=sys.stderr)
        return 1
    except ConfigError as e:
        print(f"error [config] {e}", file=sys.stderr)
        return 1
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"error [io] {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error [io] {e}", file=sys.stderr)
        return 2
    except MaskflowError as e:
        code = 2 if e.category in ("format", "dimension") else 3
        print(f"error [{e.category}] {e}", file=sys.stderr)
        return code
    except Exception as e:  # pragma: no cover
        print(f"error [internal] {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
