"""Command line: sdfeat extract --frames DIR --backbone sd-2.1 --out DIR ..."""

from __future__ import annotations

import argparse
import sys

from .config import KNOWN_BACKBONES, ExtractConfig, ExtractError, WeightsError
from .extract import extract_features


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sdfeat",
        description="Dense per-frame feature extraction from pretrained backbones.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="extract features for every frame image")
    p.add_argument("--frames", required=True, help="directory of frame images")
    p.add_argument("--backbone", default="sd-2.1",
                   help=f"one of: {', '.join(KNOWN_BACKBONES)}")
    p.add_argument("--timestep", type=int, default=200)
    p.add_argument("--level", type=int, default=3,
                   help="UNet decoder level 1..4 (diffusion backbones)")
    p.add_argument("--prompt", default="", help="text conditioning; empty = null prompt")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", default=None,
                   help="local checkpoint directory (required for pretrained backbones)")
    p.add_argument("--device", default="cpu")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExtractConfig(
            backbone=args.backbone, timestep=args.timestep, level=args.level,
            prompt=args.prompt, seed=args.seed, weights=args.weights,
            device=args.device,
        )
        fragment = extract_features(args.frames, cfg, args.out)
    except WeightsError as e:
        print(f"error [weights] {e}", file=sys.stderr)
        return 2
    except ExtractError as e:
        print(f"error [config] {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error [io] {e}", file=sys.stderr)
        return 2
    print(f"wrote features and manifest fragment -> {fragment}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
