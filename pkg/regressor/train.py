#!/usr/bin/env python3
"""Train the pose-cue regression networks on a synthetic projection dataset.

Usage:
    python train.py --data data/ --out model/ [--kind both|depth|mip]
                    [--epochs N] [--width W] [--seed S]
"""

import argparse
import sys

from poseregressor.training import TrainConfig, save_model, train_net


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", required=True, help="dataset directory (index.json)")
    ap.add_argument("--out", required=True, help="model output directory")
    ap.add_argument("--kind", choices=("both", "depth", "mip"), default="both")
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--width", type=int, default=16)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    kinds = ("depth", "mip") if args.kind == "both" else (args.kind,)
    for kind in kinds:
        cfg = TrainConfig(epochs=args.epochs, width=args.width,
                          alpha=args.alpha, seed=args.seed)
        model, metrics = train_net(args.data, kind, cfg)
        save_model(args.out, kind, model, metrics, cfg)
        print(f"[{kind}] val point {metrics['val_point_px_trainframe']:.2f} px "
              f"(train frame), val angle {metrics['val_angle_deg']:.2f} deg; "
              f"model saved to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
