#!/usr/bin/env python3
"""Regress pose cues from a projection image and write the cue JSON.

Usage:
    python infer.py --model model/ --image img.pgm --kind depth|mip --out cues.json
"""

import argparse
import math
import sys

from poseregressor.inference import infer_to_json


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", required=True)
    ap.add_argument("--image", required=True)
    ap.add_argument("--kind", choices=("depth", "mip"), required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    doc = infer_to_json(args.model, args.image, args.kind, args.out)
    for cue in doc["cues"]:
        print(f"{cue['source']}: point=({cue['point_px'][0]:.1f}, "
              f"{cue['point_px'][1]:.1f}) px, "
              f"angle={math.degrees(cue['angle_rad']):.2f} deg")
    return 0


if __name__ == "__main__":
    sys.exit(main())
