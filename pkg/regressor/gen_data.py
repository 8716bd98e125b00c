#!/usr/bin/env python3
"""Build a synthetic projection dataset by driving the registration CLI.

Each sample directory holds the files the `archreg phantom` and
`archreg project` subcommands wrote (volume, mesh, truth, depth.pgm,
mip.pgm); this script only shells out to the CLI and indexes the results.

Usage:
    python gen_data.py --out data/ --count 256 [--base-seed 9000] [--spacing 0.5]
"""

import argparse
import json
import math
import os
import subprocess
import sys

import numpy as np


def make_config(rng, seed: int, spacing: float) -> dict:
    jaw = "lower" if seed % 2 == 0 else "upper"
    gt = list(rng.uniform(-math.radians(15), math.radians(15), 3)) \
        + list(rng.uniform(-10.0, 10.0, 3))
    return {
        "seed": seed,
        "jaw": jaw,
        "spacing": spacing,
        "arch_width": float(rng.uniform(58.0, 66.0)),
        "arch_depth": float(rng.uniform(50.0, 58.0)),
        "artifact_tooth_fraction": float(rng.choice([0.0, 0.15, 0.3])),
        "mesh_noise_sigma": float(rng.choice([0.0, 0.05])),
        "gt_params": [float(x) for x in gt],
    }


def run_cli(args):
    cmd = ["archreg"] + args
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"{' '.join(cmd)} failed:\n{proc.stderr}")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--count", type=int, default=256)
    ap.add_argument("--base-seed", type=int, default=9000)
    ap.add_argument("--spacing", type=float, default=0.5)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.base_seed)
    os.makedirs(args.out, exist_ok=True)
    samples = []
    for i in range(args.count):
        name = f"sample_{i:04d}"
        sample_dir = os.path.join(args.out, name)
        cfg = make_config(rng, args.base_seed + i, args.spacing)
        if not os.path.exists(os.path.join(sample_dir, "mip.json")):
            os.makedirs(sample_dir, exist_ok=True)
            cfg_path = os.path.join(sample_dir, "config.json")
            with open(cfg_path, "w") as fh:
                json.dump(cfg, fh)
            run_cli(["phantom", "--config", cfg_path, "--out-dir", sample_dir])
            run_cli(["project", "--mesh", os.path.join(sample_dir, "mesh.obj"),
                     "--ct", os.path.join(sample_dir, "volume.hdr"),
                     "--out-dir", sample_dir])
            # The voxel volumes dominate disk use and training never reads them.
            for heavy in ("volume.raw", "volume.hdr"):
                path = os.path.join(sample_dir, heavy)
                if os.path.exists(path):
                    os.remove(path)
        samples.append({"dir": name, "jaw": cfg["jaw"]})
        if (i + 1) % 25 == 0:
            print(f"{i + 1}/{args.count} samples done")
    with open(os.path.join(args.out, "index.json"), "w") as fh:
        json.dump({"samples": samples}, fh, indent=2)
        fh.write("\n")
    print(f"dataset index written to {args.out}/index.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
