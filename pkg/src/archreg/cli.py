"""Command-line interface: phantom, project, pose, register, evaluate, benchmark, sweep."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import evaluate, fileio, figures, phantom
from .cues import heuristic_pose_estimate, save_pose_cues, load_pose_cues
from .errors import InputError, PipelineError
from .evaluate import (RegistrationReport, landmark_error, load_report,
                       radius_sweep, report_from_result, save_sweep_csv)
from .icp import ISO_THRESHOLD, PointCloud, extract_isosurface, icp
from .mesh import load_mesh, save_obj
from .optimizer import SimplexOptions
from .phantom import PhantomConfig, generate_phantom, load_truth, save_truth
from .pipeline import register
from .projection import depth_image
from .transforms import TransformParams, transform_to_params
from .volume import mip_project_x


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _phantom_config_from_json(path) -> PhantomConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise InputError(f"{path}: cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON: {e}") from e
    cfg = PhantomConfig()
    for key, value in doc.items():
        if key == "gt_params":
            value = TransformParams.from_array(value)
        elif key in ("tooth_width_range", "tooth_depth_range", "tooth_height_range"):
            value = tuple(value)
        if not hasattr(cfg, key):
            raise InputError(f"{path}: unknown config field '{key}'")
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def cmd_phantom(args) -> int:
    cfg = _phantom_config_from_json(args.config) if args.config else PhantomConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    os.makedirs(args.out_dir, exist_ok=True)
    vol, mesh, truth = generate_phantom(cfg)
    fileio.save_volume(os.path.join(args.out_dir, "volume.hdr"), vol)
    save_obj(os.path.join(args.out_dir, "mesh.obj"), mesh)
    save_truth(os.path.join(args.out_dir, "truth.json"), truth, cfg)
    save_pose_cues(os.path.join(args.out_dir, "cues.json"), truth.gt_cues)
    print(f"phantom written to {args.out_dir} "
          f"(dims {vol.dims}, {len(mesh.vertices)} vertices, seed {cfg.seed})")
    return 0


def cmd_project(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    wrote = []
    if args.mesh:
        mesh = load_mesh(args.mesh)
        img, frame = depth_image(mesh, pixel_size=args.pixel_size)
        out = os.path.join(args.out_dir, "depth.pgm")
        fileio.save_image_pgm(out, img, meta={"kind": "depth", "frame": frame.to_dict(),
                                              "source": str(args.mesh)})
        wrote.append(out)
    if args.ct:
        vol = fileio.load_volume(args.ct)
        img = mip_project_x(vol)
        out = os.path.join(args.out_dir, "mip.pgm")
        fileio.save_image_pgm(out, img, meta={"kind": "mip", "source": str(args.ct)})
        wrote.append(out)
    if not wrote:
        raise InputError("project needs --mesh and/or --ct")
    print("wrote " + ", ".join(wrote))
    return 0


def cmd_pose(args) -> int:
    img, meta = fileio.load_image_pgm(args.image)
    kind = "model_depth" if args.kind == "depth" else "ct_mip"
    cues = heuristic_pose_estimate(img, kind)
    frame = None
    if meta.get("frame"):
        from .projection import PlaneFrame
        frame = PlaneFrame.from_dict(meta["frame"])
    save_pose_cues(args.out, cues, frame=frame, image_ref=str(args.image))
    for c in cues:
        print(f"{c.source}: point=({c.point[0]:.1f}, {c.point[1]:.1f}) px, "
              f"angle={math.degrees(c.angle):.1f} deg")
    return 0


def _simplex_options(args) -> SimplexOptions:
    opts = SimplexOptions()
    if getattr(args, "tol_f", None) is not None:
        opts.tol_f = args.tol_f
    if getattr(args, "tol_x", None) is not None:
        opts.tol_x = args.tol_x
    if getattr(args, "max_evals", None) is not None:
        opts.max_evals = args.max_evals
    return opts


def _apply_run_config(args) -> None:
    """--config run.json supplies defaults for flags the user did not pass."""
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise InputError(f"{args.config}: cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{args.config}: invalid JSON: {e}") from e
    for key in ("radius", "seed", "threads", "tol_f", "tol_x", "max_evals", "jaw", "cues"):
        if key in doc and getattr(args, key, None) is None:
            setattr(args, key, doc[key])
    if "stochastic" in doc and args.stochastic is None:
        args.stochastic = bool(doc["stochastic"])


def _register_config_echo(args, radius, seed, stochastic, threads) -> dict:
    return {
        "ct": str(args.ct), "mesh": str(args.mesh), "jaw": args.jaw,
        "cues": str(args.cues) if args.cues else None,
        "radius": radius, "seed": seed, "stochastic": stochastic,
        "threads": threads,
    }


def cmd_register(args) -> int:
    _apply_run_config(args)
    if args.jaw is None:
        raise InputError("--jaw is required (upper or lower)")
    radius = args.radius if args.radius is not None else 10.0
    if radius <= 0:
        raise InputError("--radius must be positive")
    seed = args.seed if args.seed is not None else 42
    threads = args.threads if args.threads is not None else 1
    stochastic = True if args.stochastic is None else args.stochastic

    mesh = load_mesh(args.mesh)
    vol = fileio.load_volume(args.ct)
    cues = None
    cue_pixel_size = None
    if args.cues:
        cues, cue_frame, _ref = load_pose_cues(args.cues)
        if cue_frame is not None:
            cue_pixel_size = cue_frame.pixel_size
    opts = _simplex_options(args)

    result = register(mesh, vol, args.jaw, cues=cues, cue_pixel_size=cue_pixel_size,
                      radius=radius, seed=seed, stochastic=stochastic, opts=opts,
                      threads=threads)
    if args.clusters_out:
        from .clusters import augment_stochastic, clusters_to_json, generate_clusters
        depth_img, frame = depth_image(mesh)
        cl = generate_clusters(mesh, depth_img, frame, radius)
        if stochastic:
            cl = augment_stochastic(cl, mesh, radius, seed)
        with open(args.clusters_out, "w") as fh:
            json.dump({"clusters": clusters_to_json(cl, mesh)}, fh, indent=2)
            fh.write("\n")
    method = "cluster" if stochastic else "cluster_no_stochastic"
    report = report_from_result(result, method, seed,
                                _register_config_echo(args, radius, seed, stochastic, threads))
    if args.truth:
        truth = load_truth(args.truth)
        report.attach_landmarks(truth.landmarks, truth.gt_transform)
    report.save(args.out)
    msg = f"final params {['%.4f' % x for x in report.final_params]}"
    if report.mean_landmark_mm is not None:
        msg += f", mean landmark error {report.mean_landmark_mm:.3f} mm"
    print(msg)
    print(f"report written to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    report = load_report(args.report)
    truth = load_truth(args.truth)
    report.attach_landmarks(truth.landmarks, truth.gt_transform)
    print(f"mean landmark error: {report.mean_landmark_mm:.4f} mm")
    if args.out:
        report.save(args.out)
    if args.plot:
        figures.landmark_figure(report.per_landmark_mm, args.plot)
        print(f"figure written to {args.plot}")
    return 0


def cmd_benchmark(args) -> int:
    mesh = load_mesh(args.mesh)
    vol = fileio.load_volume(args.ct)
    truth = load_truth(args.truth)
    cues = truth.gt_cues
    if args.cues:
        cues, _f, _r = load_pose_cues(args.cues)
    seed = args.seed if args.seed is not None else 42
    radius = args.radius if args.radius is not None else 10.0
    threads = args.threads if args.threads is not None else 1
    os.makedirs(args.out_dir, exist_ok=True)

    table = []
    for method, stochastic in (("cluster", True), ("cluster_no_stochastic", False)):
        t0 = time.perf_counter()
        result = register(mesh, vol, args.jaw, cues=cues, radius=radius,
                          seed=seed, stochastic=stochastic, threads=threads)
        runtime = time.perf_counter() - t0
        _per, mean = landmark_error(truth.landmarks, result.final, truth.gt_transform)
        table.append({"method": method, "mean_error_mm": mean, "runtime_s": runtime})
        initial = result.initial

    t0 = time.perf_counter()
    iso = extract_isosurface(vol, ISO_THRESHOLD)
    est, _history = icp(PointCloud(mesh.vertices), iso, initial)
    runtime = time.perf_counter() - t0
    _per, mean = landmark_error(truth.landmarks, est, truth.gt_transform)
    table.append({"method": "icp", "mean_error_mm": mean, "runtime_s": runtime})

    csv_path = os.path.join(args.out_dir, "benchmark.csv")
    with open(csv_path, "w") as fh:
        fh.write("method,mean_error_mm,runtime_s\n")
        for row in table:
            fh.write(f"{row['method']},{row['mean_error_mm']:.6f},{row['runtime_s']:.3f}\n")
    figures.benchmark_figure(table, os.path.join(args.out_dir, "benchmark.png"))
    for row in table:
        print(f"{row['method']:>24}: {row['mean_error_mm']:.3f} mm "
              f"({row['runtime_s']:.1f} s)")
    print(f"table written to {csv_path}")
    return 0


def cmd_sweep(args) -> int:
    radii = [float(r) for r in args.radii.split(",")]
    os.makedirs(args.out_dir, exist_ok=True)
    rng = np.random.default_rng(args.base_seed)
    configs = []
    for i in range(args.phantoms):
        gt = TransformParams(
            *rng.uniform(-math.radians(15), math.radians(15), size=3),
            *rng.uniform(-10, 10, size=3))
        configs.append(PhantomConfig(seed=args.base_seed + i, gt_params=gt,
                                     artifact_tooth_fraction=args.artifact_fraction))

    cache = {}

    def run_one(cfg, radius):
        if cfg.seed not in cache:
            cache[cfg.seed] = generate_phantom(cfg)
        vol, mesh, truth = cache[cfg.seed]
        t0 = time.perf_counter()
        result = register(mesh, vol, cfg.jaw, cues=truth.gt_cues, radius=radius,
                          seed=cfg.seed, threads=args.threads or 1)
        runtime = time.perf_counter() - t0
        _per, mean = landmark_error(truth.landmarks, result.final, truth.gt_transform)
        return mean, runtime

    rows = radius_sweep(configs, radii, run_one)
    csv_path = os.path.join(args.out_dir, "sweep.csv")
    save_sweep_csv(csv_path, rows)
    figures.sweep_figure(rows, os.path.join(args.out_dir, "sweep.png"))
    for r in radii:
        sub = [row["mean_error_mm"] for row in rows if row["radius_mm"] == r]
        print(f"r={r:5.1f} mm: mean error {np.mean(sub):.3f} mm over {len(sub)} phantoms")
    print(f"sweep written to {csv_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="archreg",
        description="Rigid registration of scanned dental arches to CT volumes")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic phantom pair")
    p.add_argument("--config", help="phantom config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("project", help="depth / MIP projection images")
    p.add_argument("--mesh")
    p.add_argument("--ct")
    p.add_argument("--pixel-size", type=float, default=0.25)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("pose", help="heuristic pose cues from a projection image")
    p.add_argument("--image", required=True)
    p.add_argument("--kind", choices=("depth", "mip"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pose)

    p = sub.add_parser("register", help="run the full registration pipeline")
    p.add_argument("--ct", required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--jaw", choices=("upper", "lower"))
    p.add_argument("--cues")
    p.add_argument("--truth", help="optional truth JSON to attach landmark errors")
    p.add_argument("--radius", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--no-stochastic", dest="stochastic", action="store_false", default=None)
    p.add_argument("--tol-f", type=float, dest="tol_f")
    p.add_argument("--tol-x", type=float, dest="tol_x")
    p.add_argument("--max-evals", type=int, dest="max_evals")
    p.add_argument("--config", help="run config JSON supplying flag defaults")
    p.add_argument("--clusters-out", dest="clusters_out",
                   help="also dump the cluster set as JSON (debugging)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("evaluate", help="landmark error of a report against truth")
    p.add_argument("--report", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out")
    p.add_argument("--plot", help="write a per-landmark error figure (PNG)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="cluster method vs no-stochastic vs ICP")
    p.add_argument("--ct", required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--jaw", choices=("upper", "lower"), required=True)
    p.add_argument("--cues")
    p.add_argument("--radius", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("sweep", help="cluster-radius study over phantoms")
    p.add_argument("--radii", default="5,10,20,30")
    p.add_argument("--phantoms", type=int, default=10)
    p.add_argument("--artifact-fraction", type=float, default=0.3)
    p.add_argument("--base-seed", type=int, default=1000)
    p.add_argument("--threads", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except InputError as e:
        return _fail(2, str(e))
    except FileNotFoundError as e:
        return _fail(2, str(e))
    except (PipelineError, ValueError) as e:
        return _fail(3, str(e))


if __name__ == "__main__":
    sys.exit(main())
