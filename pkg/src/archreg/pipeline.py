"""End-to-end registration: projection, pose cues, clusters, voting, final pose."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .clusters import augment_stochastic, generate_clusters
from .coherency import final_registration, select_optimal_clusters
from .cues import (PoseCue, ct_cue_frame, heuristic_pose_estimate,
                   initial_transform, model_cue_frame)
from .errors import InputError, PipelineError
from .mesh import TriMesh
from .optimizer import SimplexOptions
from .projection import depth_image
from .similarity import optimize_cluster
from .transforms import RigidTransform
from .volume import CtVolume, mip_project_x

DEFAULT_RADIUS = 10.0  # mm, the accuracy optimum of the radius study


@dataclass
class RegistrationResult:
    initial: RigidTransform
    final: RigidTransform
    base_cluster_count: int
    total_cluster_count: int
    survivors: list
    elimination_log: list
    survivor_errors: dict
    timings: dict = field(default_factory=dict)


def _pick_cue(cues: list, source: str) -> PoseCue:
    for c in cues:
        if c.source == source:
            return c
    raise InputError(f"cue file has no '{source}' cue")


def register(mesh: TriMesh, vol: CtVolume, jaw: str,
             cues: list | None = None,
             cue_pixel_size: float | None = None,
             radius: float = DEFAULT_RADIUS,
             seed: int = 42,
             stochastic: bool = True,
             opts: SimplexOptions | None = None,
             threads: int = 1) -> RegistrationResult:
    """Full pipeline from raw mesh+volume to the optimal rigid transform.

    If `cues` is None both projections run the built-in heuristic estimator.
    `cue_pixel_size` names the depth-image resolution the model cue's pixel
    coordinates refer to, when it differs from the default. Thread count only
    schedules the independent per-cluster optimizations; results are
    identical for any value.
    """
    if jaw not in ("upper", "lower"):
        raise InputError(f"jaw must be 'upper' or 'lower', got {jaw!r}")
    if radius <= 0:
        raise InputError("radius must be positive")
    timings = {}

    t0 = time.perf_counter()
    depth, frame = depth_image(mesh)
    mip = mip_project_x(vol)
    timings["projection"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if cues is None:
        cues = heuristic_pose_estimate(depth, "model_depth") \
            + heuristic_pose_estimate(mip, "ct_mip")
    model_cue = _pick_cue(cues, "model_depth")
    ct_cue = _pick_cue(cues, f"ct_mip_{jaw}")
    cue_depth, cue_frame = depth, frame
    if cue_pixel_size is not None and cue_pixel_size != frame.pixel_size:
        cue_depth, cue_frame = depth_image(mesh, pixel_size=cue_pixel_size)
    model_frame3d = model_cue_frame(cue_frame, model_cue, cue_depth)
    ct_frame3d = ct_cue_frame(mip, vol, ct_cue, jaw)
    base = initial_transform(model_frame3d, ct_frame3d)
    timings["pose"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    clusters = generate_clusters(mesh, depth, frame, radius)
    n_base = len(clusters)
    if stochastic:
        clusters = augment_stochastic(clusters, mesh, radius, seed)
    timings["clusters"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            transforms = list(pool.map(
                lambda c: optimize_cluster(mesh, vol, c, base, opts), clusters))
    else:
        transforms = [optimize_cluster(mesh, vol, c, base, opts) for c in clusters]
    timings["cluster_opt"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    survivors, elim_log, errors = select_optimal_clusters(clusters, transforms, mesh)
    # Consensus pose: the most coherent survivor's locally optimized transform.
    best_survivor = min(survivors, key=lambda i: (errors[i], i))
    consensus = transforms[best_survivor]
    timings["coherency"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    final = final_registration(mesh, vol, [clusters[i] for i in survivors],
                               consensus, opts)
    timings["final"] = time.perf_counter() - t0
    timings["total"] = sum(timings.values())

    return RegistrationResult(
        initial=base,
        final=final,
        base_cluster_count=n_base,
        total_cluster_count=len(clusters),
        survivors=[clusters[i].id for i in survivors],
        elimination_log=[(clusters[i].id, c) for i, c in elim_log],
        survivor_errors={clusters[i].id: errors[i] for i in survivors},
        timings=timings,
    )
