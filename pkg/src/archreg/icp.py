"""Baseline comparison method: iso-surface extraction plus classic point-to-point ICP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from skimage import measure

from .errors import PipelineError
from .transforms import RigidTransform, apply, compose
from .volume import CtVolume

ISO_THRESHOLD = 1000.0  # HU level separating bone/teeth from soft tissue


@dataclass
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)

    def __len__(self):
        return len(self.points)


def extract_isosurface(vol: CtVolume, iso: float = ISO_THRESHOLD) -> PointCloud:
    """Marching-cubes vertices of the iso level set, in world mm.

    Triangles are discarded; the ICP baseline only needs target points.
    """
    lo, hi = float(vol.data.min()), float(vol.data.max())
    if not (lo < iso < hi):
        raise PipelineError(f"iso level {iso} outside volume range [{lo}, {hi}]")
    verts, _faces, _normals, _values = measure.marching_cubes(
        vol.data, level=iso, spacing=tuple(vol.spacing))
    if len(verts) == 0:
        raise PipelineError("empty iso level set")
    return PointCloud(verts + vol.origin)


def best_fit_transform(source: np.ndarray, target: np.ndarray) -> RigidTransform:
    """Closed-form least-squares rigid fit (cross-covariance + SVD)."""
    cs = source.mean(axis=0)
    ct = target.mean(axis=0)
    h = (source - cs).T @ (target - ct)
    u, _s, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(r, ct - r @ cs)


def icp(source: PointCloud, target: PointCloud, init: RigidTransform,
        max_iter: int = 100, tol: float = 1e-6):
    """Point-to-point ICP from an initial pose.

    No outlier trimming: the baseline is deliberately artifact-sensitive.
    Returns (transform, rms_history); the RMS correspondence error is
    non-increasing across iterations.
    """
    if len(source) == 0 or len(target) == 0:
        raise ValueError("point clouds must be nonempty")
    tree = cKDTree(target.points)
    current = init
    rms_history = []
    prev_rms = None
    for _ in range(max_iter):
        moved = apply(current, source.points)
        dists, idx = tree.query(moved)
        rms = float(np.sqrt(np.mean(dists ** 2)))
        rms_history.append(rms)
        step = best_fit_transform(moved, target.points[idx])
        current = compose(step, current)
        if prev_rms is not None and abs(prev_rms - rms) < tol:
            break
        prev_rms = rms
    return current, rms_history
