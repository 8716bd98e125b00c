"""Crown-prioritized surface clusters with spaced seeding and stochastic augmentation."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import PipelineError
from .mesh import TriMesh
from .projection import PlaneFrame, vertex_depths
from .transforms import TransformParams
from .volume import Image2D

MIN_CLUSTER_SIZE = 10
CROWN_DEPTH_BAND = 0.30  # fraction of the normalized depth range counted as crown
AUGMENT_PER_CLUSTER = 3
AUGMENT_MAX_ROT = math.radians(10.0)


@dataclass
class Cluster:
    """Connected vertex patch within `radius` mm of its center vertex."""

    center_vertex: int
    radius: float
    members: np.ndarray
    init_perturbation: TransformParams = field(default_factory=TransformParams)
    id: int = -1

    def __post_init__(self):
        self.members = np.asarray(self.members, dtype=np.int64)


def grow_cluster(mesh: TriMesh, center: int, r: float,
                 cluster_id: int = -1,
                 init_perturbation: TransformParams | None = None):
    """Breadth-first cluster growth from a center vertex.

    Admits vertices connected through already-admitted members whose
    Euclidean distance to the center is <= r. Returns None when the grown
    patch has fewer than MIN_CLUSTER_SIZE vertices.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    if not (0 <= center < len(mesh.vertices)):
        raise ValueError("center vertex out of range")
    pts = mesh.vertices
    c = pts[center]
    r2 = r * r
    visited = {center}
    members = [center]
    queue = deque([center])
    while queue:
        v = queue.popleft()
        for nb in mesh.vertex_adjacency[v]:
            nb = int(nb)
            if nb in visited:
                continue
            visited.add(nb)
            d = pts[nb] - c
            if d @ d <= r2:
                members.append(nb)
                queue.append(nb)
    if len(members) < MIN_CLUSTER_SIZE:
        return None
    return Cluster(center, r, np.array(members, dtype=np.int64),
                   init_perturbation or TransformParams(), cluster_id)


def generate_clusters(mesh: TriMesh, depth: Image2D, frame: PlaneFrame,
                      r: float) -> list:
    """Seed clusters from the crown band with centers at least r apart.

    Seeds are vertices whose normalized projection depth falls in the lowest
    CROWN_DEPTH_BAND of the range, visited in ascending depth order; a seed
    is accepted when it keeps its distance to every earlier accepted center
    >= r, then grown with grow_cluster.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    depths = vertex_depths(mesh, frame)
    span = depths.max() - depths.min()
    if span <= 0:
        dnorm = np.zeros_like(depths)
    else:
        dnorm = (depths - depths.min()) / span
    candidates = np.where(dnorm <= CROWN_DEPTH_BAND)[0]
    order = np.lexsort((candidates, dnorm[candidates]))
    candidates = candidates[order]

    pts = mesh.vertices
    accepted_pos = np.empty((0, 3))
    clusters = []
    for seed in candidates:
        p = pts[seed]
        if len(accepted_pos) and np.min(np.linalg.norm(accepted_pos - p, axis=1)) < r:
            continue
        accepted_pos = np.vstack([accepted_pos, p])
        cl = grow_cluster(mesh, int(seed), r, cluster_id=len(clusters))
        if cl is not None:
            clusters.append(cl)
    if not clusters:
        raise PipelineError("mesh too small for radius")
    for i, cl in enumerate(clusters):
        cl.id = i
    return clusters


def clusters_to_json(clusters: list, mesh: TriMesh) -> list:
    """Debug summary of a cluster set (id, center, radius, size, perturbation)."""
    out = []
    for c in clusters:
        p = c.init_perturbation
        out.append({
            "id": int(c.id),
            "center_vertex": int(c.center_vertex),
            "center_mm": [float(x) for x in mesh.vertices[c.center_vertex]],
            "radius_mm": float(c.radius),
            "member_count": int(len(c.members)),
            "init_perturbation": [p.rx, p.ry, p.rz, p.tx, p.ty, p.tz],
        })
    return out


def augment_stochastic(clusters: list, mesh: TriMesh, r: float, seed: int) -> list:
    """Add AUGMENT_PER_CLUSTER stochastic siblings per base cluster.

    Each sibling re-centers at the mesh vertex nearest to a uniform random
    offset (< r) from the base center, keeps zero translation, and starts
    its local optimization from independent uniform rotations within
    +/- AUGMENT_MAX_ROT per axis. A failed re-center (no valid cluster, or
    snapped beyond r) falls back to the base center. Reproducible from seed.
    """
    rng = np.random.default_rng(seed)
    tree = cKDTree(mesh.vertices)
    out = list(clusters)
    next_id = len(clusters)
    for base in clusters:
        base_pos = mesh.vertices[base.center_vertex]
        for _ in range(AUGMENT_PER_CLUSTER):
            direction = rng.normal(size=3)
            nrm = np.linalg.norm(direction)
            direction = direction / nrm if nrm > 1e-12 else np.array([1.0, 0.0, 0.0])
            length = rng.uniform(0.0, r)
            angles = rng.uniform(-AUGMENT_MAX_ROT, AUGMENT_MAX_ROT, size=3)
            perturb = TransformParams(angles[0], angles[1], angles[2], 0.0, 0.0, 0.0)

            _, snapped = tree.query(base_pos + direction * length)
            snapped = int(snapped)
            cl = None
            if np.linalg.norm(mesh.vertices[snapped] - base_pos) < r:
                cl = grow_cluster(mesh, snapped, r, cluster_id=next_id,
                                  init_perturbation=perturb)
            if cl is None:
                cl = Cluster(base.center_vertex, r, base.members.copy(),
                             perturb, next_id)
            out.append(cl)
            next_id += 1
    return out
