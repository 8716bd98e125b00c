"""Transformation-coherency voting: pairwise disagreement, outlier elimination,
and the final joint registration over the three surviving clusters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import TriMesh
from .optimizer import SimplexOptions, nelder_mead
from .similarity import ClusterObjective
from .transforms import RigidTransform, TransformParams, compose, params_to_transform


def cluster_distance(cluster, mesh: TriMesh, t1: RigidTransform,
                     t2: RigidTransform) -> float:
    """Mean displacement of the cluster's vertices between two transforms."""
    if len(cluster.members) == 0:
        raise ValueError("empty cluster")
    pts = mesh.vertices[cluster.members]
    delta = pts @ (t1.rotation - t2.rotation).T + (t1.translation - t2.translation)
    return float(np.mean(np.linalg.norm(delta, axis=1)))


def mutual_coherency(ci, cj, mesh: TriMesh, ti: RigidTransform,
                     tj: RigidTransform) -> float:
    """Coherency error of cluster i against cluster j: i's transform evaluated
    on j's vertices versus j's own. Asymmetric by construction."""
    return cluster_distance(cj, mesh, ti, tj)


def pairwise_coherency(clusters: list, transforms: list, mesh: TriMesh) -> np.ndarray:
    """Full matrix E[i, j] = mutual_coherency(i, j). Transforms are fixed after
    local optimization, so this never needs recomputing during elimination."""
    n = len(clusters)
    e = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                e[i, j] = mutual_coherency(clusters[i], clusters[j], mesh,
                                           transforms[i], transforms[j])
    return e


def _coherency_from_matrix(e: np.ndarray, survivors: list, i: int) -> float:
    """c_i = sum of the two smallest e(i, j) over surviving j != i."""
    others = [j for j in survivors if j != i]
    vals = e[i, others]
    # Ties resolve to the lower cluster id; survivors are already ascending.
    order = np.argsort(vals, kind="stable")
    return float(vals[order[0]] + vals[order[1]])


def coherency_error(i: int, clusters: list, transforms: list, mesh: TriMesh,
                    survivors: list | None = None) -> float:
    """Coherency error of cluster i among the surviving set (all by default)."""
    if survivors is None:
        survivors = list(range(len(clusters)))
    if len(survivors) < 3:
        raise ValueError("need at least 3 surviving clusters")
    others = [j for j in survivors if j != i]
    vals = np.array([mutual_coherency(clusters[i], clusters[j], mesh,
                                      transforms[i], transforms[j]) for j in others])
    order = np.argsort(vals, kind="stable")
    return float(vals[order[0]] + vals[order[1]])


@dataclass
class CoherencyState:
    """Survivor set, per-cluster errors of the last round, and elimination log."""

    survivors: list
    errors: dict
    elimination_log: list = field(default_factory=list)


def select_optimal_clusters(clusters: list, transforms: list, mesh: TriMesh):
    """Iteratively drop the least coherent cluster until three remain.

    Each round recomputes every survivor's c_i (the two-nearest sets change
    as clusters vanish) and removes argmax c_i, ties to the lowest id.
    Returns (three surviving indices, elimination log of (index, c) pairs,
    final errors dict).
    """
    n = len(clusters)
    if n < 3:
        raise ValueError("need at least 3 clusters")
    e = pairwise_coherency(clusters, transforms, mesh)
    survivors = list(range(n))
    log = []
    while len(survivors) > 3:
        errors = {i: _coherency_from_matrix(e, survivors, i) for i in survivors}
        worst = max(survivors, key=lambda i: (errors[i], -i))
        log.append((worst, errors[worst]))
        survivors.remove(worst)
    final_errors = {i: _coherency_from_matrix(e, survivors, i) for i in survivors}
    return survivors, log, final_errors


def final_registration(mesh: TriMesh, vol, three_clusters: list,
                       base: RigidTransform,
                       opts: SimplexOptions | None = None) -> RigidTransform:
    """Joint optimization over the union of the three optimal clusters.

    The member union is deduplicated so overlapping clusters do not
    double-weight their shared vertices; optimization starts at the given
    consensus base pose.
    """
    if len(three_clusters) != 3:
        raise ValueError("final registration needs exactly 3 clusters")
    union = np.unique(np.concatenate([c.members for c in three_clusters]))
    objective = ClusterObjective(mesh, vol, union, base)
    best, _value, _evals = nelder_mead(objective, TransformParams(), opts)
    return compose(params_to_transform(best), base)
