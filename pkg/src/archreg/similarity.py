"""Normal/gradient alignment similarity and its per-cluster minimization."""

from __future__ import annotations

import numpy as np

from .clusters import Cluster
from .mesh import TriMesh
from .optimizer import SimplexOptions, nelder_mead
from .transforms import (RigidTransform, TransformParams, compose,
                         params_to_transform)
from .volume import CtVolume, gradient


class ClusterObjective:
    """Callable similarity over a fixed vertex subset.

    Evaluates L = -sum_v <R n_v, grad I(T v)> with T = params o base; lower
    is better (the ground-truth pose aligns the inward surface normals with
    the CT gradient). Member positions are held in ascending vertex order so
    summation is bit-reproducible.
    """

    def __init__(self, mesh: TriMesh, vol: CtVolume, members, base: RigidTransform):
        members = np.asarray(members, dtype=np.int64)
        if members.size == 0:
            raise ValueError("empty member set")
        members = np.sort(members)
        self.positions = mesh.vertices[members]
        self.normals = mesh.vertex_normals[members]
        self.vol = vol
        self.base = base

    def value(self, p: TransformParams) -> float:
        total = compose(params_to_transform(p), self.base)
        world = self.positions @ total.rotation.T + total.translation
        grads = gradient(self.vol, world)
        rotated = self.normals @ total.rotation.T
        return -float(np.sum(np.einsum("ij,ij->i", rotated, grads)))

    def __call__(self, params_array) -> float:
        return self.value(TransformParams.from_array(params_array))


def similarity(mesh: TriMesh, vol: CtVolume, members, base: RigidTransform,
               p: TransformParams) -> float:
    """Vector-alignment similarity of a vertex subset at pose (p o base)."""
    return ClusterObjective(mesh, vol, members, base).value(p)


def optimize_cluster(mesh: TriMesh, vol: CtVolume, cluster: Cluster,
                     base: RigidTransform,
                     opts: SimplexOptions | None = None) -> RigidTransform:
    """Locally optimized transform of one cluster (downhill simplex).

    Starts at the cluster's stochastic init perturbation and returns the
    full mesh-to-CT transform params* o base.
    """
    objective = ClusterObjective(mesh, vol, cluster.members, base)
    best, _value, _evals = nelder_mead(objective, cluster.init_perturbation, opts)
    return compose(params_to_transform(best), base)
