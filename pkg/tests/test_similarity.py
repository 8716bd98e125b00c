import math

import numpy as np
import pytest

from archreg.clusters import Cluster, generate_clusters
from archreg.mesh import TriMesh
from archreg.optimizer import SimplexOptions
from archreg.projection import depth_image
from archreg.similarity import ClusterObjective, optimize_cluster, similarity
from archreg.transforms import (RigidTransform, TransformParams, apply,
                                compose, invert, params_to_transform,
                                transform_to_params)
from archreg.volume import CtVolume


def ramp_volume(g=50.0, dims=(12, 12, 12), spacing=1.0):
    """Intensity increases linearly along z with slope g."""
    zs = np.arange(dims[2]) * spacing
    data = np.broadcast_to(zs * g, dims).copy()
    return CtVolume(data, (spacing,) * 3, (0.0, 0.0, 0.0))


def single_vertex_mesh(at, normal_up=True):
    a, b, c = at, at + np.array([1.0, 0, 0]), at + np.array([0, 1.0, 0])
    tris = [[0, 1, 2]] if normal_up else [[0, 2, 1]]
    return TriMesh([a, b, c], tris)


def test_constant_volume_gives_zero():
    vol = CtVolume(np.full((8, 8, 8), 500.0), (1, 1, 1), (0, 0, 0))
    mesh = single_vertex_mesh(np.array([3.0, 3.0, 3.0]))
    val = similarity(mesh, vol, [0, 1, 2], RigidTransform.identity(), TransformParams())
    assert val == 0.0


def test_single_vertex_dot_product():
    g = 50.0
    vol = ramp_volume(g=g)
    mesh = single_vertex_mesh(np.array([5.0, 5.0, 5.0]))
    val = similarity(mesh, vol, [0], RigidTransform.identity(), TransformParams())
    assert abs(val - (-g)) < 1e-9


def test_empty_members_error():
    vol = ramp_volume()
    mesh = single_vertex_mesh(np.array([5.0, 5.0, 5.0]))
    with pytest.raises(ValueError):
        similarity(mesh, vol, [], RigidTransform.identity(), TransformParams())


def test_member_order_invariance():
    rng = np.random.default_rng(0)
    vol = ramp_volume()
    mesh = single_vertex_mesh(np.array([4.0, 4.0, 4.0]))
    members = np.array([0, 1, 2])
    base = RigidTransform.identity()
    p = TransformParams(0.02, -0.01, 0.03, 0.2, -0.1, 0.4)
    a = similarity(mesh, vol, members, base, p)
    b = similarity(mesh, vol, members[::-1], base, p)
    assert a == b


def test_base_composition_consistency():
    # Smooth O(1) synthetic volume keeps the 1e-9 tolerance meaningful.
    dims = (14, 14, 14)
    xs = np.arange(dims[0]) * 1.0
    X, Y, Z = np.meshgrid(xs, xs, xs, indexing="ij")
    data = np.sin(0.4 * X) + np.cos(0.3 * Y) * 0.5 + 0.2 * np.sin(0.5 * Z)
    vol = CtVolume(data, (1, 1, 1), (0, 0, 0))
    rng = np.random.default_rng(1)
    mesh = single_vertex_mesh(np.array([6.0, 6.0, 6.0]))
    for _ in range(10):
        base = params_to_transform(TransformParams(*rng.uniform(-0.2, 0.2, 3),
                                                   *rng.uniform(-1, 1, 3)))
        p = TransformParams(*rng.uniform(-0.1, 0.1, 3), *rng.uniform(-0.5, 0.5, 3))
        a = similarity(mesh, vol, [0, 1, 2], base, p)
        composed = transform_to_params(compose(params_to_transform(p), base))
        b = similarity(mesh, vol, [0, 1, 2], RigidTransform.identity(), composed)
        assert abs(a - b) < 1e-9


def test_gt_pose_beats_random_perturbations(phantom_moved):
    _cfg, vol, mesh, truth = phantom_moved
    members = np.arange(len(mesh.vertices))
    base = truth.gt_transform
    l_gt = similarity(mesh, vol, members, base, TransformParams())
    rng = np.random.default_rng(2)
    wins = 0
    for _ in range(50):
        p = TransformParams(*rng.uniform(-math.radians(5), math.radians(5), 3),
                            *rng.uniform(-2, 2, 3))
        if l_gt < similarity(mesh, vol, members, base, p):
            wins += 1
    assert wins >= 48


def test_optimize_cluster_stability(phantom_moved):
    # From the exact GT base the optimizer must not wander off a well-formed
    # (molar-sized) cluster.
    _cfg, vol, mesh, truth = phantom_moved
    depth, frame = depth_image(mesh)
    clusters = generate_clusters(mesh, depth, frame, 10.0)
    cluster = max(clusters, key=lambda c: len(c.members))
    gt = truth.gt_transform
    ti = optimize_cluster(mesh, vol, cluster, gt)
    rel = compose(ti, invert(gt))
    ang = math.degrees(math.acos(min(1.0, max(-1.0, (np.trace(rel.rotation) - 1) / 2))))
    centroid = apply(gt, mesh.vertices[cluster.members]).mean(axis=0)
    disp = np.linalg.norm(apply(rel, centroid) - centroid)
    assert ang < 0.2
    assert disp < 0.2


def test_optimize_cluster_recovers_from_perturbed_base(phantom_moved):
    _cfg, vol, mesh, truth = phantom_moved
    depth, frame = depth_image(mesh)
    clusters = generate_clusters(mesh, depth, frame, 10.0)
    cluster = max(clusters, key=lambda c: len(c.members))
    gt = truth.gt_transform
    pert = params_to_transform(TransformParams(
        math.radians(2.0), -math.radians(1.0), math.radians(1.4), 0.6, -0.5, 0.6))
    base = compose(pert, gt)
    ti = optimize_cluster(mesh, vol, cluster, base)
    rel = compose(ti, invert(gt))
    ang = math.degrees(math.acos(min(1.0, max(-1.0, (np.trace(rel.rotation) - 1) / 2))))
    centroid = apply(gt, mesh.vertices[cluster.members]).mean(axis=0)
    disp = np.linalg.norm(apply(rel, centroid) - centroid)
    assert ang < 0.5
    assert disp < 0.3


def test_flat_region_returns_base_value():
    vol = CtVolume(np.full((20, 20, 20), 100.0), (1, 1, 1), (0, 0, 0))
    xs, ys = np.meshgrid(np.arange(5.0), np.arange(5.0), indexing="ij")
    verts = np.column_stack([xs.ravel() + 7, ys.ravel() + 7, np.full(25, 10.0)])
    tris = []
    for i in range(4):
        for j in range(4):
            v = i * 5 + j
            tris += [(v, v + 5, v + 1), (v + 5, v + 6, v + 1)]
    mesh = TriMesh(verts, tris)
    cluster = Cluster(12, 10.0, np.arange(25))
    opts = SimplexOptions(max_evals=200)
    ti = optimize_cluster(mesh, vol, cluster, RigidTransform.identity(), opts)
    value = similarity(mesh, vol, cluster.members, ti, TransformParams())
    assert value == 0.0
