import numpy as np
import pytest

from archreg.phantom import (PhantomConfig, PhantomTruth, build_scene,
                             generate_phantom, inject_artifacts, load_truth,
                             save_truth)
from archreg.transforms import TransformParams, apply
from archreg.volume import gradient, sample_trilinear


def test_same_seed_bit_identical():
    cfg_a = PhantomConfig(seed=17)
    cfg_b = PhantomConfig(seed=17)
    vol_a, mesh_a, truth_a = generate_phantom(cfg_a)
    vol_b, mesh_b, truth_b = generate_phantom(cfg_b)
    assert np.array_equal(vol_a.data, vol_b.data)
    assert np.array_equal(mesh_a.vertices, mesh_b.vertices)
    assert np.array_equal(truth_a.landmarks, truth_b.landmarks)
    assert truth_a.gt_cues == truth_b.gt_cues


def test_different_seed_differs():
    vol_a, _m, _t = generate_phantom(PhantomConfig(seed=1))
    vol_b, _m, _t = generate_phantom(PhantomConfig(seed=2))
    assert not np.array_equal(vol_a.data, vol_b.data)


def test_voxel_values_by_construction(phantom_identity):
    cfg, vol, _mesh, truth = phantom_identity
    # A point in the middle of a tooth's embedded root is tooth intensity.
    tooth = truth.geometry["teeth"][7]
    probe = np.array([tooth["center"][0], tooth["center"][1],
                      (tooth["z_gum"] + tooth["root"]) / 2.0])
    assert abs(sample_trilinear(vol, probe) - cfg.tooth_hu) < 1e-6
    # A corner far from the anatomy is soft tissue.
    lo, hi = vol.world_extent()
    assert abs(sample_trilinear(vol, lo + 0.5) - cfg.soft_hu) < 1e-6


def test_isosurface_threshold_classifies_anatomy(phantom_identity):
    cfg, vol, _mesh, truth = phantom_identity
    rng = np.random.default_rng(0)
    jaw_teeth = truth.geometry["teeth"]
    # Points well inside teeth read above 1000; points in empty space below.
    for tooth in jaw_teeth[::3]:
        inside = np.array([tooth["center"][0], tooth["center"][1],
                           (tooth["z_gum"] + tooth["root"]) / 2.0])
        assert sample_trilinear(vol, inside) > 1000.0
    lo, hi = vol.world_extent()
    for _ in range(50):
        p = rng.uniform(lo, hi)
        v = sample_trilinear(vol, p)
        assert v <= cfg.metal_hu


def test_landmarks_on_tooth_tips(phantom_moved):
    cfg, vol, mesh, truth = phantom_moved
    assert truth.landmarks.shape == (10, 3)
    tips = {i: np.array(t["tip_point"]) for i, t in enumerate(truth.geometry["teeth"])}
    mapped = apply(truth.gt_transform, truth.landmarks)
    for lm in mapped:
        nearest = min(np.linalg.norm(lm - tip) for tip in tips.values())
        assert nearest <= cfg.spacing * np.sqrt(3.0)


def test_landmarks_lie_on_mesh(phantom_moved):
    _cfg, _vol, mesh, truth = phantom_moved
    for lm in truth.landmarks:
        d = np.linalg.norm(mesh.vertices - lm, axis=1).min()
        assert d < 1e-9


def test_mesh_normals_point_into_material(phantom_identity):
    _cfg, _vol, mesh, _truth = phantom_identity
    # Lower jaw: material below the surface, normals mostly -z.
    assert np.median(mesh.vertex_normals[:, 2]) < -0.5


def test_upper_jaw_phantom():
    cfg = PhantomConfig(seed=4, jaw="upper")
    vol, mesh, truth = generate_phantom(cfg)
    assert np.median(mesh.vertex_normals[:, 2]) > 0.5
    sources = {c.source for c in truth.gt_cues}
    assert sources == {"model_depth", "ct_mip_upper", "ct_mip_lower"}


def test_config_validation():
    with pytest.raises(ValueError):
        PhantomConfig(soft_hu=2000.0).validate()
    with pytest.raises(ValueError):
        PhantomConfig(artifact_tooth_fraction=1.5).validate()
    with pytest.raises(ValueError):
        PhantomConfig(tooth_count=6).validate()
    with pytest.raises(ValueError):
        PhantomConfig(jaw="sideways").validate()


def test_overlapping_teeth_rejected():
    cfg = PhantomConfig(arch_width=30.0, arch_depth=20.0,
                        tooth_width_range=(9.0, 10.0))
    with pytest.raises(ValueError, match="overlap"):
        build_scene(cfg)


def test_inject_artifacts_noop_for_clean(phantom_identity):
    cfg, vol, _mesh, truth = phantom_identity
    out = inject_artifacts(vol, truth, cfg)
    assert np.array_equal(out.data, vol.data)


def test_artifacts_local_to_teeth(phantom_artifact):
    cfg, vol_artifact, mesh, truth = phantom_artifact
    clean_cfg = PhantomConfig(**{**cfg.__dict__, "artifact_tooth_fraction": 0.0})
    vol_clean, mesh_clean, _truth_clean = generate_phantom(clean_cfg)
    assert np.array_equal(mesh_clean.vertices, mesh.vertices)  # A/B same mesh
    diff = np.abs(vol_artifact.data - vol_clean.data)
    nz = np.argwhere(diff > 1e-6)
    centers = np.array([[t["center"][0], t["center"][1],
                         (t["root"] + t["tip_z"]) / 2.0]
                        for t in truth.geometry["teeth"] if t["artifact"]])
    assert len(centers) == round(0.3 * cfg.tooth_count)
    world = vol_artifact.origin + nz * vol_artifact.spacing
    # 0.1 mm slack: the reference center differs from the injector's span
    # midpoint by the cusp taper.
    for p in world[:: max(1, len(world) // 500)]:
        assert min(np.linalg.norm(p - c) for c in centers) <= 25.1


def test_artifacts_boost_gradients_near_crowns(phantom_artifact):
    cfg, vol_artifact, mesh, truth = phantom_artifact
    clean_cfg = PhantomConfig(**{**cfg.__dict__, "artifact_tooth_fraction": 0.0})
    vol_clean, _mesh, _truth = generate_phantom(clean_cfg)
    pts = apply(truth.gt_transform, mesh.vertices[truth.artifact_mask][::5])
    g_clean = np.linalg.norm(gradient(vol_clean, pts), axis=1)
    g_art = np.linalg.norm(gradient(vol_artifact, pts), axis=1)
    assert g_art.mean() > g_clean.mean()


def test_artifact_mask_covers_flagged_teeth(phantom_artifact):
    _cfg, _vol, mesh, truth = phantom_artifact
    assert truth.artifact_mask.any()
    assert truth.artifact_mask.sum() < len(mesh.vertices) * 0.6


def test_truth_round_trip(tmp_path, phantom_artifact):
    cfg, _vol, _mesh, truth = phantom_artifact
    path = tmp_path / "truth.json"
    save_truth(path, truth, cfg)
    back = load_truth(path)
    assert np.allclose(back.gt_transform.rotation, truth.gt_transform.rotation)
    assert np.allclose(back.landmarks, truth.landmarks)
    assert back.gt_cues == truth.gt_cues
    assert np.array_equal(back.artifact_mask, truth.artifact_mask)
