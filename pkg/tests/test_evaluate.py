import numpy as np
import pytest

from archreg.evaluate import (RegistrationReport, landmark_error, load_report,
                              radius_sweep, report_numerics, save_sweep_csv)
from archreg.transforms import (RigidTransform, TransformParams, apply,
                                compose, params_to_transform)
from conftest import random_params


def test_landmark_error_zero_when_equal():
    rng = np.random.default_rng(0)
    t = params_to_transform(random_params(rng))
    pts = rng.uniform(-20, 20, (10, 3))
    per, mean = landmark_error(pts, t, t)
    assert np.all(per == 0.0)
    assert mean == 0.0


def test_landmark_error_pure_translation():
    rng = np.random.default_rng(1)
    truth = params_to_transform(random_params(rng))
    shift = params_to_transform(TransformParams(0, 0, 0, 0, 0, 2.0))
    est = compose(shift, truth)
    per, mean = landmark_error(rng.uniform(-20, 20, (10, 3)), est, truth)
    assert np.abs(per - 2.0).max() < 1e-12
    assert abs(mean - 2.0) < 1e-12


def test_landmark_error_matches_bruteforce():
    rng = np.random.default_rng(2)
    truth = params_to_transform(random_params(rng))
    est = params_to_transform(random_params(rng))
    pts = rng.uniform(-30, 30, (10, 3))
    per, mean = landmark_error(pts, est, truth)
    acc = 0.0
    for i, p in enumerate(pts):
        d = np.linalg.norm((truth.rotation @ p + truth.translation)
                           - (est.rotation @ p + est.translation))
        assert abs(per[i] - d) < 1e-12
        acc += d
    assert abs(mean - acc / 10.0) < 1e-12
    assert abs(mean - np.mean(per)) < 1e-12


def test_landmark_error_requires_ten():
    t = RigidTransform.identity()
    with pytest.raises(ValueError):
        landmark_error(np.zeros((9, 3)), t, t)


def test_landmark_error_left_composition_invariant():
    rng = np.random.default_rng(3)
    truth = params_to_transform(random_params(rng))
    est = params_to_transform(random_params(rng))
    pts = rng.uniform(-30, 30, (10, 3))
    _per, mean = landmark_error(pts, est, truth)
    q = params_to_transform(random_params(rng))
    _per2, mean2 = landmark_error(pts, compose(q, est), compose(q, truth))
    assert abs(mean - mean2) < 1e-9


def test_report_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    t0 = params_to_transform(random_params(rng))
    t1 = params_to_transform(random_params(rng))
    rep = RegistrationReport(
        method="cluster",
        initial_params=[0.0] * 6,
        final_params=[1.0] * 6,
        initial_transform=t0,
        final_transform=t1,
        seed=7,
        config={"radius": 10.0},
        runtime_s={"total": 1.5},
        cluster_counts={"base": 11, "total": 44, "surviving": [1, 2, 3]},
        elimination_log=[(5, 2.0)],
    )
    pts = rng.uniform(-20, 20, (10, 3))
    rep.attach_landmarks(pts, t1)
    assert rep.mean_landmark_mm == 0.0
    path = tmp_path / "report.json"
    rep.save(path)
    back = load_report(path)
    assert back.method == "cluster"
    assert np.allclose(back.final_transform.rotation, t1.rotation)
    assert back.cluster_counts["base"] == 11
    assert back.elimination_log == [(5, 2.0)]


def test_report_numerics_excludes_runtime():
    doc = {"method": "x", "runtime_s": {"total": 1.0}, "seed": 3}
    out = report_numerics(doc)
    assert "runtime_s" not in out
    assert out["seed"] == 3


def test_report_mean_is_arithmetic_mean(tmp_path):
    rng = np.random.default_rng(5)
    truth = params_to_transform(random_params(rng))
    est = params_to_transform(random_params(rng))
    rep = RegistrationReport("m", [], [], est, est, 0)
    rep.attach_landmarks(rng.uniform(-10, 10, (10, 3)), truth)
    assert abs(rep.mean_landmark_mm - np.mean(rep.per_landmark_mm)) < 1e-12


def test_radius_sweep_rows_and_csv(tmp_path):
    class Cfg:
        def __init__(self, seed):
            self.seed = seed

    def run_one(cfg, radius):
        return 0.1 * radius + cfg.seed, 2.0 / radius

    rows = radius_sweep([Cfg(1), Cfg(2)], [5.0, 10.0, 20.0], run_one)
    assert len(rows) == 6
    path = tmp_path / "sweep.csv"
    save_sweep_csv(path, rows)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "radius_mm,mean_error_mm,runtime_s,seed"
    assert len(lines) == 7


def test_radius_sweep_single_radius():
    class Cfg:
        seed = 3

    rows = radius_sweep([Cfg()], [10.0], lambda c, r: (1.0, 2.0))
    assert len(rows) == 1


def test_radius_sweep_empty_errors():
    with pytest.raises(ValueError):
        radius_sweep([], [], lambda c, r: (0, 0))
