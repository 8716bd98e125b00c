import json
import math
import os

import numpy as np
import pytest

from archreg.cli import main
from archreg.evaluate import report_numerics
from archreg.fileio import load_image_pgm, load_volume
from archreg.phantom import load_truth


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One coarse phantom shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = {
        "spacing": 0.5,
        "mesh_resolution": 1.0,
        "seed": 11,
        "gt_params": [0.08, -0.1, 0.12, 4.0, -3.0, 5.0],
        "artifact_tooth_fraction": 0.3,
    }
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = root / "phantom"
    assert main(["phantom", "--config", str(cfg_path), "--out-dir", str(out)]) == 0
    return root


def test_phantom_outputs(workspace):
    out = workspace / "phantom"
    vol = load_volume(out / "volume.hdr")
    assert min(vol.dims) > 10
    truth = load_truth(out / "truth.json")
    assert truth.landmarks.shape == (10, 3)
    assert (out / "mesh.obj").exists()
    assert (out / "cues.json").exists()


def test_project_and_pose(workspace):
    out = workspace / "phantom"
    proj = workspace / "proj"
    rc = main(["project", "--mesh", str(out / "mesh.obj"),
               "--ct", str(out / "volume.hdr"), "--out-dir", str(proj)])
    assert rc == 0
    depth, meta = load_image_pgm(proj / "depth.pgm")
    assert meta["kind"] == "depth"
    assert "frame" in meta
    mip, meta2 = load_image_pgm(proj / "mip.pgm")
    assert meta2["kind"] == "mip"
    assert 0.0 <= depth.values.min() and depth.values.max() <= 1.0

    cues_path = workspace / "heuristic_cues.json"
    assert main(["pose", "--image", str(proj / "depth.pgm"), "--kind", "depth",
                 "--out", str(cues_path)]) == 0
    doc = json.loads(cues_path.read_text())
    assert doc["cues"][0]["source"] == "model_depth"
    assert "frame" in doc

    mip_cues = workspace / "mip_cues.json"
    assert main(["pose", "--image", str(proj / "mip.pgm"), "--kind", "mip",
                 "--out", str(mip_cues)]) == 0
    doc = json.loads(mip_cues.read_text())
    assert {c["source"] for c in doc["cues"]} == {"ct_mip_upper", "ct_mip_lower"}


def test_register_and_evaluate(workspace, capsys):
    out = workspace / "phantom"
    report = workspace / "report.json"
    rc = main(["register", "--ct", str(out / "volume.hdr"),
               "--mesh", str(out / "mesh.obj"), "--jaw", "lower",
               "--cues", str(out / "cues.json"), "--radius", "10",
               "--seed", "42", "--clusters-out", str(workspace / "clusters.json"),
               "--out", str(report)])
    assert rc == 0
    doc = json.loads(report.read_text())
    assert doc["method"] == "cluster"
    assert doc["clusters"]["base"] >= 1
    assert len(doc["elimination_log"]) == doc["clusters"]["total"] - 3
    cl_doc = json.loads((workspace / "clusters.json").read_text())
    assert len(cl_doc["clusters"]) == doc["clusters"]["total"]
    assert {"id", "center_mm", "radius_mm", "member_count",
            "init_perturbation"} <= set(cl_doc["clusters"][0])

    rc = main(["evaluate", "--report", str(report),
               "--truth", str(out / "truth.json"),
               "--out", str(workspace / "eval.json"),
               "--plot", str(workspace / "landmarks.png")])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "mean landmark error" in printed
    val = float(printed.split(":")[1].split("mm")[0])
    assert val < 1.0
    assert (workspace / "landmarks.png").exists()


def test_register_validation_errors(workspace, tmp_path):
    out = workspace / "phantom"
    rc = main(["register", "--ct", str(out / "volume.hdr"),
               "--mesh", str(out / "mesh.obj"), "--jaw", "lower",
               "--radius", "0", "--out", str(tmp_path / "r.json")])
    assert rc == 2
    rc = main(["register", "--ct", str(tmp_path / "missing.hdr"),
               "--mesh", str(out / "mesh.obj"), "--jaw", "lower",
               "--out", str(tmp_path / "r.json")])
    assert rc == 2
    rc = main(["register", "--bogus-flag"])
    assert rc == 2


def test_register_deterministic(workspace, tmp_path):
    out = workspace / "phantom"
    reports = []
    for name in ("a.json", "b.json"):
        rc = main(["register", "--ct", str(out / "volume.hdr"),
                   "--mesh", str(out / "mesh.obj"), "--jaw", "lower",
                   "--cues", str(out / "cues.json"), "--seed", "7",
                   "--out", str(tmp_path / name)])
        assert rc == 0
        reports.append(json.loads((tmp_path / name).read_text()))
    assert report_numerics(reports[0]) == report_numerics(reports[1])


def test_run_config_supplies_defaults(workspace, tmp_path):
    out = workspace / "phantom"
    run_cfg = tmp_path / "run.json"
    run_cfg.write_text(json.dumps({"jaw": "lower", "seed": 7, "radius": 10.0,
                                   "cues": str(out / "cues.json")}))
    rc = main(["register", "--ct", str(out / "volume.hdr"),
               "--mesh", str(out / "mesh.obj"), "--config", str(run_cfg),
               "--out", str(tmp_path / "r.json")])
    assert rc == 0
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["seed"] == 7


def test_benchmark_and_sweep(workspace, tmp_path):
    out = workspace / "phantom"
    bench = tmp_path / "bench"
    rc = main(["benchmark", "--ct", str(out / "volume.hdr"),
               "--mesh", str(out / "mesh.obj"), "--truth", str(out / "truth.json"),
               "--jaw", "lower", "--out-dir", str(bench)])
    assert rc == 0
    lines = (bench / "benchmark.csv").read_text().strip().splitlines()
    assert lines[0] == "method,mean_error_mm,runtime_s"
    assert len(lines) == 4
    assert (bench / "benchmark.png").exists()

    sweep = tmp_path / "sweep"
    rc = main(["sweep", "--radii", "10", "--phantoms", "1", "--base-seed", "50",
               "--out-dir", str(sweep)])
    assert rc == 0
    lines = (sweep / "sweep.csv").read_text().strip().splitlines()
    assert lines[0] == "radius_mm,mean_error_mm,runtime_s,seed"
    assert len(lines) == 2
    assert (sweep / "sweep.png").exists()
