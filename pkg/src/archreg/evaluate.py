"""Landmark metrics, registration reports, and the cluster-radius study."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .transforms import RigidTransform, apply, transform_to_params

N_LANDMARKS = 10
SWEEP_CSV_HEADER = ["radius_mm", "mean_error_mm", "runtime_s", "seed"]


def landmark_error(landmarks, estimated: RigidTransform, truth: RigidTransform):
    """Per-landmark and mean Euclidean error between two mesh->CT transforms."""
    pts = np.asarray(landmarks, dtype=float).reshape(-1, 3)
    if len(pts) != N_LANDMARKS:
        raise ValueError(f"expected exactly {N_LANDMARKS} landmarks, got {len(pts)}")
    per = np.linalg.norm(apply(truth, pts) - apply(estimated, pts), axis=1)
    return per, float(np.mean(per))


@dataclass
class RegistrationReport:
    method: str
    initial_params: list
    final_params: list
    initial_transform: RigidTransform
    final_transform: RigidTransform
    seed: int
    config: dict = field(default_factory=dict)
    runtime_s: dict = field(default_factory=dict)
    cluster_counts: dict = field(default_factory=dict)
    elimination_log: list = field(default_factory=list)
    per_landmark_mm: list | None = None
    mean_landmark_mm: float | None = None

    def attach_landmarks(self, landmarks, truth: RigidTransform) -> None:
        per, mean = landmark_error(landmarks, self.final_transform, truth)
        self.per_landmark_mm = [float(x) for x in per]
        self.mean_landmark_mm = mean

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "initial_params": self.initial_params,
            "final_params": self.final_params,
            "initial_transform": _transform_dict(self.initial_transform),
            "final_transform": _transform_dict(self.final_transform),
            "per_landmark_mm": self.per_landmark_mm,
            "mean_landmark_mm": self.mean_landmark_mm,
            "runtime_s": self.runtime_s,
            "clusters": self.cluster_counts,
            "elimination_log": [[int(i), float(c)] for i, c in self.elimination_log],
            "seed": self.seed,
            "config": self.config,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def _transform_dict(t: RigidTransform) -> dict:
    return {"rotation": t.rotation.tolist(), "translation": t.translation.tolist()}


def _transform_from_dict(d: dict) -> RigidTransform:
    return RigidTransform(np.array(d["rotation"]), np.array(d["translation"]))


def report_from_result(result, method: str, seed: int, config: dict) -> RegistrationReport:
    return RegistrationReport(
        method=method,
        initial_params=[float(x) for x in transform_to_params(result.initial).as_array()],
        final_params=[float(x) for x in transform_to_params(result.final).as_array()],
        initial_transform=result.initial,
        final_transform=result.final,
        seed=seed,
        config=config,
        runtime_s={k: float(v) for k, v in result.timings.items()},
        cluster_counts={
            "base": result.base_cluster_count,
            "total": result.total_cluster_count,
            "surviving": [int(i) for i in result.survivors],
        },
        elimination_log=result.elimination_log,
    )


def load_report(path) -> RegistrationReport:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise InputError(f"{path}: cannot read report: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON: {e}") from e
    for fieldname in ("method", "final_transform", "initial_transform", "seed"):
        if fieldname not in doc:
            raise InputError(f"{path}: missing field '{fieldname}'")
    rep = RegistrationReport(
        method=doc["method"],
        initial_params=doc.get("initial_params", []),
        final_params=doc.get("final_params", []),
        initial_transform=_transform_from_dict(doc["initial_transform"]),
        final_transform=_transform_from_dict(doc["final_transform"]),
        seed=int(doc["seed"]),
        config=doc.get("config", {}),
        runtime_s=doc.get("runtime_s", {}),
        cluster_counts=doc.get("clusters", {}),
        elimination_log=[tuple(e) for e in doc.get("elimination_log", [])],
        per_landmark_mm=doc.get("per_landmark_mm"),
        mean_landmark_mm=doc.get("mean_landmark_mm"),
    )
    return rep


def report_numerics(doc: dict) -> dict:
    """A report's deterministic payload: everything except wall-clock fields."""
    out = dict(doc)
    out.pop("runtime_s", None)
    return out


# ---------------------------------------------------------------------------
# Radius study

def radius_sweep(configs: list, radii: list, run_one) -> list:
    """Run the pipeline for every (radius, phantom config) pair.

    `run_one(cfg, radius)` must return (mean_error_mm, runtime_s). Returns
    rows of {radius_mm, mean_error_mm, runtime_s, seed}; use save_sweep_csv
    for the delimited output.
    """
    if not radii:
        raise ValueError("radius sweep needs at least one radius")
    rows = []
    for r in radii:
        for cfg in configs:
            mean_err, runtime = run_one(cfg, r)
            rows.append({"radius_mm": float(r), "mean_error_mm": float(mean_err),
                         "runtime_s": float(runtime), "seed": int(cfg.seed)})
    return rows


def save_sweep_csv(path, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_CSV_HEADER)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in SWEEP_CSV_HEADER})
