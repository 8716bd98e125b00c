"""Point+line pose cues: estimation, JSON interchange, and the initial alignment."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .projection import PlaneFrame, lift_model_cue, lift_ct_cue
from .transforms import RigidTransform, wrap_angle
from .volume import CtVolume, Image2D

CUE_SOURCES = ("model_depth", "ct_mip_upper", "ct_mip_lower")


@dataclass(frozen=True)
class PoseCue:
    """A 2D point plus line angle in a projection image."""

    point: tuple
    angle: float
    source: str

    def __post_init__(self):
        if self.source not in CUE_SOURCES:
            raise ValueError(f"unknown cue source {self.source!r}")
        object.__setattr__(self, "point", (float(self.point[0]), float(self.point[1])))
        object.__setattr__(self, "angle", wrap_angle(float(self.angle)))


@dataclass(frozen=True)
class CueFrame3D:
    """A lifted cue: 3D anchor point, in-plane direction, and plane normal."""

    point: np.ndarray
    direction: np.ndarray
    plane_normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float).reshape(3))
        d = np.asarray(self.direction, dtype=float).reshape(3)
        n = np.asarray(self.plane_normal, dtype=float).reshape(3)
        object.__setattr__(self, "direction", d / np.linalg.norm(d))
        object.__setattr__(self, "plane_normal", n / np.linalg.norm(n))


# ---------------------------------------------------------------------------
# Heuristic cue estimation (fallback when no cue file or regressor is given)

def _weighted_moments(cols, rows, w):
    wsum = w.sum()
    cx = float((cols * w).sum() / wsum)
    cy = float((rows * w).sum() / wsum)
    mu20 = float((w * (cols - cx) ** 2).sum() / wsum)
    mu02 = float((w * (rows - cy) ** 2).sum() / wsum)
    mu11 = float((w * (cols - cx) * (rows - cy)).sum() / wsum)
    angle = 0.5 * math.atan2(2.0 * mu11, mu20 - mu02)
    if angle <= -math.pi / 2:
        angle += math.pi
    elif angle > math.pi / 2:
        angle -= math.pi
    return (cx, cy), angle


def heuristic_pose_estimate(img: Image2D, kind: str) -> list:
    """Moment-based cue guesses from a normalized projection image.

    kind "model_depth": one cue from the low-depth (crown) band.
    kind "ct_mip": two cues, the bright mask split at its vertical centroid
    into upper (larger row = superior) and lower halves.

    Angles are axis-valued in (-pi/2, pi/2]; sign resolution happens at lift
    time.
    """
    v = img.values
    rows_grid, cols_grid = np.mgrid[0:img.height, 0:img.width]
    if kind == "model_depth":
        mask = v <= 0.3
        if not mask.any():
            raise InputError("no salient structure in depth image")
        w = 1.0 - v[mask]
        if w.sum() <= 0:
            w = np.ones(int(mask.sum()))
        point, angle = _weighted_moments(cols_grid[mask].astype(float),
                                         rows_grid[mask].astype(float), w)
        return [PoseCue(point, angle, "model_depth")]
    if kind == "ct_mip":
        t = np.quantile(v, 0.95)
        mask = v >= max(t, 1e-12)
        if not mask.any():
            raise InputError("no salient structure in MIP image")
        w_all = v[mask]
        split_row = float((rows_grid[mask] * w_all).sum() / w_all.sum())
        cues = []
        for source, half in (("ct_mip_upper", rows_grid > split_row),
                             ("ct_mip_lower", rows_grid <= split_row)):
            m = mask & half
            if not m.any():
                raise InputError(f"no salient structure in MIP half for {source}")
            point, angle = _weighted_moments(cols_grid[m].astype(float),
                                             rows_grid[m].astype(float), v[m])
            cues.append(PoseCue(point, angle, source))
        return cues
    raise InputError(f"unknown image kind {kind!r} (expected model_depth or ct_mip)")


# ---------------------------------------------------------------------------
# Cue file schema

def save_pose_cues(path, cues, frame: PlaneFrame | None = None,
                   image_ref: str | None = None) -> None:
    doc = {
        "cues": [
            {"source": c.source, "point_px": [c.point[0], c.point[1]], "angle_rad": c.angle}
            for c in cues
        ]
    }
    if frame is not None:
        doc["frame"] = frame.to_dict()
    if image_ref is not None:
        doc["image_ref"] = image_ref
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_pose_cues(path):
    """Read a cue file. Returns (cues, frame or None, image_ref or None)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise InputError(f"{path}: cannot read cue file: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(doc, dict) or "cues" not in doc:
        raise InputError(f"{path}: missing field 'cues'")
    if not isinstance(doc["cues"], list):
        raise InputError(f"{path}: field 'cues' must be a list")
    cues = []
    for i, c in enumerate(doc["cues"]):
        where = f"{path}: cues[{i}]"
        if not isinstance(c, dict):
            raise InputError(f"{where}: must be an object")
        for field in ("source", "point_px", "angle_rad"):
            if field not in c:
                raise InputError(f"{where}.{field}: missing")
        if c["source"] not in CUE_SOURCES:
            raise InputError(f"{where}.source: unknown value {c['source']!r}")
        pt = c["point_px"]
        if not (isinstance(pt, list) and len(pt) == 2):
            raise InputError(f"{where}.point_px: expected [x, y]")
        if not isinstance(c["angle_rad"], (int, float)):
            raise InputError(f"{where}.angle_rad: expected a number")
        cues.append(PoseCue((pt[0], pt[1]), float(c["angle_rad"]), c["source"]))
    frame = None
    if "frame" in doc and doc["frame"]:
        try:
            frame = PlaneFrame.from_dict(doc["frame"])
        except (KeyError, TypeError) as e:
            raise InputError(f"{path}: frame.{e}: missing or malformed") from e
    return cues, frame, doc.get("image_ref")


# ---------------------------------------------------------------------------
# Direction sign resolution and cue lifting

def canonical_model_angle(img: Image2D, point_px, angle: float) -> float:
    """Orient a depth-image cue angle so it points toward the anterior teeth.

    The anterior side is taken from the centroid of the pixels in the lowest
    tenth of the value range (the tallest crown tips); a headless axis from a
    regressor or heuristic becomes a directed angle, and an already-directed
    angle that satisfies the rule is unchanged.
    """
    v = img.values
    mask = v <= 0.1
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return wrap_angle(angle)
    c = np.array([cols.mean(), rows.mean()])
    d = np.array([math.cos(angle), math.sin(angle)])
    rel = c - np.asarray(point_px, dtype=float)
    if float(rel @ d) < 0:
        return wrap_angle(angle + math.pi)
    return wrap_angle(angle)


def canonical_ct_angle(angle: float) -> float:
    """Orient a MIP cue angle toward the anterior (+y) side of the volume."""
    if math.cos(angle) < 0 or (math.cos(angle) == 0 and math.sin(angle) < 0):
        return wrap_angle(angle + math.pi)
    return wrap_angle(angle)


def model_cue_frame(frame: PlaneFrame, cue: PoseCue, img: Image2D) -> CueFrame3D:
    """Lift a depth-image cue into 3D; the plane normal is the frame normal."""
    angle = canonical_model_angle(img, cue.point, cue.angle)
    point3d, direction = lift_model_cue(frame, cue.point, angle)
    return CueFrame3D(point3d, direction, frame.normal)


def ct_cue_frame(mip: Image2D, vol: CtVolume, cue: PoseCue, jaw: str) -> CueFrame3D:
    """Lift a MIP cue into 3D with the occlusal-plane normal.

    The occlusal plane contains the lifted line and the world x-axis; the
    jaw prior picks the normal's sign (upper jaw normal points inferiorly,
    lower superiorly).
    """
    if jaw not in ("upper", "lower"):
        raise InputError(f"jaw must be 'upper' or 'lower', got {jaw!r}")
    angle = canonical_ct_angle(cue.angle)
    point3d, direction = lift_ct_cue(mip, vol, cue.point, angle)
    normal = np.cross(np.array([1.0, 0.0, 0.0]), direction)
    nz = normal[2]
    if abs(nz) < 1e-12:
        raise InputError("MIP cue line is vertical; occlusal plane undefined")
    want_up = jaw == "lower"
    if (nz > 0) != want_up:
        normal = -normal
    return CueFrame3D(point3d, direction, normal)


def initial_transform(model_cue: CueFrame3D, ct_cue: CueFrame3D,
                      tol: float = 1e-6) -> RigidTransform:
    """Rigid transform mapping the model cue frame exactly onto the CT cue frame."""
    for name, f in (("model", model_cue), ("ct", ct_cue)):
        if abs(float(f.direction @ f.plane_normal)) > tol:
            raise InputError(f"{name} cue frame is not orthogonal")
    bm = np.column_stack([model_cue.direction, model_cue.plane_normal,
                          np.cross(model_cue.direction, model_cue.plane_normal)])
    bc = np.column_stack([ct_cue.direction, ct_cue.plane_normal,
                          np.cross(ct_cue.direction, ct_cue.plane_normal)])
    rotation = bc @ bm.T
    translation = ct_cue.point - rotation @ model_cue.point
    return RigidTransform(rotation, translation)
