"""Rigid 6-DoF transforms: parameter vectors, matrices, and their algebra."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def wrap_angle(a: float) -> float:
    """Wrap an angle to the principal range (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


@dataclass(frozen=True)
class TransformParams:
    """6-DoF pose parameters: rotation angles in radians, translation in mm."""

    rx: float = 0.0
    ry: float = 0.0
    rz: float = 0.0
    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.rx, self.ry, self.rz, self.tx, self.ty, self.tz])

    @staticmethod
    def from_array(v) -> "TransformParams":
        v = np.asarray(v, dtype=float)
        if v.shape != (6,):
            raise ValueError(f"expected 6 parameters, got shape {v.shape}")
        return TransformParams(*(float(x) for x in v))


@dataclass(frozen=True)
class RigidTransform:
    """Rotation matrix plus translation vector, applied as R @ p + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def is_valid(self, tol: float = 1e-9) -> bool:
        R = self.rotation
        return (
            np.abs(R @ R.T - np.eye(3)).max() <= tol
            and abs(np.linalg.det(R) - 1.0) <= tol
        )


def params_to_transform(p: TransformParams) -> RigidTransform:
    """Build the matrix form: R = Rz(rz) @ Ry(ry) @ Rx(rx), extrinsic XYZ order."""
    cx, sx = math.cos(p.rx), math.sin(p.rx)
    cy, sy = math.cos(p.ry), math.sin(p.ry)
    cz, sz = math.cos(p.rz), math.sin(p.rz)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return RigidTransform(Rz @ Ry @ Rx, np.array([p.tx, p.ty, p.tz]))


def transform_to_params(t: RigidTransform) -> TransformParams:
    """Recover extrinsic-XYZ angles in (-pi, pi] and the translation."""
    R = t.rotation
    sy = -R[2, 0]
    sy = min(1.0, max(-1.0, float(sy)))
    ry = math.asin(sy)
    if abs(sy) < 1.0 - 1e-12:
        rx = math.atan2(R[2, 1], R[2, 2])
        rz = math.atan2(R[1, 0], R[0, 0])
    else:
        # Gimbal lock: rx and rz are coupled; put all the freedom in rz.
        rx = 0.0
        rz = math.atan2(-R[0, 1], R[1, 1])
    return TransformParams(
        wrap_angle(rx), wrap_angle(ry), wrap_angle(rz),
        float(t.translation[0]), float(t.translation[1]), float(t.translation[2]),
    )


def apply(t: RigidTransform, point) -> np.ndarray:
    """Transform a point (3,) or an array of points (n, 3)."""
    p = np.asarray(point, dtype=float)
    if p.ndim == 1:
        return t.rotation @ p + t.translation
    return p @ t.rotation.T + t.translation


def apply_normal(t: RigidTransform, n) -> np.ndarray:
    """Rotate a normal (3,) or normals (n, 3); rigid transforms only rotate them."""
    v = np.asarray(n, dtype=float)
    if v.ndim == 1:
        return t.rotation @ v
    return v @ t.rotation.T


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Return a after b: compose(a, b)(p) == a(b(p))."""
    return RigidTransform(a.rotation @ b.rotation,
                          a.rotation @ b.translation + a.translation)


def invert(t: RigidTransform) -> RigidTransform:
    Rt = t.rotation.T
    return RigidTransform(Rt, -(Rt @ t.translation))
