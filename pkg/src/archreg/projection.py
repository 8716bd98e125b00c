"""Depth projection of the mesh onto its PCA bounding plane, and 2D->3D cue lifting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import TriMesh, PcaResult, pca_axes
from .volume import CtVolume, Image2D, normalize01

DEFAULT_PIXEL_SIZE = 0.25  # mm


@dataclass(frozen=True)
class PlaneFrame:
    """Bounding-plane coordinate frame: origin at pixel (0,0), u across columns,
    v across rows, normal = u x v pointing away from the surface (crown side)."""

    origin: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    normal: np.ndarray
    pixel_size: float

    def to_dict(self) -> dict:
        return {
            "origin": [float(x) for x in self.origin],
            "u_axis": [float(x) for x in self.u_axis],
            "v_axis": [float(x) for x in self.v_axis],
            "normal": [float(x) for x in self.normal],
            "pixel_size_mm": self.pixel_size,
        }

    @staticmethod
    def from_dict(d: dict) -> "PlaneFrame":
        return PlaneFrame(
            np.array(d["origin"], dtype=float),
            np.array(d["u_axis"], dtype=float),
            np.array(d["v_axis"], dtype=float),
            np.array(d["normal"], dtype=float),
            float(d["pixel_size_mm"]),
        )


def _splat_depths(pu, pv, depths, pixel_size):
    """Min-depth splat of vertices into a tight pixel grid.

    Returns the raw (unnormalized) depth image; empty pixels hold the
    maximum observed depth.
    """
    u0, v0 = pu.min(), pv.min()
    w = int(np.floor((pu.max() - u0) / pixel_size)) + 1
    h = int(np.floor((pv.max() - v0) / pixel_size)) + 1
    col = np.minimum(((pu - u0) / pixel_size).astype(np.int64), w - 1)
    row = np.minimum(((pv - v0) / pixel_size).astype(np.int64), h - 1)
    img = np.full((h, w), depths.max(), dtype=float)
    np.minimum.at(img, (row, col), depths)
    return img, u0, v0


def _near_band_variance(depths: np.ndarray, band: float = 0.2) -> float:
    """Variance of the normalized depths within `band` of the nearest point.

    Crown-side projections put the structured tooth tips in this band; the
    flat jaw base gives near-zero variance. Computed on vertex depths, not
    pixels, so sparse splatting cannot starve the statistic.
    """
    nd = normalize01(depths)
    sel = nd[nd <= band]
    return float(sel.var()) if sel.size else 0.0


def depth_image(mesh: TriMesh, axes: PcaResult | None = None,
                pixel_size: float = DEFAULT_PIXEL_SIZE):
    """Project vertices onto the crown-side face of the PCA bounding box.

    Pixel values are the distance from the plane to the nearest vertex along
    -normal, min-splatted per pixel and normalized to [0,1]; crowns come out
    low. Axis signs are canonicalized so the image is reproducible under
    rigid motions of the mesh: the normal picks the side whose near-surface
    band is the most structured (teeth beat the flat base), v follows the
    third moment along the middle PCA axis, and u completes a right-handed
    frame.

    Returns (Image2D, PlaneFrame).
    """
    if pixel_size <= 0:
        raise ValueError("pixel_size must be positive")
    if len(mesh.vertices) == 0:
        raise ValueError("empty mesh")
    if axes is None:
        axes = pca_axes(mesh)
    pts = mesh.vertices
    span = pts.max(axis=0) - pts.min(axis=0)
    if float(np.linalg.norm(span)) < 1e-12:
        raise ValueError("all vertices coincident; bounding plane undefined")

    v1 = axes.eigenvectors[1]
    v2 = axes.eigenvectors[2]

    # Crown-side disambiguation of the projection normal.
    best = None
    for n_cand in (v2, -v2):
        pn = pts @ n_cand
        var = _near_band_variance(pn.max() - pn)
        if best is None or var > best[0] + 1e-15:
            best = (var, n_cand)
    normal = best[1]

    # Deterministic, rotation-covariant in-plane orientation.
    c1 = (pts - axes.mean) @ v1
    v_axis = v1 if float(np.sum(c1 ** 3)) >= 0 else -v1
    u_axis = np.cross(v_axis, normal)

    pu = pts @ u_axis
    pv = pts @ v_axis
    pn = pts @ normal
    plane_level = pn.max()
    depths = plane_level - pn
    raw, u0, v0 = _splat_depths(pu, pv, depths, pixel_size)
    origin = u0 * u_axis + v0 * v_axis + plane_level * normal
    frame = PlaneFrame(origin, u_axis, v_axis, normal, pixel_size)
    return Image2D(normalize01(raw), pixel_size), frame


def vertex_depths(mesh: TriMesh, frame: PlaneFrame) -> np.ndarray:
    """Per-vertex distance below the bounding plane (same scale as depth_image)."""
    pn = mesh.vertices @ frame.normal
    return float(frame.origin @ frame.normal) - pn


def project_to_frame(frame: PlaneFrame, points) -> np.ndarray:
    """Continuous pixel coordinates of world points in a plane frame."""
    p = np.atleast_2d(np.asarray(points, dtype=float)) - frame.origin
    px = (p @ frame.u_axis) / frame.pixel_size
    py = (p @ frame.v_axis) / frame.pixel_size
    return np.stack([px, py], axis=-1)


def lift_model_cue(frame: PlaneFrame, point2d, angle: float):
    """Lift a depth-image cue to a 3D point on the plane and an in-plane direction."""
    x, y = float(point2d[0]), float(point2d[1])
    point3d = frame.origin + x * frame.pixel_size * frame.u_axis + y * frame.pixel_size * frame.v_axis
    direction = math.cos(angle) * frame.u_axis + math.sin(angle) * frame.v_axis
    return point3d, direction


def lift_ct_cue(mip: Image2D, vol: CtVolume, point2d, angle: float):
    """Lift a MIP cue to 3D: the image plane sits at the volume's x midpoint."""
    px, py = float(point2d[0]), float(point2d[1])
    x_mid = vol.origin[0] + (vol.dims[0] - 1) * vol.spacing[0] / 2.0
    point3d = np.array([
        x_mid,
        vol.origin[1] + px * mip.pixel_size,
        vol.origin[2] + py * mip.pixel_size,
    ])
    direction = np.array([0.0, math.cos(angle), math.sin(angle)])
    return point3d, direction
