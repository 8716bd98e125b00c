"""Procedural dental-arch phantoms: paired CT volume, surface mesh, and ground truth.

The scene is a pair of opposing parabolic arches of superellipsoid teeth on
bone blocks, in a fixed world convention (x left-right, +y anterior,
+z superior) with the scanned arch centered on the volume's x midline. The
mesh is the crown+gingiva heightfield surface of one jaw, displaced by the
configured ground-truth pose; registration has to recover its inverse.

Mesh triangle winding points vertex normals into the material (toward the
CT-bright side), which is the orientation the similarity criterion expects
at a correct registration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.spatial import cKDTree

from .cues import PoseCue
from .mesh import TriMesh
from .projection import depth_image, project_to_frame
from .transforms import (RigidTransform, TransformParams, apply, invert,
                         params_to_transform)
from .volume import CtVolume

JAW_GAP = 8.0             # mm between upper and lower occlusal reference levels
BAND_HALFWIDTH = 6.2      # mm, lateral half-extent of the bone/gingiva band
BLOCK_DEPTH = 9.0         # mm of bone below (above) the gum plane
CROWN_EXPOSURE = 7.0      # mm from gum plane to the occlusal reference level
TOOTH_EMBED = 1.5         # mm of tooth buried below the gum plane
ANTERIOR_BOOST = 2.6      # extra crown height of the four front teeth, mm
RING_BOOST = 0.6          # extra height of the next tooth out on each side, mm
SUPERELLIPSE_P = 3.0
CUSP_SIGMA = 1.0          # cusp bump width, mm
CUSP_AMP_RANGE = (1.0, 1.4)
METAL_CORE_SCALE = 0.55
BLOOM_SCALE = 1.45        # lateral growth of the bright bloom shell
BLOOM_EXTRA_MM = 2.5      # extra bloom height beyond the crown
BLOOM_HU = 3200.0
STREAK_RANGE = 25.0       # mm, hard limit of artifact influence
STREAK_TAU = 18.0         # mm, radial attenuation constant
STREAK_ANGULAR_SIGMA = math.radians(3.0)
STRONG_RAY_COUNT = 5      # asymmetric heavy streaks per artifact tooth
STRONG_RAY_SIGMA = math.radians(7.0)
STRONG_RAY_GAIN = 2.5
VOLUME_MARGIN = 5.0       # mm of soft tissue around the anatomy
N_LANDMARKS = 10


@dataclass
class PhantomConfig:
    arch_width: float = 70.0
    arch_depth: float = 60.0
    tooth_count: int = 16
    tooth_width_range: tuple = (5.2, 8.4)
    tooth_depth_range: tuple = (5.8, 8.8)
    tooth_height_range: tuple = (7.6, 8.2)
    jaw: str = "lower"
    bone_hu: float = 1400.0
    tooth_hu: float = 2200.0
    soft_hu: float = 0.0
    metal_hu: float = 8000.0
    artifact_tooth_fraction: float = 0.0
    streak_count: int = 18
    streak_intensity: float = 2800.0
    spacing: float = 0.4
    transition_mm: float = 1.2
    mesh_resolution: float = 0.8
    mesh_noise_sigma: float = 0.0
    gt_params: TransformParams = field(default_factory=TransformParams)
    seed: int = 0

    def validate(self) -> None:
        if not (self.soft_hu < self.bone_hu < self.tooth_hu < self.metal_hu):
            raise ValueError("intensities must be ordered soft < bone < tooth < metal")
        if not (0.0 <= self.artifact_tooth_fraction <= 1.0):
            raise ValueError("artifact_tooth_fraction must be in [0, 1]")
        if self.jaw not in ("upper", "lower"):
            raise ValueError("jaw must be 'upper' or 'lower'")
        if self.tooth_count < N_LANDMARKS:
            raise ValueError(f"tooth_count must be >= {N_LANDMARKS} for landmarks")
        if self.spacing <= 0 or self.mesh_resolution <= 0:
            raise ValueError("spacing and mesh_resolution must be positive")


@dataclass
class PhantomTruth:
    gt_transform: RigidTransform          # mesh -> CT
    landmarks: np.ndarray                 # (10, 3), mesh coordinates
    gt_cues: list                         # PoseCue for model_depth + both MIP jaws
    artifact_mask: np.ndarray             # bool per mesh vertex
    geometry: dict                        # scene internals (tooth table, levels)


# ---------------------------------------------------------------------------
# Scene construction

def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _indicator(signed_dist, width):
    """1 inside, 0 outside, smooth over `width` mm centered on the boundary."""
    return _smoothstep(0.5 - signed_dist / width)


def _arch_curve(width, depth, n=1025):
    half = width / 2.0
    x = np.linspace(-half, half, n)
    y = depth / 2.0 - depth * (x / half) ** 2
    return np.column_stack([x, y])


def _equal_arc_positions(curve, count):
    seg = np.linalg.norm(np.diff(curve, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    # Half-pitch inset at both ends keeps the outermost teeth on the curve.
    targets = (np.arange(count) + 0.5) * total / count
    xs = np.interp(targets, s, curve[:, 0])
    ys = np.interp(targets, s, curve[:, 1])
    # Tangents by finite differences along the curve parameters.
    eps = total / (len(curve) * 2)
    xs2 = np.interp(targets + eps, s, curve[:, 0])
    ys2 = np.interp(targets + eps, s, curve[:, 1])
    tx, ty = xs2 - xs, ys2 - ys
    norm = np.hypot(tx, ty)
    return xs, ys, tx / norm, ty / norm, targets / total


def _height_boost(count):
    boost = np.zeros(count)
    mid = (count - 1) / 2.0
    for i in range(count):
        d = abs(i - mid)
        if d <= 1.5:
            boost[i] = ANTERIOR_BOOST
        elif d <= 2.5:
            boost[i] = RING_BOOST
    return boost


def _cusp_layout(u: float, a: float, b: float, rng) -> list:
    """Occlusal cusp bumps (local (x, y, amplitude)); molars get four cusps,
    premolars two, incisors an incisal ridge pair."""
    if u >= 0.45:
        offsets = [(-0.4 * a, -0.4 * b), (-0.4 * a, 0.4 * b),
                   (0.4 * a, -0.4 * b), (0.4 * a, 0.4 * b)]
        amp_scale = 1.0
    elif u >= 0.2:
        offsets = [(0.0, -0.4 * b), (0.0, 0.4 * b)]
        amp_scale = 1.0
    else:
        offsets = [(-0.35 * a, 0.0), (0.35 * a, 0.0)]
        amp_scale = 0.7
    amps = rng.uniform(CUSP_AMP_RANGE[0], CUSP_AMP_RANGE[1], size=len(offsets))
    return [(float(ox), float(oy), float(amp * amp_scale))
            for (ox, oy), amp in zip(offsets, amps)]


def _tooth_height_profile(tooth, qx, qy):
    """Crown height above the gum plane at local footprint coordinates.

    Zero at (and beyond) the footprint boundary, so jaw surfaces assembled
    from these profiles are continuous; the cusp bumps taper with the crown
    flank. Both the voxelizer and the mesh heightfield evaluate this same
    function, which keeps their surfaces identical.
    """
    a, b = tooth["axes"]
    p = SUPERELLIPSE_P
    fxy = np.minimum(np.abs(qx / a) ** p + np.abs(qy / b) ** p, 1.0)
    flank = 1.0 - _smoothstep(fxy)
    h = tooth["exposure"] * flank
    two_s2 = 2.0 * tooth["cusp_sigma"] ** 2
    for cx, cy, amp in tooth["cusps"]:
        h = h + amp * np.exp(-((qx - cx) ** 2 + (qy - cy) ** 2) / two_s2) * flank
    return h


def _tooth_tip(tooth, z_gum):
    """World position and height of the crown's highest point (a cusp apex)."""
    candidates = [(0.0, 0.0)] + [(cx, cy) for cx, cy, _amp in tooth["cusps"]]
    qx = np.array([c[0] for c in candidates])
    qy = np.array([c[1] for c in candidates])
    z = z_gum + tooth["up"] * _tooth_height_profile(tooth, qx, qy)
    k = int(np.argmax(tooth["up"] * z))
    ex, ey = tooth["ex"], tooth["ey"]
    cx, cy = tooth["center"]
    wx = cx + qx[k] * ex[0] + qy[k] * ey[0]
    wy = cy + qx[k] * ex[1] + qy[k] * ey[1]
    return (float(wx), float(wy), float(z[k])), float(z[k])


def _build_jaw(cfg: PhantomConfig, rng, side: str) -> dict:
    """Tooth table and levels for one jaw. The upper arch is slightly wider
    and deeper so opposing front teeth do not collide."""
    widen = 4.0 if side == "upper" else 0.0
    deepen = 3.0 if side == "upper" else 0.0
    curve = _arch_curve(cfg.arch_width + widen, cfg.arch_depth + deepen)
    xs, ys, tx, ty, arc = _equal_arc_positions(curve, cfg.tooth_count)
    u = np.abs(arc * 2.0 - 1.0)  # 0 at arch apex (front), 1 at the ends

    w_lo, w_hi = cfg.tooth_width_range
    d_lo, d_hi = cfg.tooth_depth_range
    h_lo, h_hi = cfg.tooth_height_range
    h_mid = 0.5 * (h_lo + h_hi)
    jit = rng.uniform(-0.3, 0.3, size=(cfg.tooth_count, 2))
    widths = w_lo + (w_hi - w_lo) * u ** 1.2 + jit[:, 0]
    depths = d_lo + (d_hi - d_lo) * u ** 1.2 + jit[:, 1]
    heights = rng.uniform(h_lo, h_hi, size=cfg.tooth_count)

    z_occ = (-1.0 if side == "lower" else 1.0) * JAW_GAP / 2.0
    if side == "lower":
        z_gum = z_occ - CROWN_EXPOSURE
        z_block = (z_gum - BLOCK_DEPTH, z_gum)
    else:
        z_gum = z_occ + CROWN_EXPOSURE
        z_block = (z_gum, z_gum + BLOCK_DEPTH)

    boosts = _height_boost(cfg.tooth_count)
    up = 1.0 if side == "lower" else -1.0  # crown growth direction
    teeth = []
    for i in range(cfg.tooth_count):
        a, b = widths[i] / 2.0, depths[i] / 2.0
        exposure = CROWN_EXPOSURE + (heights[i] - h_mid) + boosts[i]
        cusps = _cusp_layout(u[i], a, b, rng)
        tooth = {
            "center": (float(xs[i]), float(ys[i])),
            "axes": (float(a), float(b)),
            "ex": (float(tx[i]), float(ty[i]), 0.0),
            "ey": (float(-ty[i]), float(tx[i]), 0.0),
            "up": up,
            "exposure": float(exposure),
            "z_gum": float(z_gum),
            "root": float(z_gum - up * TOOTH_EMBED),
            "cusp_sigma": CUSP_SIGMA,
            "cusps": cusps,
            "artifact": False,
        }
        tooth["tip_point"], tooth["tip_z"] = _tooth_tip(tooth, z_gum)
        teeth.append(tooth)

    # Adjacent teeth must not interpenetrate.
    for a, b in zip(teeth[:-1], teeth[1:]):
        gap = math.dist(a["center"][:2], b["center"][:2])
        if gap < 0.92 * (a["axes"][0] + b["axes"][0]):
            raise ValueError("config produces overlapping teeth")

    arch_center = (0.0, float(np.mean(ys)), float(z_occ))
    return {
        "side": side,
        "curve": curve,
        "teeth": teeth,
        "z_occ": float(z_occ),
        "z_gum": float(z_gum),
        "z_block": (float(z_block[0]), float(z_block[1])),
        "arch_center": arch_center,
    }


def build_scene(cfg: PhantomConfig) -> dict:
    """Deterministic scene description for a config (teeth, levels, artifacts)."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    jaws = {"lower": _build_jaw(cfg, rng, "lower"),
            "upper": _build_jaw(cfg, rng, "upper")}
    n_art = int(round(cfg.artifact_tooth_fraction * cfg.tooth_count))
    if n_art > 0:
        rng_art = np.random.default_rng(cfg.seed + 0x9E3779B9)
        chosen = sorted(rng_art.choice(cfg.tooth_count, size=n_art, replace=False).tolist())
        for i in chosen:
            jaws[cfg.jaw]["teeth"][i]["artifact"] = True
    return {"jaws": jaws, "scanned": cfg.jaw, "seed": cfg.seed}


# ---------------------------------------------------------------------------
# Implicit field evaluation

def _tooth_local(tooth, X, Y):
    cx, cy = tooth["center"]
    ex = tooth["ex"]
    ey = tooth["ey"]
    dx, dy = X - cx, Y - cy
    qx = dx * ex[0] + dy * ex[1]
    qy = dx * ey[0] + dy * ey[1]
    return qx, qy


def _lateral_signed_distance(qx, qy, a, b):
    """Approximate signed distance (mm, negative inside) to the footprint
    superellipse."""
    p = SUPERELLIPSE_P
    m = (np.abs(qx / a) ** p + np.abs(qy / b) ** p) ** (1.0 / p)
    r = np.hypot(qx, qy)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(m > 1e-9, r * (m - 1.0) / np.maximum(m, 1e-9), -min(a, b))


def _tooth_recolor_indicator(tooth, X, Y, Z, width):
    """Smooth indicator of the tooth's material region (crown plus embedded
    root). The crown surface itself belongs to the jaw heightfield; this only
    recolors bone to tooth intensity inside it."""
    a, b = tooth["axes"]
    qx, qy = _tooth_local(tooth, X, Y)
    d_lat = _lateral_signed_distance(qx, qy, a, b)
    z_top = tooth["z_gum"] + tooth["up"] * _tooth_height_profile(tooth, qx, qy)
    if tooth["up"] > 0:
        d_top = Z - z_top
        d_bot = tooth["root"] - Z
    else:
        d_top = z_top - Z
        d_bot = Z - tooth["root"]
    return _indicator(d_lat, width) * _indicator(d_top, width) * _indicator(d_bot, width)


def _tooth_membership(tooth, pts, tol: float = 1.0):
    """Boolean membership of points within `tol` mm of the tooth solid."""
    qx, qy = _tooth_local(tooth, pts[:, 0], pts[:, 1])
    d_lat = _lateral_signed_distance(qx, qy, *tooth["axes"])
    z = pts[:, 2]
    z_top = tooth["z_gum"] + tooth["up"] * _tooth_height_profile(tooth, qx, qy)
    if tooth["up"] > 0:
        in_z = (z <= z_top + tol) & (z >= tooth["root"] - tol)
    else:
        in_z = (z >= z_top - tol) & (z <= tooth["root"] + tol)
    return (d_lat <= tol) & in_z


def _tooth_z_span(tooth):
    tip = tooth["z_gum"] + tooth["up"] * (tooth["exposure"]
                                          + max(a for _x, _y, a in tooth["cusps"]))
    lo = min(tooth["root"], tip)
    return lo, max(tooth["root"], tip)


def _metal_core_indicator(tooth, X, Y, Z, width):
    """Superellipsoid core buried in the crown, scaled by METAL_CORE_SCALE."""
    a, b = (s * METAL_CORE_SCALE for s in tooth["axes"])
    z_lo, z_hi = _tooth_z_span(tooth)
    zc = 0.5 * (z_lo + z_hi)
    c = (z_hi - z_lo) / 2.0 * METAL_CORE_SCALE
    qx, qy = _tooth_local(tooth, X, Y)
    qz = Z - zc
    p = SUPERELLIPSE_P
    m = (np.abs(qx / a) ** p + np.abs(qy / b) ** p + np.abs(qz / c) ** p) ** (1.0 / p)
    r = np.sqrt(qx * qx + qy * qy + qz * qz)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(m > 1e-9, r * (m - 1.0) / np.maximum(m, 1e-9), -min(a, b, c))
    return _indicator(d, width)


def _polyline_distance_2d(curve, X, Y):
    tree = cKDTree(curve)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    d, _ = tree.query(pts)
    return d.reshape(X.shape)


def _jaw_indicator(jaw, xs, ys, zs, width):
    """Solid jaw: the arch band extruded from the block base to the shared
    crown+gingiva heightfield."""
    Xg, Yg = np.meshgrid(xs, ys, indexing="ij")
    d2d = _polyline_distance_2d(jaw["curve"], Xg, Yg)
    s_xy = _indicator(d2d - BAND_HALFWIDTH, width)
    z_surf = _surface_height(jaw, Xg, Yg)[:, :, None]
    z = zs[None, None, :]
    if jaw["side"] == "lower":
        d_top = z - z_surf
        d_bot = jaw["z_block"][0] - z
    else:
        d_top = z_surf - z
        d_bot = z - jaw["z_block"][1]
    return s_xy[:, :, None] * _indicator(d_top, width) * _indicator(d_bot, width)


def _bbox_slices(center, half_extents, xs, ys, zs, pad):
    out = []
    for c, h, axis in zip(center, half_extents, (xs, ys, zs)):
        lo = np.searchsorted(axis, c - h - pad)
        hi = np.searchsorted(axis, c + h + pad, side="right")
        out.append(slice(max(lo, 0), min(hi, len(axis))))
    return tuple(out)


def _tooth_bbox(tooth, xs, ys, zs, pad):
    a, b = tooth["axes"]
    half_xy = max(a, b)
    z_lo, z_hi = _tooth_z_span(tooth)
    center = (tooth["center"][0], tooth["center"][1], 0.5 * (z_lo + z_hi))
    return _bbox_slices(center, (half_xy, half_xy, 0.5 * (z_hi - z_lo)), xs, ys, zs, pad)


def build_volume(scene: dict, cfg: PhantomConfig) -> CtVolume:
    """Voxelize the clean scene (no metal, no streaks)."""
    jaws = scene["jaws"]
    x_half = (jaws["upper"]["curve"][:, 0].max() + BAND_HALFWIDTH + VOLUME_MARGIN)
    y_lo = min(j["curve"][:, 1].min() for j in jaws.values()) - BAND_HALFWIDTH - VOLUME_MARGIN
    y_hi = max(j["curve"][:, 1].max() for j in jaws.values()) + BAND_HALFWIDTH + VOLUME_MARGIN
    z_lo = jaws["lower"]["z_block"][0] - VOLUME_MARGIN
    z_hi = jaws["upper"]["z_block"][1] + VOLUME_MARGIN

    sp = cfg.spacing
    nx = int(math.ceil(2 * x_half / sp)) + 1
    ny = int(math.ceil((y_hi - y_lo) / sp)) + 1
    nz = int(math.ceil((z_hi - z_lo) / sp)) + 1
    # Keep the grid symmetric in x so the MIP midline matches the arch midline.
    origin = np.array([-(nx - 1) * sp / 2.0, y_lo, z_lo])
    xs = origin[0] + np.arange(nx) * sp
    ys = origin[1] + np.arange(ny) * sp
    zs = origin[2] + np.arange(nz) * sp

    w = cfg.transition_mm
    data = np.full((nx, ny, nz), cfg.soft_hu, dtype=float)
    for jaw in jaws.values():
        sb = _jaw_indicator(jaw, xs, ys, zs, w)
        data = data * (1.0 - sb) + cfg.bone_hu * sb

    st = np.zeros_like(data)
    for jaw in jaws.values():
        for tooth in jaw["teeth"]:
            sl = _tooth_bbox(tooth, xs, ys, zs, pad=2.0 * w)
            X, Y, Z = np.meshgrid(xs[sl[0]], ys[sl[1]], zs[sl[2]], indexing="ij")
            np.maximum(st[sl], _tooth_recolor_indicator(tooth, X, Y, Z, w), out=st[sl])
    data = data * (1.0 - st) + cfg.tooth_hu * st
    return CtVolume(data.astype(np.float32), (sp, sp, sp), origin,
                    background=cfg.soft_hu)


def inject_artifacts(vol: CtVolume, truth, cfg: PhantomConfig) -> CtVolume:
    """Add metal cores and radial streaks around the flagged artifact teeth.

    `truth` is a PhantomTruth or its geometry dict. Voxels farther than
    STREAK_RANGE from every artifact tooth center are returned unchanged.
    """
    truth_geometry = truth.geometry if isinstance(truth, PhantomTruth) else truth
    teeth = [t for t in truth_geometry["teeth"] if t["artifact"]]
    data = vol.data.astype(float).copy()
    if not teeth:
        return CtVolume(data.astype(np.float32), vol.spacing, vol.origin, vol.background)
    nx, ny, nz = vol.dims
    xs = vol.origin[0] + np.arange(nx) * vol.spacing[0]
    ys = vol.origin[1] + np.arange(ny) * vol.spacing[1]
    zs = vol.origin[2] + np.arange(nz) * vol.spacing[2]
    w = cfg.transition_mm

    for idx, tooth in enumerate(truth_geometry["teeth"]):
        if not tooth["artifact"]:
            continue
        z_lo, z_hi = _tooth_z_span(tooth)
        zc = 0.5 * (z_lo + z_hi)
        center = (tooth["center"][0], tooth["center"][1], zc)

        # Bloom: a bright shell pushing the apparent crown boundary outward.
        bloated = dict(tooth)
        bloated["axes"] = tuple(a * BLOOM_SCALE for a in tooth["axes"])
        bloated["exposure"] = tooth["exposure"] + BLOOM_EXTRA_MM
        half_xy = max(bloated["axes"])
        c_half = (z_hi - z_lo) / 2.0 + BLOOM_EXTRA_MM
        sl = _bbox_slices(center, (half_xy, half_xy, c_half), xs, ys, zs, pad=2.0 * w)
        X, Y, Z = np.meshgrid(xs[sl[0]], ys[sl[1]], zs[sl[2]], indexing="ij")
        sb = _tooth_recolor_indicator(bloated, X, Y, Z, w)
        data[sl] = data[sl] * (1.0 - sb) + BLOOM_HU * sb

        # Metal core.
        core_half = max(tooth["axes"]) * METAL_CORE_SCALE
        core_c = (z_hi - z_lo) / 2.0 * METAL_CORE_SCALE
        sl = _bbox_slices(center, (core_half, core_half, core_c), xs, ys, zs, pad=2.0 * w)
        X, Y, Z = np.meshgrid(xs[sl[0]], ys[sl[1]], zs[sl[2]], indexing="ij")
        sm = _metal_core_indicator(tooth, X, Y, Z, w)
        data[sl] = data[sl] * (1.0 - sm) + cfg.metal_hu * sm

        # Streaks in axial planes through the core: a fine alternating fan
        # plus a few strong one-sided rays (real streaks are not symmetric,
        # and symmetric ones cancel out of least-squares baselines).
        sl = _bbox_slices(center, (STREAK_RANGE, STREAK_RANGE, STREAK_RANGE), xs, ys, zs, 0.0)
        X, Y, Z = np.meshgrid(xs[sl[0]], ys[sl[1]], zs[sl[2]], indexing="ij")
        dx, dy, dz = X - center[0], Y - center[1], Z - center[2]
        r2d = np.hypot(dx, dy)
        r3d = np.sqrt(dx * dx + dy * dy + dz * dz)
        phase = 2.0 * math.pi * math.modf(0.6180339887 * (cfg.seed * 31 + idx * 7 + 13))[0]
        step = 2.0 * math.pi / cfg.streak_count
        phi = np.arctan2(dy, dx) - phase
        k = np.round(phi / step)
        dphi = phi - k * step
        sign = np.where(np.mod(k.astype(np.int64), 2) == 0, 1.0, -1.0)
        z_sigma = core_c + 1.0
        z_window = np.exp(-0.5 * (dz / z_sigma) ** 2)
        amp = (cfg.streak_intensity * sign
               * np.exp(-0.5 * (dphi / STREAK_ANGULAR_SIGMA) ** 2)
               * np.exp(-r2d / STREAK_TAU)
               * z_window)
        for ray in range(STRONG_RAY_COUNT):
            frac = math.modf(0.6180339887 * (cfg.seed * 53 + idx * 17 + ray * 5 + 3))[0]
            ray_phi = 2.0 * math.pi * frac
            ray_sign = 1.0 if (ray + idx) % 2 == 0 else -1.0
            dphi_ray = np.angle(np.exp(1j * (phi + phase - ray_phi)))
            amp += (cfg.streak_intensity * STRONG_RAY_GAIN * ray_sign
                    * np.exp(-0.5 * (dphi_ray / STRONG_RAY_SIGMA) ** 2)
                    * np.exp(-r2d / STREAK_TAU)
                    * z_window)
        amp *= _smoothstep((r2d - core_half) / 1.0)
        amp[r3d > STREAK_RANGE] = 0.0
        data[sl] += amp
    return CtVolume(data.astype(np.float32), vol.spacing, vol.origin, vol.background)


# ---------------------------------------------------------------------------
# Mesh construction

def _surface_height(jaw: dict, X, Y):
    """Analytic crown+gingiva heightfield of one jaw over (x, y).

    Tooth profiles vanish at their footprint boundaries, so the assembled
    surface is continuous across the gum plane.
    """
    z = np.full(X.shape, jaw["z_gum"], dtype=float)
    for tooth in jaw["teeth"]:
        qx, qy = _tooth_local(tooth, X, Y)
        z_top = tooth["z_gum"] + tooth["up"] * _tooth_height_profile(tooth, qx, qy)
        if jaw["side"] == "lower":
            z = np.maximum(z, z_top)
        else:
            z = np.minimum(z, z_top)
    return z


def build_mesh(scene: dict, cfg: PhantomConfig, rng) -> TriMesh:
    """Heightfield surface of the scanned jaw, in canonical (CT) coordinates.

    Triangles are wound so vertex normals point into the material.
    """
    jaw = scene["jaws"][scene["scanned"]]
    res = cfg.mesh_resolution
    x_lo = jaw["curve"][:, 0].min() - BAND_HALFWIDTH
    x_hi = jaw["curve"][:, 0].max() + BAND_HALFWIDTH
    y_lo = jaw["curve"][:, 1].min() - BAND_HALFWIDTH
    y_hi = jaw["curve"][:, 1].max() + BAND_HALFWIDTH
    nx = int(math.ceil((x_hi - x_lo) / res)) + 1
    ny = int(math.ceil((y_hi - y_lo) / res)) + 1
    # Symmetric x grid: keeps the principal axes aligned with the world frame.
    xs = (np.arange(nx) - (nx - 1) / 2.0) * res
    ys = y_lo + np.arange(ny) * res
    Xg, Yg = np.meshgrid(xs, ys, indexing="ij")
    d2d = _polyline_distance_2d(jaw["curve"], Xg, Yg)
    mask = d2d <= BAND_HALFWIDTH
    Z = _surface_height(jaw, Xg, Yg)

    index = np.full(mask.shape, -1, dtype=np.int64)
    index[mask] = np.arange(int(mask.sum()))
    verts = np.column_stack([Xg[mask], Yg[mask], Z[mask]])

    tris = []
    lower = jaw["side"] == "lower"
    for i in range(nx - 1):
        for j in range(ny - 1):
            v00, v10 = index[i, j], index[i + 1, j]
            v01, v11 = index[i, j + 1], index[i + 1, j + 1]
            if min(v00, v10, v01, v11) < 0:
                continue
            if lower:
                tris.append((v00, v01, v10))
                tris.append((v10, v01, v11))
            else:
                tris.append((v00, v10, v01))
                tris.append((v10, v11, v01))
    if cfg.mesh_noise_sigma > 0:
        verts = verts + rng.normal(0.0, cfg.mesh_noise_sigma, size=verts.shape)
    return TriMesh(verts, np.array(tris, dtype=np.int64))


# ---------------------------------------------------------------------------
# Ground truth and assembly

def _select_landmark_teeth(count):
    start = (count - N_LANDMARKS) // 2
    return list(range(start, start + N_LANDMARKS))


def _ground_truth_cues(scene, cfg, mesh_moved, move: RigidTransform,
                       vol: CtVolume):
    """Exact cues: the depth-plane projection of the arch anchor and the
    anterior axis, mapped through the ground-truth pose for the CT side."""
    gt = invert(move)  # mesh -> CT
    img, frame = depth_image(mesh_moved)
    jaw = scene["jaws"][scene["scanned"]]
    anchor_ct = np.array(jaw["arch_center"])
    anchor_mesh = apply(move, anchor_ct)
    px = project_to_frame(frame, anchor_mesh)[0]

    d_mesh = move.rotation @ np.array([0.0, 1.0, 0.0])  # anterior axis, mesh space
    d_inplane = d_mesh - (d_mesh @ frame.normal) * frame.normal
    d_inplane /= np.linalg.norm(d_inplane)
    angle_model = math.atan2(float(d_inplane @ frame.v_axis),
                             float(d_inplane @ frame.u_axis))
    model_cue = PoseCue((px[0], px[1]), angle_model, "model_depth")

    # CT-side cue for the scanned jaw: image of the on-plane anchor.
    s = min(vol.spacing[1], vol.spacing[2])
    anchor_plane = frame.origin + (px[0] * frame.pixel_size * frame.u_axis
                                   + px[1] * frame.pixel_size * frame.v_axis)
    q = apply(gt, anchor_plane)
    d_ct = gt.rotation @ d_inplane
    angle_ct = math.atan2(float(d_ct[2]), float(d_ct[1]))
    px_ct = ((q[1] - vol.origin[1]) / s, (q[2] - vol.origin[2]) / s)
    scanned_source = "ct_mip_lower" if scene["scanned"] == "lower" else "ct_mip_upper"
    ct_cue = PoseCue(px_ct, angle_ct, scanned_source)

    # Opposing jaw: anatomical arch center, horizontal occlusal line.
    other = "upper" if scene["scanned"] == "lower" else "lower"
    oc = scene["jaws"][other]["arch_center"]
    px_other = ((oc[1] - vol.origin[1]) / s, (oc[2] - vol.origin[2]) / s)
    other_source = "ct_mip_upper" if other == "upper" else "ct_mip_lower"
    other_cue = PoseCue(px_other, 0.0, other_source)
    return [model_cue, ct_cue, other_cue], frame


def generate_phantom(cfg: PhantomConfig):
    """Build (CtVolume, TriMesh, PhantomTruth) deterministically from the config."""
    cfg.validate()
    scene = build_scene(cfg)
    volume = build_volume(scene, cfg)

    rng_mesh = np.random.default_rng(cfg.seed + 1)
    mesh_canonical = build_mesh(scene, cfg, rng_mesh)
    move = params_to_transform(cfg.gt_params)
    mesh = TriMesh(apply(move, mesh_canonical.vertices), mesh_canonical.triangles)
    gt_transform = invert(move)

    jaw = scene["jaws"][scene["scanned"]]
    tree = cKDTree(mesh_canonical.vertices)
    landmarks = []
    for i in _select_landmark_teeth(cfg.tooth_count):
        _, vi = tree.query(jaw["teeth"][i]["tip_point"])
        landmarks.append(mesh.vertices[vi])
    landmarks = np.array(landmarks)

    artifact_mask = np.zeros(len(mesh.vertices), dtype=bool)
    for tooth in jaw["teeth"]:
        if tooth["artifact"]:
            artifact_mask |= _tooth_membership(tooth, mesh_canonical.vertices)

    geometry = {
        "teeth": jaw["teeth"],
        "scanned": scene["scanned"],
        "arch_center": jaw["arch_center"],
        "z_occ": jaw["z_occ"],
        "z_gum": jaw["z_gum"],
        "opposing_arch_center": scene["jaws"]["upper" if cfg.jaw == "lower" else "lower"]["arch_center"],
    }

    if any(t["artifact"] for t in jaw["teeth"]):
        volume = inject_artifacts(volume, geometry, cfg)

    cues, _frame = _ground_truth_cues(scene, cfg, mesh, move, volume)
    truth = PhantomTruth(gt_transform, landmarks, cues, artifact_mask, geometry)
    return volume, mesh, truth


# ---------------------------------------------------------------------------
# Truth serialization

def save_truth(path, truth: PhantomTruth, cfg: PhantomConfig | None = None) -> None:
    doc = {
        "gt_transform": {
            "rotation": truth.gt_transform.rotation.tolist(),
            "translation": truth.gt_transform.translation.tolist(),
        },
        "landmarks": truth.landmarks.tolist(),
        "cues": [
            {"source": c.source, "point_px": [c.point[0], c.point[1]], "angle_rad": c.angle}
            for c in truth.gt_cues
        ],
        "artifact_vertices": np.nonzero(truth.artifact_mask)[0].tolist(),
        "n_vertices": int(truth.artifact_mask.size),
        "geometry": truth.geometry,
    }
    if cfg is not None:
        cfg_doc = asdict(cfg)
        cfg_doc["gt_params"] = list(cfg.gt_params.as_array())
        doc["config"] = cfg_doc
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_truth(path) -> PhantomTruth:
    with open(path) as fh:
        doc = json.load(fh)
    gt = RigidTransform(np.array(doc["gt_transform"]["rotation"]),
                        np.array(doc["gt_transform"]["translation"]))
    cues = [PoseCue(tuple(c["point_px"]), c["angle_rad"], c["source"])
            for c in doc["cues"]]
    mask = np.zeros(doc["n_vertices"], dtype=bool)
    mask[np.array(doc["artifact_vertices"], dtype=np.int64)] = True
    return PhantomTruth(gt, np.array(doc["landmarks"]), cues, mask,
                        doc.get("geometry", {}))
