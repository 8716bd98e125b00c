"""Regular-grid scalar volume: world-space sampling, gradients, x-axis MIP."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a normal dependency
    _HAVE_NUMBA = False


class CtVolume:
    """Scalar image on a regular grid with physical spacing.

    data is indexed [i, j, k] along (x, y, z); origin is the world position
    of the center of voxel (0, 0, 0). Points outside the grid sample to
    `background` (default 0), never an error: optimizer probes may leave
    the volume and a constant background gives them zero gradient.
    """

    def __init__(self, data, spacing, origin, background: float = 0.0):
        # float64 in memory: the on-disk format is f32, but interpolation and
        # gradient tolerances want full precision.
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ValueError("volume data must be 3-dimensional")
        self.spacing = np.asarray(spacing, dtype=float).reshape(3)
        if np.any(self.spacing <= 0):
            raise ValueError("spacings must be positive")
        self.origin = np.asarray(origin, dtype=float).reshape(3)
        self.background = float(background)

    @property
    def dims(self):
        return self.data.shape

    def world_extent(self):
        """(lo, hi) world corners of the voxel-center bounding box."""
        hi = self.origin + (np.array(self.dims) - 1) * self.spacing
        return self.origin.copy(), hi


def sample_trilinear(vol: CtVolume, points) -> np.ndarray:
    """Trilinear interpolation at world points (3,) or (n, 3)."""
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    g = (p - vol.origin) / vol.spacing
    dims = np.array(vol.dims)
    inside = np.all((g >= 0.0) & (g <= dims - 1), axis=1)

    gc = np.clip(g, 0.0, dims - 1)
    i0 = np.minimum(gc.astype(np.int64), dims - 2)
    i0 = np.maximum(i0, 0)
    f = gc - i0
    x0, y0, z0 = i0[:, 0], i0[:, 1], i0[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    d = vol.data

    c000 = d[x0, y0, z0]
    c100 = d[x0 + 1, y0, z0]
    c010 = d[x0, y0 + 1, z0]
    c110 = d[x0 + 1, y0 + 1, z0]
    c001 = d[x0, y0, z0 + 1]
    c101 = d[x0 + 1, y0, z0 + 1]
    c011 = d[x0, y0 + 1, z0 + 1]
    c111 = d[x0 + 1, y0 + 1, z0 + 1]

    c00 = c000 * (1 - fx) + c100 * fx
    c10 = c010 * (1 - fx) + c110 * fx
    c01 = c001 * (1 - fx) + c101 * fx
    c11 = c011 * (1 - fx) + c111 * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    out = c0 * (1 - fz) + c1 * fz

    out = np.where(inside, out, vol.background)
    return float(out[0]) if single else out


if _HAVE_NUMBA:

    @numba.njit(cache=True, fastmath=False, inline="always")
    def _sample_grid(data, background, gx, gy, gz):
        nx, ny, nz = data.shape
        if gx < 0.0 or gy < 0.0 or gz < 0.0 or gx > nx - 1 or gy > ny - 1 or gz > nz - 1:
            return background
        i = int(gx)
        j = int(gy)
        k = int(gz)
        if i > nx - 2:
            i = nx - 2
        if j > ny - 2:
            j = ny - 2
        if k > nz - 2:
            k = nz - 2
        fx = gx - i
        fy = gy - j
        fz = gz - k
        c00 = data[i, j, k] * (1 - fx) + data[i + 1, j, k] * fx
        c10 = data[i, j + 1, k] * (1 - fx) + data[i + 1, j + 1, k] * fx
        c01 = data[i, j, k + 1] * (1 - fx) + data[i + 1, j, k + 1] * fx
        c11 = data[i, j + 1, k + 1] * (1 - fx) + data[i + 1, j + 1, k + 1] * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        return c0 * (1 - fz) + c1 * fz

    @numba.njit(cache=True, fastmath=False)
    def _gradient_kernel(data, ox, oy, oz, sx, sy, sz, background, pts, h, out):
        hx = h / sx
        hy = h / sy
        hz = h / sz
        for m in range(pts.shape[0]):
            gx = (pts[m, 0] - ox) / sx
            gy = (pts[m, 1] - oy) / sy
            gz = (pts[m, 2] - oz) / sz
            out[m, 0] = (_sample_grid(data, background, gx + hx, gy, gz)
                         - _sample_grid(data, background, gx - hx, gy, gz)) / (2 * h)
            out[m, 1] = (_sample_grid(data, background, gx, gy + hy, gz)
                         - _sample_grid(data, background, gx, gy - hy, gz)) / (2 * h)
            out[m, 2] = (_sample_grid(data, background, gx, gy, gz + hz)
                         - _sample_grid(data, background, gx, gy, gz - hz)) / (2 * h)


def gradient(vol: CtVolume, points) -> np.ndarray:
    """Central-difference gradient of the trilinear field, intensity per mm.

    Step h = min(spacing)/2 per axis. The magnitude is kept (edge strength),
    not normalized. Runs through a compiled kernel when numba is available;
    both paths evaluate the same IEEE arithmetic.
    """
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    n = len(p)
    h = float(vol.spacing.min()) / 2.0
    if _HAVE_NUMBA:
        out = np.empty((n, 3))
        _gradient_kernel(vol.data, vol.origin[0], vol.origin[1], vol.origin[2],
                         vol.spacing[0], vol.spacing[1], vol.spacing[2],
                         vol.background, np.ascontiguousarray(p), h, out)
        return out[0] if single else out
    probes = np.broadcast_to(p, (6, n, 3)).copy()
    for ax in range(3):
        probes[2 * ax, :, ax] += h
        probes[2 * ax + 1, :, ax] -= h
    vals = sample_trilinear(vol, probes.reshape(6 * n, 3)).reshape(6, n)
    g = np.stack([(vals[0] - vals[1]), (vals[2] - vals[3]), (vals[4] - vals[5])],
                 axis=1) / (2 * h)
    return g[0] if single else g


@dataclass
class Image2D:
    """Normalized 2D image; values[row, col] with values in [0, 1]."""

    values: np.ndarray
    pixel_size: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("Image2D values must be 2-dimensional")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def normalize01(values: np.ndarray) -> np.ndarray:
    """Affine min-max normalization; a constant image maps to all zeros."""
    vmin = float(values.min())
    vmax = float(values.max())
    if vmax - vmin <= 0:
        return np.zeros_like(values, dtype=float)
    return (values - vmin) / (vmax - vmin)


def mip_project_x(vol: CtVolume) -> Image2D:
    """Maximum-intensity projection along x; square pixels, normalized [0,1].

    Output pixel (px, py) maps to world (y, z) = origin_yz + (px, py) * s
    with s = min(sy, sz); rows are z, columns are y.
    """
    raw = vol.data.max(axis=0)  # (ny, nz), indices (j, k)
    sy, sz = float(vol.spacing[1]), float(vol.spacing[2])
    s = min(sy, sz)
    ny, nz = raw.shape
    if sy == sz:
        img = raw.T.astype(float)  # rows k (z), cols j (y)
    else:
        w = int(np.floor((ny - 1) * sy / s)) + 1
        h = int(np.floor((nz - 1) * sz / s)) + 1
        a = np.arange(w) * s / sy  # fractional j
        b = np.arange(h) * s / sz  # fractional k
        ja = np.minimum(a.astype(np.int64), ny - 2)
        kb = np.minimum(b.astype(np.int64), nz - 2)
        fa = a - ja
        fb = b - kb
        r00 = raw[np.ix_(ja, kb)]
        r10 = raw[np.ix_(ja + 1, kb)]
        r01 = raw[np.ix_(ja, kb + 1)]
        r11 = raw[np.ix_(ja + 1, kb + 1)]
        interp = (r00 * np.outer(1 - fa, 1 - fb) + r10 * np.outer(fa, 1 - fb)
                  + r01 * np.outer(1 - fa, fb) + r11 * np.outer(fa, fb))
        img = interp.T
    return Image2D(normalize01(img), s)
