"""Triangle mesh container, vertex normals, and principal-axis analysis."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


class TriMesh:
    """Immutable triangle surface with vertex adjacency and cached normals.

    Vertices are in mm. Adjacency lists are edge-derived, sorted by index,
    and symmetric by construction.
    """

    def __init__(self, vertices, triangles):
        self.vertices = np.ascontiguousarray(vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
        n = len(self.vertices)
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= n):
            raise ValueError("triangle index out of range")
        self.vertex_adjacency = _build_adjacency(n, self.triangles)
        self._normals = None
        self._no_face_vertices = None

    @property
    def vertex_normals(self) -> np.ndarray:
        if self._normals is None:
            self._normals, self._no_face_vertices = compute_vertex_normals(self)
        return self._normals

    @property
    def no_face_vertices(self) -> np.ndarray:
        """Indices of vertices with no incident face (their normal is zero)."""
        self.vertex_normals
        return self._no_face_vertices

    def __len__(self) -> int:
        return len(self.vertices)


def _build_adjacency(n_vertices: int, triangles: np.ndarray) -> list:
    neighbor_sets = [set() for _ in range(n_vertices)]
    for a, b, c in triangles:
        neighbor_sets[a].update((b, c))
        neighbor_sets[b].update((a, c))
        neighbor_sets[c].update((a, b))
    return [np.array(sorted(s), dtype=np.int64) for s in neighbor_sets]


def compute_vertex_normals(mesh: TriMesh):
    """Area-weighted average of incident face normals, per vertex.

    Returns (normals, no_face_vertices). Vertices without incident faces get
    a zero normal and are reported in no_face_vertices; a mesh whose faces
    are all degenerate raises ValueError.
    """
    if len(mesh.triangles) < 1:
        raise ValueError("mesh has no triangles")
    v = mesh.vertices
    t = mesh.triangles
    # Cross product magnitude is twice the face area, so summing the raw
    # cross products is the area weighting.
    face_n = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
    normals = np.zeros_like(v)
    for k in range(3):
        np.add.at(normals, t[:, k], face_n)
    norms = np.linalg.norm(normals, axis=1)

    has_face = np.zeros(len(v), dtype=bool)
    has_face[t.ravel()] = True
    if not np.any(norms[has_face] > 1e-30):
        raise ValueError("all faces are degenerate; normals undefined")

    ok = norms > 1e-30
    normals[ok] /= norms[ok, None]
    normals[~ok] = 0.0
    no_face = np.where(~has_face)[0]
    return normals, no_face


@dataclass(frozen=True)
class PcaResult:
    """Mean, descending eigenvalues, and orthonormal axes (rows v0, v1, v2)."""

    mean: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def projection_normal(self) -> np.ndarray:
        """Axis of least variance; the depth-projection direction."""
        return self.eigenvectors[2]


def pca_axes(points) -> PcaResult:
    """Principal axes of a point set, population covariance (1/N)."""
    if isinstance(points, TriMesh):
        points = points.vertices
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("empty vertex set")
    mean = pts.mean(axis=0)
    centered = pts - mean
    cov = (centered.T @ centered) / len(pts)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.maximum(evals[order], 0.0)
    evecs = evecs[:, order].T
    return PcaResult(mean, evals, evecs)


# ---------------------------------------------------------------------------
# Mesh file I/O: ASCII OBJ and binary STL

def load_obj(path) -> TriMesh:
    """Read an ASCII OBJ (v/f records, 1-based indices; polygons fan-split)."""
    vertices = []
    faces = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise InputError(f"{path}:{lineno}: malformed vertex record")
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    if i < 0:
                        i = len(vertices) + 1 + i
                    idx.append(i - 1)
                if len(idx) < 3:
                    raise InputError(f"{path}:{lineno}: face with fewer than 3 vertices")
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not vertices:
        raise InputError(f"{path}: no vertices found")
    try:
        return TriMesh(vertices, faces)
    except ValueError as e:
        raise InputError(f"{path}: {e}") from e


def save_obj(path, mesh: TriMesh) -> None:
    with open(path, "w") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def load_stl(path, weld_tol: float = 1e-6) -> TriMesh:
    """Read a binary STL; soup vertices within weld_tol mm are merged."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 84:
        raise InputError(f"{path}: too short for binary STL")
    (n_tri,) = struct.unpack_from("<I", data, 80)
    if len(data) < 84 + 50 * n_tri:
        raise InputError(f"{path}: truncated binary STL ({n_tri} triangles declared)")
    raw = np.frombuffer(data, dtype=np.uint8, count=50 * n_tri, offset=84)
    rec = raw.reshape(n_tri, 50)
    tri_pts = rec[:, 12:48].copy().view("<f4").reshape(n_tri, 3, 3).astype(float)

    key_of = {}
    verts = []
    faces = np.empty((n_tri, 3), dtype=np.int64)
    inv = 1.0 / weld_tol
    for i in range(n_tri):
        for j in range(3):
            p = tri_pts[i, j]
            key = (round(p[0] * inv), round(p[1] * inv), round(p[2] * inv))
            k = key_of.get(key)
            if k is None:
                k = len(verts)
                key_of[key] = k
                verts.append(p)
            faces[i, j] = k
    degenerate = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
    return TriMesh(np.array(verts), faces[~degenerate])


def load_mesh(path) -> TriMesh:
    """Dispatch by extension: .obj or .stl."""
    p = str(path).lower()
    if p.endswith(".obj"):
        return load_obj(path)
    if p.endswith(".stl"):
        return load_stl(path)
    raise InputError(f"{path}: unsupported mesh format (expected .obj or .stl)")
