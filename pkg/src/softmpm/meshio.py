"""Triangle-mesh loading, export, and integrity checks (OBJ / binary STL)."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import MeshError


def load_mesh(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Load a triangle mesh; returns (vertices (V,3) float64, triangles (T,3) int32)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return load_obj(path)
    if suffix == ".stl":
        return load_stl(path)
    raise MeshError(f"unsupported mesh format: {path.name}")


def load_obj(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    verts: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
            elif parts[0] == "f":
                idx = []
                for token in parts[1:]:
                    i = int(token.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    tris.append((idx[0], idx[k], idx[k + 1]))
    if not verts or not tris:
        raise MeshError(f"{Path(path).name}: no triangles found")
    v = np.asarray(verts, dtype=np.float64)
    t = np.asarray(tris, dtype=np.int32)
    if t.min() < 0 or t.max() >= len(v):
        raise MeshError(f"{Path(path).name}: face index out of range")
    return v, t


def load_stl(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Binary STL loader; duplicate corner vertices are welded exactly."""
    raw = Path(path).read_bytes()
    if len(raw) < 84:
        raise MeshError(f"{Path(path).name}: truncated STL")
    (count,) = struct.unpack_from("<I", raw, 80)
    expected = 84 + count * 50
    if len(raw) < expected:
        raise MeshError(f"{Path(path).name}: STL payload shorter than header claims")
    data = np.frombuffer(raw, dtype=np.uint8, count=count * 50, offset=84)
    data = data.reshape(count, 50)
    tri_floats = data[:, :48].copy().view("<f4").reshape(count, 12)
    corners = tri_floats[:, 3:12].reshape(count * 3, 3).astype(np.float64)
    uniq, inverse = np.unique(corners, axis=0, return_inverse=True)
    tris = inverse.reshape(count, 3).astype(np.int32)
    return uniq, tris


def save_obj(path: str | Path, vertices: np.ndarray, triangles: np.ndarray,
             uvs: np.ndarray | None = None, normals: np.ndarray | None = None) -> None:
    """Write an OBJ with optional per-vertex uvs and normals (parallel arrays)."""
    lines: list[str] = []
    for vx, vy, vz in vertices:
        lines.append(f"v {vx:.9g} {vy:.9g} {vz:.9g}")
    if uvs is not None:
        for u, w in uvs:
            lines.append(f"vt {u:.9g} {w:.9g}")
    if normals is not None:
        for nx, ny, nz in normals:
            lines.append(f"vn {nx:.9g} {ny:.9g} {nz:.9g}")
    if uvs is not None and normals is not None:
        fmt = "f {0}/{0}/{0} {1}/{1}/{1} {2}/{2}/{2}"
    elif uvs is not None:
        fmt = "f {0}/{0} {1}/{1} {2}/{2}"
    elif normals is not None:
        fmt = "f {0}//{0} {1}//{1} {2}//{2}"
    else:
        fmt = "f {0} {1} {2}"
    for a, b, c in triangles:
        lines.append(fmt.format(a + 1, b + 1, c + 1))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def mesh_volume(vertices: np.ndarray, triangles: np.ndarray) -> float:
    """Enclosed volume by signed tetrahedra against the origin."""
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def check_watertight(vertices: np.ndarray, triangles: np.ndarray) -> None:
    """Raise MeshError unless the mesh is closed and consistently oriented.

    Closed + orientable means every directed edge appears exactly once and its
    reverse exists.
    """
    edges: dict[tuple[int, int], int] = {}
    for a, b, c in triangles:
        for e in ((int(a), int(b)), (int(b), int(c)), (int(c), int(a))):
            edges[e] = edges.get(e, 0) + 1
    for (a, b), n in edges.items():
        if n != 1:
            raise MeshError(f"mesh is not watertight: directed edge {a}->{b} used {n} times")
        if (b, a) not in edges:
            raise MeshError(f"mesh is not watertight: edge {a}->{b} has no opposite half-edge")


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def box_mesh(center=(0.0, 0.0, 0.0), size=(1.0, 1.0, 1.0)) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned box as 12 outward-facing triangles."""
    cx, cy, cz = center
    hx, hy, hz = size[0] / 2.0, size[1] / 2.0, size[2] / 2.0
    corners = np.array([
        [cx - hx, cy - hy, cz - hz],
        [cx + hx, cy - hy, cz - hz],
        [cx + hx, cy + hy, cz - hz],
        [cx - hx, cy + hy, cz - hz],
        [cx - hx, cy - hy, cz + hz],
        [cx + hx, cy - hy, cz + hz],
        [cx + hx, cy + hy, cz + hz],
        [cx - hx, cy + hy, cz + hz],
    ], dtype=np.float64)
    tris = np.array([
        [0, 2, 1], [0, 3, 2],          # -z
        [4, 5, 6], [4, 6, 7],          # +z
        [0, 1, 5], [0, 5, 4],          # -y
        [3, 6, 2], [3, 7, 6],          # +y
        [0, 4, 7], [0, 7, 3],          # -x
        [1, 2, 6], [1, 6, 5],          # +x
    ], dtype=np.int32)
    return corners, tris
