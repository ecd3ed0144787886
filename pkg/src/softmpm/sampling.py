"""Initial particle generation from boxes and watertight triangle meshes.

Sampling is stratified-jittered and fully seeded so scene construction is
reproducible. Every particle carries rest volume = source volume / count, so
total mass is exact by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import SpawnError
from .meshio import check_watertight, mesh_volume


@dataclass
class ParticleSpawn:
    positions: np.ndarray
    rest_volume_per_particle: float
    material_id: int


def _check_margin(positions: np.ndarray, grid) -> None:
    if grid is None:
        return
    lo, hi = grid.margin_bounds()
    if (positions < lo).any() or (positions > hi).any():
        raise SpawnError("spawn volume violates the 1.5-cell domain margin")


def _strata(size: np.ndarray, count: int) -> np.ndarray:
    """Per-axis stratum counts, roughly cubical cells, product >= count."""
    cell = (float(np.prod(size)) / count) ** (1.0 / 3.0)
    s = np.maximum(1, np.round(size / cell).astype(int))
    while int(np.prod(s)) < count:
        s[int(np.argmax(size / s))] += 1
    return s


def sample_box(center, size, count: int, seed: int,
               material_id: int = 0, grid=None) -> ParticleSpawn:
    """Uniform stratified-jitter fill of an axis-aligned box."""
    if count <= 0:
        raise SpawnError("count must be positive")
    center = np.asarray(center, dtype=np.float64)
    size = np.asarray(size, dtype=np.float64)
    if not (size > 0).all():
        raise SpawnError(f"box size must be positive, got {size}")
    rng = np.random.default_rng(seed)
    s = _strata(size, count)
    cells = np.stack(np.unravel_index(np.arange(int(np.prod(s))), s), axis=1)
    chosen = cells[rng.permutation(len(cells))[:count]]
    jitter = rng.random((count, 3))
    positions = (center - 0.5 * size) + (chosen + jitter) * (size / s)
    _check_margin(positions, grid)
    volume = float(np.prod(size))
    return ParticleSpawn(positions=positions,
                         rest_volume_per_particle=volume / count,
                         material_id=material_id)


@njit(cache=True, parallel=True)
def _points_inside(verts, tris, pts, out):
    """Ray-parity point-in-mesh test (+z rays, half-open barycentric rule)."""
    ntri = tris.shape[0]
    for m in prange(pts.shape[0]):
        px = pts[m, 0] + 1.23456789e-9
        py = pts[m, 1] + 1.98765432e-9
        pz = pts[m, 2]
        crossings = 0
        for t in range(ntri):
            x1 = verts[tris[t, 0], 0]
            y1 = verts[tris[t, 0], 1]
            z1 = verts[tris[t, 0], 2]
            x2 = verts[tris[t, 1], 0]
            y2 = verts[tris[t, 1], 1]
            z2 = verts[tris[t, 1], 2]
            x3 = verts[tris[t, 2], 0]
            y3 = verts[tris[t, 2], 1]
            z3 = verts[tris[t, 2], 2]
            denom = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
            if abs(denom) < 1.0e-30:
                continue
            l1 = ((y2 - y3) * (px - x3) + (x3 - x2) * (py - y3)) / denom
            l2 = ((y3 - y1) * (px - x3) + (x1 - x3) * (py - y3)) / denom
            l3 = 1.0 - l1 - l2
            if l1 <= 0.0 or l2 <= 0.0 or l3 <= 0.0:
                continue
            if l1 * z1 + l2 * z2 + l3 * z3 > pz:
                crossings += 1
        out[m] = crossings & 1


def points_inside_mesh(vertices: np.ndarray, triangles: np.ndarray,
                       points: np.ndarray) -> np.ndarray:
    out = np.zeros(len(points), dtype=np.uint8)
    _points_inside(np.ascontiguousarray(vertices, dtype=np.float64),
                   np.ascontiguousarray(triangles, dtype=np.int32),
                   np.ascontiguousarray(points, dtype=np.float64), out)
    return out.astype(bool)


def sample_mesh_volume(vertices: np.ndarray, triangles: np.ndarray, count: int,
                       seed: int, material_id: int = 0, grid=None) -> ParticleSpawn:
    """Fill a watertight mesh interior with jittered interior-cell samples.

    The interior is voxelized at a resolution giving at least ``count``
    interior cells; one jittered point is drawn per selected cell and
    re-verified against the mesh, so every sample is strictly interior.
    """
    if count <= 0:
        raise SpawnError("count must be positive")
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int32)
    check_watertight(vertices, triangles)
    volume = abs(mesh_volume(vertices, triangles))
    if volume <= 0.0:
        raise SpawnError("mesh encloses no volume")

    rng = np.random.default_rng(seed)
    bmin = vertices.min(axis=0)
    bmax = vertices.max(axis=0)
    span = bmax - bmin

    # grow the lattice until enough interior cell centers exist
    res = max(4, int(np.ceil(span.max() * (count / volume) ** (1.0 / 3.0))))
    for _ in range(12):
        cell = span.max() / res
        dims = np.maximum(1, np.ceil(span / cell).astype(int))
        ii = np.stack(np.meshgrid(*[np.arange(d) for d in dims], indexing="ij"),
                      axis=-1).reshape(-1, 3)
        centers = bmin + (ii + 0.5) * cell
        interior = points_inside_mesh(vertices, triangles, centers)
        if interior.sum() >= count:
            break
        res = int(res * 1.4) + 1
    else:
        raise SpawnError(f"could not find {count} interior cells (mesh too thin?)")

    cells = centers[interior]
    chosen = cells[rng.permutation(len(cells))[:count]]
    positions = chosen.copy()
    pending = np.arange(count)
    for _ in range(8):
        cand = chosen[pending] + (rng.random((len(pending), 3)) - 0.5) * cell
        ok = points_inside_mesh(vertices, triangles, cand)
        positions[pending[ok]] = cand[ok]
        pending = pending[~ok]
        if len(pending) == 0:
            break
    # leftovers keep their interior cell center, which is inside by test
    _check_margin(positions, grid)
    return ParticleSpawn(positions=positions,
                         rest_volume_per_particle=volume / count,
                         material_id=material_id)
