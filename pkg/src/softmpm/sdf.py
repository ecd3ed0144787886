"""Signed distance field baking for rigid tool shapes.

Bakes are offline: the mesh is normalized into a padded cube, the interior is
voxelized by z-column ray parity, a Euclidean distance transform fills the
far field, and an exact point-to-triangle pass refines a narrow band around
the surface. Stored distances are in normalized units (cube side = 1);
queries convert back to meters. A module-level bake counter lets callers
assert that no bake ever happens inside a simulation loop.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit, prange
from scipy.ndimage import distance_transform_edt

from .errors import MeshError
from .meshio import check_watertight, triangle_areas

log = logging.getLogger(__name__)

BAKE_COUNT = 0

_MAGIC = b"SDF1"


@dataclass
class SdfGrid:
    """Dense signed distances over a cubic lattice in the collider's local frame.

    values[i,j,k] is the distance at cell center ((i+0.5)/n, ...) of the
    normalized cube, in normalized units; bounds_min/extent map that cube back
    to local-frame meters. Negative strictly inside the source mesh.
    """

    values: np.ndarray
    bounds_min: np.ndarray
    extent: float

    @property
    def resolution(self) -> tuple[int, int, int]:
        return self.values.shape  # type: ignore[return-value]

    @property
    def dx_sdf(self) -> float:
        """Cell size in the normalized local frame (1 / resolution)."""
        return 1.0 / self.values.shape[0]

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Trilinear distance lookup, local-frame meters in and out.

        Out-of-lattice queries clamp to the boundary sample, which is positive
        because bakes pad the mesh bounds.
        """
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        res = np.array(self.values.shape, dtype=np.float64)
        c = (p - self.bounds_min) / self.extent * res - 0.5
        c = np.clip(c, 0.0, res - 1.0)
        i0 = np.minimum(c.astype(np.int64), (res - 2.0).astype(np.int64))
        f = c - i0
        v = self.values
        ix, iy, iz = i0[:, 0], i0[:, 1], i0[:, 2]
        fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
        out = np.zeros(len(p))
        for a in (0, 1):
            wa = fx if a else 1.0 - fx
            for b in (0, 1):
                wb = fy if b else 1.0 - fy
                for cc in (0, 1):
                    wc = fz if cc else 1.0 - fz
                    out += wa * wb * wc * v[ix + a, iy + b, iz + cc]
        out *= self.extent
        return out if np.asarray(points).ndim > 1 else out[0]


# ---------------------------------------------------------------------------
# baking kernels
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def _voxelize_parity(nv, tris, res, inside):
    """Interior voxelization by z-ray crossing parity at cell centers."""
    h = 1.0 / res
    # distinct per-axis jitters dodge exact edge/diagonal hits on
    # lattice-aligned meshes (e.g. box face diagonals through y = x)
    eps_x = h * 1.2345678e-6
    eps_y = h * 2.7182818e-6
    ntri = tris.shape[0]
    for col in prange(res * res):
        ix = col // res
        iy = col - ix * res
        cx = (ix + 0.5) * h + eps_x
        cy = (iy + 0.5) * h + eps_y
        flips = np.zeros(res, dtype=np.uint8)
        for t in range(ntri):
            x1 = nv[tris[t, 0], 0]
            y1 = nv[tris[t, 0], 1]
            z1 = nv[tris[t, 0], 2]
            x2 = nv[tris[t, 1], 0]
            y2 = nv[tris[t, 1], 1]
            z2 = nv[tris[t, 1], 2]
            x3 = nv[tris[t, 2], 0]
            y3 = nv[tris[t, 2], 1]
            z3 = nv[tris[t, 2], 2]
            denom = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
            if abs(denom) < 1.0e-30:
                continue  # projects to a line: cannot flip z-parity
            l1 = ((y2 - y3) * (cx - x3) + (x3 - x2) * (cy - y3)) / denom
            l2 = ((y3 - y1) * (cx - x3) + (x1 - x3) * (cy - y3)) / denom
            l3 = 1.0 - l1 - l2
            if l1 <= 0.0 or l2 <= 0.0 or l3 <= 0.0:
                continue
            zs = l1 * z1 + l2 * z2 + l3 * z3
            k0 = int(np.floor(zs / h - 0.5)) + 1
            if k0 < 0:
                k0 = 0
            if k0 < res:
                flips[k0] ^= 1
        parity = False
        for k in range(res):
            if flips[k]:
                parity = not parity
            inside[ix, iy, k] = parity


@njit(cache=True, parallel=True)
def _farfield_correct(values, signed, ft_out, ft_in, band_cells, h):
    """Far cells: distance to the nearest band cell plus its exact offset.

    Anchors (nearest opposite-side cell centers) always lie in the exact band,
    so reads and writes never alias across the parallel loop.
    """
    n = values.shape[0]
    for ix in prange(n):
        for iy in range(n):
            for iz in range(n):
                s = signed[ix, iy, iz]
                if s > band_cells:
                    fx = ft_out[0, ix, iy, iz]
                    fy = ft_out[1, ix, iy, iz]
                    fz = ft_out[2, ix, iy, iz]
                    d = np.sqrt(float((ix - fx) ** 2 + (iy - fy) ** 2
                                      + (iz - fz) ** 2))
                    values[ix, iy, iz] = d * h + values[fx, fy, fz]
                elif s < -band_cells:
                    fx = ft_in[0, ix, iy, iz]
                    fy = ft_in[1, ix, iy, iz]
                    fz = ft_in[2, ix, iy, iz]
                    d = np.sqrt(float((ix - fx) ** 2 + (iy - fy) ** 2
                                      + (iz - fz) ** 2))
                    values[ix, iy, iz] = -d * h + values[fx, fy, fz]


@njit(cache=True, inline="always")
def _point_tri_d2(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Squared point-triangle distance (closest-point region classification)."""
    abx = bx - ax
    aby = by - ay
    abz = bz - az
    acx = cx - ax
    acy = cy - ay
    acz = cz - az
    apx = px - ax
    apy = py - ay
    apz = pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx = px - bx
    bpy = py - by
    bpz = pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3)
        ex = apx - t * abx
        ey = apy - t * aby
        ez = apz - t * abz
        return ex * ex + ey * ey + ez * ez
    cpx = px - cx
    cpy = py - cy
    cpz = pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6)
        ex = apx - t * acx
        ey = apy - t * acy
        ez = apz - t * acz
        return ex * ex + ey * ey + ez * ez
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        ex = px - (bx + t * (cx - bx))
        ey = py - (by + t * (cy - by))
        ez = pz - (bz + t * (cz - bz))
        return ex * ex + ey * ey + ez * ez
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    ex = px - (ax + abx * v + acx * w)
    ey = py - (ay + aby * v + acy * w)
    ez = pz - (az + abz * v + acz * w)
    return ex * ex + ey * ey + ez * ez


@njit(cache=True, parallel=True)
def _refine_band(nv, tris, cells, res, inside, out):
    h = 1.0 / res
    ntri = tris.shape[0]
    for m in prange(cells.shape[0]):
        ix = cells[m, 0]
        iy = cells[m, 1]
        iz = cells[m, 2]
        px = (ix + 0.5) * h
        py = (iy + 0.5) * h
        pz = (iz + 0.5) * h
        best = 1.0e30
        for t in range(ntri):
            d2 = _point_tri_d2(px, py, pz,
                               nv[tris[t, 0], 0], nv[tris[t, 0], 1], nv[tris[t, 0], 2],
                               nv[tris[t, 1], 0], nv[tris[t, 1], 1], nv[tris[t, 1], 2],
                               nv[tris[t, 2], 0], nv[tris[t, 2], 1], nv[tris[t, 2], 2])
            if d2 < best:
                best = d2
        d = np.sqrt(best)
        out[m] = -d if inside[ix, iy, iz] else d


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def bake_sdf(vertices: np.ndarray, triangles: np.ndarray, resolution: int = 256,
             padding: float = 0.125, band_cells: float = 3.0) -> SdfGrid:
    """Bake a watertight triangle mesh into a cubic SDF lattice.

    The mesh AABB is centered in a cube padded by ``padding`` of the largest
    extent per side, so boundary samples stay positive and out-of-lattice
    clamping is safe.
    """
    global BAKE_COUNT
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int32)
    check_watertight(vertices, triangles)

    scale = float(np.ptp(vertices, axis=0).max())
    areas = triangle_areas(vertices, triangles)
    keep = areas > 1.0e-14 * scale * scale
    n_degenerate = int((~keep).sum())
    if n_degenerate:
        log.warning("bake_sdf: skipping %d degenerate triangles", n_degenerate)
        triangles = triangles[keep]

    bmin = vertices.min(axis=0)
    bmax = vertices.max(axis=0)
    center = 0.5 * (bmin + bmax)
    extent = float((bmax - bmin).max()) * (1.0 + 2.0 * padding)
    if extent <= 0.0:
        raise MeshError("mesh has zero extent")
    bounds_min = center - 0.5 * extent

    nv = (vertices - bounds_min) / extent
    res = int(resolution)
    h = 1.0 / res
    inside = np.zeros((res, res, res), dtype=np.bool_)
    _voxelize_parity(nv, triangles, res, inside)

    # provisional cell-count distances pick the refinement band around the
    # surface; the feature indices drive the far-field correction below
    d_out, ft_out = distance_transform_edt(~inside, return_indices=True)
    d_in, ft_in = distance_transform_edt(inside, return_indices=True)
    signed = np.where(inside, -(d_in - 0.5), d_out - 0.5)
    del d_out, d_in
    values = signed * h

    cells = np.argwhere(np.abs(signed) <= band_cells).astype(np.int64)
    if len(cells):
        exact = np.empty(len(cells), dtype=np.float64)
        _refine_band(nv, triangles, cells, res, inside, exact)
        values[cells[:, 0], cells[:, 1], cells[:, 2]] = exact

    # far field: distance to the nearest opposite-side cell center plus that
    # cell's exact surface offset, so band and far field meet without a seam
    _farfield_correct(values, signed,
                      np.ascontiguousarray(ft_out, dtype=np.int32),
                      np.ascontiguousarray(ft_in, dtype=np.int32),
                      float(band_cells), h)

    BAKE_COUNT += 1
    return SdfGrid(values=values, bounds_min=bounds_min, extent=extent)


def save_sdf(path: str | Path, grid: SdfGrid) -> None:
    """Serialize to the SDF1 container (little-endian, x-fastest values)."""
    nx, ny, nz = grid.values.shape
    bmax = grid.bounds_min + grid.extent
    header = _MAGIC + struct.pack("<3I", nx, ny, nz) + struct.pack(
        "<6f", *grid.bounds_min, *bmax)
    payload = np.asfortranarray(grid.values.astype("<f4")).tobytes(order="F")
    Path(path).write_bytes(header + payload)


def load_sdf(path: str | Path) -> SdfGrid:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise MeshError(f"{Path(path).name}: not an SDF1 file")
    nx, ny, nz = struct.unpack_from("<3I", raw, 4)
    bounds = struct.unpack_from("<6f", raw, 16)
    count = nx * ny * nz
    vals = np.frombuffer(raw, dtype="<f4", count=count, offset=40)
    values = np.reshape(vals, (nx, ny, nz), order="F").astype(np.float64)
    bmin = np.array(bounds[:3], dtype=np.float64)
    ext = np.array(bounds[3:], dtype=np.float64) - bmin
    if np.ptp(ext) > 1.0e-4 * ext.max():
        raise MeshError("SDF bounds must be cubic")
    return SdfGrid(values=np.ascontiguousarray(values), bounds_min=bmin, extent=float(ext[0]))
