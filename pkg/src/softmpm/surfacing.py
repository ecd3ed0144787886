"""Particle cloud to renderable triangle mesh (splat -> marching cubes -> UVs).

The density field reuses the simulation's quadratic B-spline stencil, so its
integral equals total particle mass exactly. Vertex count varies from frame
to frame; no temporal correspondence is attempted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from skimage import measure

from . import kernels
from .core import Grid
from .errors import ParameterError
from .meshio import save_obj


@dataclass
class ScalarField:
    """Dense nodal samples (mass density, kg/m^3) over the simulation domain."""

    values: np.ndarray
    dx: float


@dataclass
class SurfaceMesh:
    vertices: np.ndarray
    indices: np.ndarray
    uvs: np.ndarray | None = None
    normals: np.ndarray | None = None

    @classmethod
    def empty(cls) -> "SurfaceMesh":
        return cls(vertices=np.zeros((0, 3)), indices=np.zeros((0, 3), dtype=np.int32),
                   uvs=np.zeros((0, 2)), normals=np.zeros((0, 3)))


_splat_buffers: dict[tuple[int, int], np.ndarray] = {}


def splat_density(positions: np.ndarray, masses: np.ndarray, grid: Grid,
                  resolution: tuple[int, int, int] | None = None,
                  chunks: int = 8) -> ScalarField:
    """Deposit particle mass on a lattice via the quadratic B-spline stencil."""
    res = tuple(resolution) if resolution is not None else grid.resolution
    dxs = [e / r for e, r in zip(grid.extent, res)]
    if max(dxs) - min(dxs) > 1.0e-12 * max(dxs):
        raise ParameterError("field cell size must be uniform across axes")
    dx = dxs[0]
    nn = res[0] * res[1] * res[2]
    key = (chunks, nn)
    buf = _splat_buffers.get(key)
    if buf is None:
        buf = np.zeros((chunks, nn))
        _splat_buffers[key] = buf
    out = np.zeros(res)
    if len(positions):
        kernels.splat_mass(np.ascontiguousarray(positions, dtype=np.float64),
                           np.ascontiguousarray(masses, dtype=np.float64),
                           dx, res[1], res[2], buf, chunks)
    kernels.splat_reduce(buf, out, chunks, 1.0 / dx ** 3)
    return ScalarField(values=out, dx=dx)


def marching_cubes(fld: ScalarField, iso: float) -> SurfaceMesh:
    """Classic 256-case isosurface extraction with outward orientation.

    Returns an empty mesh when the field never reaches the iso level.
    """
    if iso <= 0.0:
        raise ParameterError("iso level must be positive")
    vmax = float(fld.values.max()) if fld.values.size else 0.0
    if vmax < iso or float(fld.values.min()) >= iso:
        return SurfaceMesh.empty()
    # classic (lorensen) tables keep every vertex on a lattice edge; extract
    # in lattice units and scale here so coordinates stay float64-exact
    verts, faces, normals, _ = measure.marching_cubes(
        fld.values, iso, gradient_direction="ascent", allow_degenerate=False,
        method="lorensen")
    normals = normals.astype(np.float64)
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    norms[norms < 1.0e-30] = 1.0
    return SurfaceMesh(vertices=verts.astype(np.float64) * fld.dx,
                       indices=faces.astype(np.int32),
                       normals=normals / norms)


def compute_uvs(mesh: SurfaceMesh, domain_extent) -> SurfaceMesh:
    """Planar top-down projection: u from x, v from z, both scaled to [0,1]."""
    ext = np.asarray(domain_extent, dtype=np.float64)
    if len(mesh.vertices):
        u = np.clip(mesh.vertices[:, 0] / ext[0], 0.0, 1.0)
        w = np.clip(mesh.vertices[:, 2] / ext[2], 0.0, 1.0)
        mesh.uvs = np.stack([u, w], axis=1)
    else:
        mesh.uvs = np.zeros((0, 2))
    return mesh


def extract_surface(state, iso: float, resolution=None) -> SurfaceMesh:
    """Convenience pipeline: splat -> marching cubes -> UVs."""
    fld = splat_density(state.x, state.mass, state.grid, resolution)
    mesh = marching_cubes(fld, iso)
    return compute_uvs(mesh, state.grid.extent)


def export_obj(mesh: SurfaceMesh, path) -> None:
    save_obj(path, mesh.vertices, mesh.indices, uvs=mesh.uvs, normals=mesh.normals)
