"""Equivalence check between the optimized pipeline and the naive reference."""

from __future__ import annotations

import numpy as np

from . import core
from .materials import Material, pack_materials
from .reference import reference_substep
from .sampling import sample_box

ORACLE_PARTICLES = 512
ORACLE_RESOLUTION = 16
ORACLE_SUBSTEPS = 50
ORACLE_TOLERANCE = 1.0e-12


def oracle_instance() -> tuple[core.SimState, list[Material], core.SimParams]:
    """Small settling-block instance: 512 particles on a 16^3 grid."""
    grid = core.Grid(resolution=(ORACLE_RESOLUTION,) * 3, extent=(1.0, 1.0, 1.0))
    spawn = sample_box((0.5, 0.35, 0.5), (0.25, 0.25, 0.25), ORACLE_PARTICLES,
                       seed=42, grid=grid)
    materials = [Material(5.0e3, 0.3, 1000.0)]
    return core.SimState.from_spawns(grid, [spawn], materials), materials, core.SimParams()


def oracle_divergence(substeps: int = ORACLE_SUBSTEPS) -> float:
    """Max per-coordinate position gap after running both implementations."""
    opt_state, materials, params = oracle_instance()
    ref_state, _, _ = oracle_instance()
    mu, lam, _ = pack_materials(materials)
    gx, gy, gz = params.gravity
    _, hi = ref_state.grid.margin_bounds()
    for _ in range(substeps):
        core.substep(opt_state, materials, params)
        reference_substep(ref_state.x, ref_state.v, ref_state.F, ref_state.C,
                          ref_state.mass, ref_state.vol0, ref_state.material_id,
                          mu, lam, ref_state.grid_mv, ref_state.grid_m,
                          params.dt, ref_state.grid.dx, gx, gy, gz,
                          params.boundary_width, params.boundary == "stick",
                          hi[0], hi[1], hi[2])
    return float(np.abs(opt_state.x - ref_state.x).max())
