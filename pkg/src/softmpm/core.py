"""MLS-MPM simulation state and the substep/step drivers.

One substep is: scatter particles to the grid (updating F with the fused
affine/force transfer), rebuild the collision field for the current tool
poses, update grid velocities (gravity, collision, domain boundary), then
gather back to particles and advect. A step runs ``substeps_per_frame``
substeps and reports wall-clock timings per stage.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .collision import (CollisionField, PackedColliders, RigidCollider,
                        pack_colliders, update_collision_field)
from .errors import ParameterError, SpawnError, StencilError
from .materials import Material, pack_materials


@dataclass(frozen=True)
class Grid:
    """Eulerian background lattice: node i sits at i*dx per axis."""

    resolution: tuple[int, int, int] = (64, 64, 64)
    extent: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "resolution", tuple(int(r) for r in self.resolution))
        object.__setattr__(self, "extent", tuple(float(e) for e in self.extent))
        if any(r < 8 for r in self.resolution):
            raise ParameterError(f"grid resolution too small: {self.resolution}")
        dxs = [e / r for e, r in zip(self.extent, self.resolution)]
        if max(dxs) - min(dxs) > 1.0e-12 * max(dxs):
            raise ParameterError(f"cell size must be uniform across axes, got {dxs}")
        if dxs[0] <= 0.0:
            raise ParameterError("grid extent must be positive")

    @property
    def dx(self) -> float:
        return self.extent[0] / self.resolution[0]

    @property
    def node_count(self) -> int:
        nx, ny, nz = self.resolution
        return nx * ny * nz

    def margin_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Particle-admissible box: 1.5 cells in from every face."""
        dx = self.dx
        lo = np.full(3, 1.5 * dx)
        hi = np.array([(r - 1.5 - 1.0e-7) * dx for r in self.resolution])
        return lo, hi


@dataclass
class SimParams:
    """Integration settings; defaults follow the headline configuration."""

    dt: float = 5.0e-4
    substeps_per_frame: int = 25
    gravity: tuple[float, float, float] = (0.0, -9.8, 0.0)
    boundary_width: int = 3
    boundary: str = "clamp"  # "clamp" drops outward normal velocity; "stick" zeroes it all
    collision_theta: float | None = None  # default 0.5 * dx
    accumulation_chunks: int = 8

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ParameterError("dt must be positive")
        if self.substeps_per_frame < 1:
            raise ParameterError("substeps_per_frame must be >= 1")
        if self.boundary not in ("clamp", "stick"):
            raise ParameterError(f"unknown boundary mode {self.boundary!r}")
        if self.accumulation_chunks < 1:
            raise ParameterError("accumulation_chunks must be >= 1")


@dataclass
class StepReport:
    """Per-step accounting: wall-clock stage timings plus event counts."""

    step_index: int
    sim_time: float
    timings_ms: dict[str, float]
    inverted_particles: int


@dataclass
class SimState:
    """Particle SoA arrays plus the background grid accumulators."""

    grid: Grid
    x: np.ndarray
    v: np.ndarray
    F: np.ndarray
    C: np.ndarray
    mass: np.ndarray
    vol0: np.ndarray
    material_id: np.ndarray
    time: float = 0.0
    step_count: int = 0
    grid_mv: np.ndarray = field(init=False)
    grid_m: np.ndarray = field(init=False)
    _p2g_buf: np.ndarray | None = field(init=False, default=None, repr=False)
    _inverted: np.ndarray | None = field(init=False, default=None, repr=False)
    _collision: CollisionField | None = field(init=False, default=None, repr=False)
    _packed: PackedColliders | None = field(init=False, default=None, repr=False)
    _packed_for: tuple[int, ...] = field(init=False, default=(), repr=False)

    def __post_init__(self):
        nx, ny, nz = self.grid.resolution
        self.grid_mv = np.zeros((nx, ny, nz, 3))
        self.grid_m = np.zeros((nx, ny, nz))

    @classmethod
    def from_spawns(cls, grid: Grid, spawns, materials: list[Material]) -> "SimState":
        """Assemble state from ParticleSpawn records (positions + rest volume)."""
        xs, vols, mats = [], [], []
        lo, hi = grid.margin_bounds()
        for s in spawns:
            pos = np.asarray(s.positions, dtype=np.float64)
            if pos.size == 0:
                raise SpawnError("empty spawn")
            if (pos < lo).any() or (pos > hi).any():
                raise SpawnError("spawned particles violate the 1.5-cell domain margin")
            if not 0 <= s.material_id < len(materials):
                raise SpawnError(f"spawn references material {s.material_id} "
                                 f"but only {len(materials)} are defined")
            xs.append(pos)
            vols.append(np.full(len(pos), s.rest_volume_per_particle))
            mats.append(np.full(len(pos), s.material_id, dtype=np.int32))
        x = np.concatenate(xs)
        vol0 = np.concatenate(vols)
        mat_id = np.concatenate(mats)
        density = np.array([materials[m].density for m in mat_id])
        n = len(x)
        return cls(grid=grid, x=x, v=np.zeros((n, 3)),
                   F=np.tile(np.eye(3), (n, 1, 1)), C=np.zeros((n, 3, 3)),
                   mass=density * vol0, vol0=vol0, material_id=mat_id)

    @property
    def particle_count(self) -> int:
        return len(self.x)

    def has_nan(self) -> bool:
        return bool(np.isnan(self.x).any() or np.isnan(self.v).any()
                    or np.isnan(self.F).any())

    def _buffers(self, chunks: int) -> tuple[np.ndarray, np.ndarray]:
        nn = self.grid.node_count
        if self._p2g_buf is None or self._p2g_buf.shape[:2] != (chunks, nn):
            self._p2g_buf = np.zeros((chunks, nn, 4))
            self._inverted = np.zeros(chunks, dtype=np.int64)
        return self._p2g_buf, self._inverted

    def _packed_colliders(self, colliders: list[RigidCollider]) -> PackedColliders | None:
        if not colliders:
            return None
        key = tuple(id(c) for c in colliders)
        if self._packed is None or self._packed_for != key:
            self._packed = pack_colliders(colliders)
            self._packed_for = key
        else:
            self._packed.refresh_poses(colliders)
        return self._packed


# ---------------------------------------------------------------------------
# stencil weights (reference form used by tests and the density splat)
# ---------------------------------------------------------------------------

def bspline_weights(xp: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic B-spline stencil for one position.

    Returns (base, weights): base is the lowest node index of the 3x3x3
    stencil, weights[axis] holds the three per-axis weights; the 27 node
    weights are their tensor products.
    """
    xp = np.asarray(xp, dtype=np.float64)
    dx = grid.dx
    xg = xp / dx
    base = np.floor(xg - 0.5).astype(np.int64)
    if (base < 0).any() or (base + 2 >= np.array(grid.resolution)).any():
        raise StencilError(f"position {xp} leaves no room for its 3x3x3 stencil")
    f = xg - base
    w = np.empty((3, 3))
    w[:, 0] = 0.5 * (1.5 - f) ** 2
    w[:, 1] = 0.75 - (f - 1.0) ** 2
    w[:, 2] = 0.5 * (f - 0.5) ** 2
    return base, w


# ---------------------------------------------------------------------------
# pipeline stages
# ---------------------------------------------------------------------------

_EMPTY_PACK = None


def _empty_pack() -> PackedColliders:
    global _EMPTY_PACK
    if _EMPTY_PACK is None:
        _EMPTY_PACK = pack_colliders([])
    return _EMPTY_PACK


def p2g(state: SimState, materials: list[Material], params: SimParams) -> int:
    """Scatter momentum/mass to the grid; F is advanced in place.

    Returns the number of particles whose updated F had det <= 0 (reported,
    never fatal: the kernels clamp log(J) instead).
    """
    mu, lam, _ = pack_materials(materials)
    buf, inverted = state._buffers(params.accumulation_chunks)
    ny, nz = state.grid.resolution[1], state.grid.resolution[2]
    kernels.p2g_scatter(state.x, state.v, state.F, state.C, state.mass,
                        state.vol0, state.material_id, mu, lam,
                        params.dt, state.grid.dx, ny, nz,
                        buf, params.accumulation_chunks, inverted)
    kernels.p2g_reduce(buf, state.grid_mv, state.grid_m, params.accumulation_chunks)
    return int(inverted.sum())


def grid_update(state: SimState, params: SimParams,
                collision: CollisionField | None = None,
                colliders: list[RigidCollider] | None = None) -> None:
    """Momentum -> velocity, gravity, collision resolution, domain boundary."""
    colliders = colliders or []
    packed = state._packed_colliders(colliders) or _empty_pack()
    if collision is not None and colliders:
        theta = collision.theta
        dist, obj = collision.distance, collision.object_id
    else:
        theta = -1.0
        dist = np.zeros((1, 1, 1))
        obj = np.zeros((1, 1, 1), dtype=np.int32)
    gx, gy, gz = params.gravity
    kernels.grid_update(state.grid_mv, state.grid_m, params.dt, gx, gy, gz,
                        state.grid.dx, params.boundary_width,
                        params.boundary == "stick",
                        theta, dist, obj,
                        packed.kind, packed.half, packed.rotation,
                        packed.translation, packed.linear_velocity,
                        packed.angular_velocity, packed.friction, packed.mode,
                        packed.sdf_values, packed.sdf_offset,
                        packed.sdf_resolution, packed.sdf_bounds_min,
                        packed.sdf_extent)


def g2p_advect(state: SimState, params: SimParams) -> None:
    """Gather grid velocities, rebuild C, move particles, clamp to margins."""
    _, hi = state.grid.margin_bounds()
    kernels.g2p_advect(state.x, state.v, state.C, state.grid_mv,
                       params.dt, state.grid.dx, hi[0], hi[1], hi[2])


def substep(state: SimState, materials: list[Material], params: SimParams,
            colliders: list[RigidCollider] | None = None) -> int:
    """One integration substep; returns the inverted-element count."""
    colliders = colliders or []
    inverted = p2g(state, materials, params)
    coll_field = None
    if colliders:
        theta = params.collision_theta if params.collision_theta is not None \
            else 0.5 * state.grid.dx
        packed = state._packed_colliders(colliders)
        state._collision = update_collision_field(
            colliders, state.grid, theta, packed=packed, out=state._collision)
        coll_field = state._collision
    grid_update(state, params, coll_field, colliders)
    g2p_advect(state, params)
    state.time += params.dt
    return inverted


def step(state: SimState, materials: list[Material], params: SimParams,
         colliders: list[RigidCollider] | None = None,
         pose_fn=None) -> StepReport:
    """Run one frame (substeps_per_frame substeps) with stage timings.

    pose_fn(colliders, t) is invoked before each substep to move the tools;
    its cost is accounted under collision detection, matching the external
    kinematics feed it stands in for.
    """
    colliders = colliders or []
    theta = params.collision_theta if params.collision_theta is not None \
        else 0.5 * state.grid.dx
    t_collision = 0.0
    t_soft = 0.0
    inverted_total = 0
    for _ in range(params.substeps_per_frame):
        if pose_fn is not None and colliders:
            t0 = _time.perf_counter()
            pose_fn(colliders, state.time)
            t_collision += _time.perf_counter() - t0
        t0 = _time.perf_counter()
        inverted_total += p2g(state, materials, params)
        t_soft += _time.perf_counter() - t0
        coll_field = None
        if colliders:
            t0 = _time.perf_counter()
            packed = state._packed_colliders(colliders)
            state._collision = update_collision_field(
                colliders, state.grid, theta, packed=packed, out=state._collision)
            coll_field = state._collision
            t_collision += _time.perf_counter() - t0
        t0 = _time.perf_counter()
        grid_update(state, params, coll_field, colliders)
        g2p_advect(state, params)
        t_soft += _time.perf_counter() - t0
        state.time += params.dt
    state.step_count += 1
    return StepReport(step_index=state.step_count, sim_time=state.time,
                      timings_ms={"collision_detection": 1000.0 * t_collision,
                                  "soft_simulation": 1000.0 * t_soft},
                      inverted_particles=inverted_total)
