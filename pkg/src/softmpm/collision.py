"""Rigid tool colliders and grid-node collision resolution.

Colliders are posed rigid shapes (analytic boxes or baked SDFs). Each substep
a merged distance field plus nearest-collider table is rebuilt over the grid;
grid nodes closer than a threshold get their velocity resolved against the
collider with Coulomb friction (or full sticking for closed gripper jaws).

The functions here are the single-point reference forms used by tests and
scene plumbing; the hot loops live in ``kernels``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ParameterError
from .kernels import BIG_DISTANCE
from .sdf import SdfGrid

MODE_NAMES = {"coulomb": kernels.MODE_COULOMB, "sticky": kernels.MODE_STICKY}


@dataclass
class Box:
    """Analytic axis-aligned box in the collider's local frame."""

    half_extents: np.ndarray

    def __post_init__(self):
        self.half_extents = np.asarray(self.half_extents, dtype=np.float64)
        if not (self.half_extents > 0).all():
            raise ParameterError(f"box half extents must be positive, got {self.half_extents}")


@dataclass
class Baked:
    """Pre-baked SDF shape; the lattice never changes after construction."""

    grid: SdfGrid


ColliderShape = Box | Baked


@dataclass
class RigidCollider:
    """Posed rigid tool with velocity and contact behavior."""

    id: int
    shape: ColliderShape
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    friction_mu: float = 0.0
    mode: str = "coulomb"

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        self.linear_velocity = np.asarray(self.linear_velocity, dtype=np.float64)
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=np.float64)
        if self.friction_mu < 0.0:
            raise ParameterError("friction coefficient must be >= 0")
        if self.mode not in MODE_NAMES:
            raise ParameterError(f"unknown collision mode {self.mode!r}")
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err > 1.0e-9:
            raise ParameterError(f"rotation matrix is not orthonormal (|R^T R - I| = {err:.2e})")

    def set_pose(self, rotation: np.ndarray, translation: np.ndarray,
                 linear_velocity: np.ndarray | None = None,
                 angular_velocity: np.ndarray | None = None) -> None:
        self.rotation = np.asarray(rotation, dtype=np.float64)
        self.translation = np.asarray(translation, dtype=np.float64)
        if linear_velocity is not None:
            self.linear_velocity = np.asarray(linear_velocity, dtype=np.float64)
        if angular_velocity is not None:
            self.angular_velocity = np.asarray(angular_velocity, dtype=np.float64)


@dataclass
class CollisionField:
    """Merged per-node distance and nearest-collider table for one substep."""

    distance: np.ndarray
    object_id: np.ndarray
    theta: float


# ---------------------------------------------------------------------------
# single-point operations
# ---------------------------------------------------------------------------

def box_distance(p_local: np.ndarray, half_extents: np.ndarray) -> float:
    """Exact signed distance from a local-frame point to the box surface."""
    q = np.abs(np.asarray(p_local, dtype=np.float64)) - np.asarray(half_extents, dtype=np.float64)
    return float(np.linalg.norm(np.maximum(q, 0.0)) + min(q.max(), 0.0))


def world_to_ref(x: np.ndarray, collider: RigidCollider) -> np.ndarray:
    """World point into the collider's reference frame: R^T (x - T)."""
    return collider.rotation.T @ (np.asarray(x, dtype=np.float64) - collider.translation)


def sample_distance(shape: ColliderShape, x_ref: np.ndarray) -> float:
    """Signed distance of a local-frame point to the shape, in meters."""
    if isinstance(shape, Box):
        return box_distance(x_ref, shape.half_extents)
    return float(shape.grid.sample(np.asarray(x_ref, dtype=np.float64)))


def _fd_step(shape: ColliderShape) -> float:
    if isinstance(shape, Box):
        return max(1.0e-3 * float(shape.half_extents.min()), 1.0e-6)
    return shape.grid.extent * shape.grid.dx_sdf


def sdf_normal(shape: ColliderShape, x_ref: np.ndarray, collider: RigidCollider) -> np.ndarray:
    """Unit outward normal in world frame, via central differences of the SDF."""
    x_ref = np.asarray(x_ref, dtype=np.float64)
    h = _fd_step(shape)
    g = np.empty(3)
    for a in range(3):
        e = np.zeros(3)
        e[a] = h
        g[a] = sample_distance(shape, x_ref + e) - sample_distance(shape, x_ref - e)
    norm = np.linalg.norm(g)
    if norm < 1.0e-12:
        # medial axis: fall back to pointing away from the collider origin
        d = collider.rotation @ x_ref
        dn = np.linalg.norm(d)
        return d / dn if dn > 1.0e-12 else np.array([0.0, 1.0, 0.0])
    return collider.rotation @ (g / norm)


def collider_point_velocity(collider: RigidCollider, x: np.ndarray) -> np.ndarray:
    """Rigid-body velocity of the collider material point at world position x."""
    lever = np.asarray(x, dtype=np.float64) - collider.translation
    return collider.linear_velocity + np.cross(collider.angular_velocity, lever)


def resolve_velocity(v: np.ndarray, collider: RigidCollider, n: np.ndarray,
                     x: np.ndarray) -> np.ndarray:
    """Contact response for a grid-node velocity against one collider.

    Approaching normal motion is removed; tangential motion obeys the Coulomb
    cone, fully arrested when the friction bound exceeds it (the sliding
    direction is never reversed). Sticky mode pins the node to the collider.
    """
    v = np.asarray(v, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    v_co = collider_point_velocity(collider, x)
    v_rel = v - v_co
    v_n = float(v_rel @ n)
    if v_n >= 0.0:
        return v.copy()
    if collider.mode == "sticky":
        return v_co.copy()
    v_t = v_rel - v_n * n
    t_norm = float(np.linalg.norm(v_t))
    if t_norm <= collider.friction_mu * (-v_n):
        return v_co.copy()
    return v_t * (1.0 + collider.friction_mu * v_n / t_norm) + v_co


# ---------------------------------------------------------------------------
# packing + merged field
# ---------------------------------------------------------------------------

@dataclass
class PackedColliders:
    """Flat-array view of a collider list for the compiled kernels."""

    kind: np.ndarray
    half: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    linear_velocity: np.ndarray
    angular_velocity: np.ndarray
    friction: np.ndarray
    mode: np.ndarray
    sdf_values: np.ndarray
    sdf_offset: np.ndarray
    sdf_resolution: np.ndarray
    sdf_bounds_min: np.ndarray
    sdf_extent: np.ndarray

    def refresh_poses(self, colliders: list[RigidCollider]) -> None:
        for i, c in enumerate(colliders):
            self.rotation[i] = c.rotation
            self.translation[i] = c.translation
            self.linear_velocity[i] = c.linear_velocity
            self.angular_velocity[i] = c.angular_velocity


def pack_colliders(colliders: list[RigidCollider]) -> PackedColliders:
    k = len(colliders)
    ids = [c.id for c in colliders]
    if len(set(ids)) != k:
        raise ParameterError(f"collider ids must be unique, got {ids}")
    kind = np.zeros(k, dtype=np.int32)
    half = np.zeros((k, 3), dtype=np.float64)
    rot = np.zeros((k, 3, 3), dtype=np.float64)
    trans = np.zeros((k, 3), dtype=np.float64)
    lv = np.zeros((k, 3), dtype=np.float64)
    av = np.zeros((k, 3), dtype=np.float64)
    fric = np.zeros(k, dtype=np.float64)
    mode = np.zeros(k, dtype=np.int32)
    sdf_off = np.full(k, -1, dtype=np.int64)
    sdf_res = np.zeros((k, 3), dtype=np.int32)
    sdf_bmin = np.zeros((k, 3), dtype=np.float64)
    sdf_ext = np.ones(k, dtype=np.float64)
    chunks: list[np.ndarray] = []
    total = 0
    for i, c in enumerate(colliders):
        rot[i] = c.rotation
        trans[i] = c.translation
        lv[i] = c.linear_velocity
        av[i] = c.angular_velocity
        fric[i] = c.friction_mu
        mode[i] = MODE_NAMES[c.mode]
        if isinstance(c.shape, Box):
            kind[i] = kernels.COLLIDER_BOX
            half[i] = c.shape.half_extents
        else:
            kind[i] = kernels.COLLIDER_BAKED
            g = c.shape.grid
            sdf_off[i] = total
            sdf_res[i] = g.values.shape
            sdf_bmin[i] = g.bounds_min
            sdf_ext[i] = g.extent
            flat = np.asfortranarray(g.values).ravel(order="F")  # x-fastest
            chunks.append(flat)
            total += flat.size
    sdf_values = np.concatenate(chunks) if chunks else np.zeros(1, dtype=np.float64)
    return PackedColliders(kind, half, rot, trans, lv, av, fric, mode,
                           sdf_values, sdf_off, sdf_res, sdf_bmin, sdf_ext)


def update_collision_field(colliders: list[RigidCollider], grid,
                           theta: float | None = None,
                           packed: PackedColliders | None = None,
                           out: CollisionField | None = None) -> CollisionField:
    """Rebuild the merged distance/object-id table over all grid nodes.

    Ties between equidistant colliders go to the lowest index; nodes at least
    2*theta away from everything carry the sentinel id -1.
    """
    if theta is None:
        theta = 0.5 * grid.dx
    shape = tuple(grid.resolution)
    if out is None:
        out = CollisionField(distance=np.full(shape, BIG_DISTANCE),
                             object_id=np.full(shape, -1, dtype=np.int32),
                             theta=theta)
    out.theta = theta
    if not colliders:
        out.distance.fill(BIG_DISTANCE)
        out.object_id.fill(-1)
        return out
    if packed is None:
        packed = pack_colliders(colliders)
    kernels.build_collision_field(
        grid.dx, out.distance, out.object_id, 2.0 * theta,
        packed.kind, packed.half, packed.rotation, packed.translation,
        packed.sdf_values, packed.sdf_offset, packed.sdf_resolution,
        packed.sdf_bounds_min, packed.sdf_extent)
    return out
