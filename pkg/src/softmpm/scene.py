"""Declarative scenario definition: domain, bodies, tools, trajectories, metrics.

A scene is a plain JSON-serializable description; ``build_scene`` turns it
into live simulation state plus posed colliders, and ``make_pose_fn`` yields
the per-substep kinematics feed (keyframe interpolation with finite-difference
linear velocity and quaternion-log angular velocity).
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .collision import Baked, Box, RigidCollider
from .core import Grid, SimParams, SimState
from .errors import SceneError
from .materials import Material
from .meshio import load_mesh
from .sampling import sample_box, sample_mesh_volume
from .sdf import load_sdf

METRIC_NAMES = ("lifted_fraction", "detached_fraction", "mean_abs_J_minus_1",
                "max_displacement")

METRICS_CSV_HEADER = "time,lifted_fraction,detached_fraction,mean_abs_J_minus_1,max_displacement"


@dataclass
class Keyframe:
    """Tool poses at one instant; jaw state holds until the next keyframe."""

    time: float
    poses: list[tuple[np.ndarray, np.ndarray]]  # per collider: (T (3,), quat xyzw (4,))
    jaw_state: str = "open"


@dataclass
class BodySpec:
    kind: str  # "box" | "mesh"
    material: int
    count: int
    seed: int
    center: np.ndarray | None = None
    size: np.ndarray | None = None
    mesh_path: str | None = None


@dataclass
class ColliderSpec:
    id: int
    shape_kind: str  # "box" | "sdf"
    friction: float = 0.0
    mode: str = "coulomb"
    half_extents: np.ndarray | None = None
    sdf_path: str | None = None


@dataclass
class GripperGroup:
    """Two-jaw gripper: members sit at +/- (gap/2 + jaw half) along jaw_axis."""

    name: str
    colliders: list[int]
    jaw_axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    open_gap: float = 0.1
    closed_gap: float = 0.02


@dataclass
class SceneConfig:
    name: str
    domain_extent: tuple[float, float, float]
    resolution: tuple[int, int, int]
    params: SimParams
    materials: list[Material]
    bodies: list[BodySpec]
    colliders: list[ColliderSpec]
    trajectory: list[Keyframe]
    groups: list[GripperGroup] = field(default_factory=list)
    metrics: list[str] = field(default_factory=lambda: list(METRIC_NAMES))
    duration: float = 1.0
    surface_iso_fraction: float = 0.3

    def validate(self) -> None:
        if self.duration <= 0.0:
            raise SceneError("scene duration must be positive")
        for b in self.bodies:
            if not 0 <= b.material < len(self.materials):
                raise SceneError(f"body references dangling material id {b.material}")
        ids = [c.id for c in self.colliders]
        if len(set(ids)) != len(ids):
            raise SceneError(f"collider ids must be unique, got {ids}")
        if ids != sorted(ids):
            # merged-field ties resolve to the lowest declared index, so the
            # declaration order must follow the ids for "lowest id wins"
            raise SceneError(f"collider ids must be declared in ascending order, got {ids}")
        for g in self.groups:
            for cid in g.colliders:
                if cid not in ids:
                    raise SceneError(f"group {g.name!r} references unknown collider {cid}")
        times = [k.time for k in self.trajectory]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise SceneError(f"keyframe times must be strictly increasing, got {times}")
        for k in self.trajectory:
            if len(k.poses) != len(self.colliders):
                raise SceneError(f"keyframe at t={k.time} has {len(k.poses)} poses "
                                 f"for {len(self.colliders)} colliders")
            if k.jaw_state not in ("open", "closed"):
                raise SceneError(f"jaw_state must be open|closed, got {k.jaw_state!r}")
            for _, q in k.poses:
                n = float(np.linalg.norm(q))
                if abs(n - 1.0) > 1.0e-3:
                    raise SceneError(f"keyframe quaternion not unit norm: |q| = {n}")
        for m in self.metrics:
            if m not in METRIC_NAMES:
                raise SceneError(f"unknown metric {m!r}")
        if not 0.0 < self.surface_iso_fraction < 1.0:
            raise SceneError("surface_iso_fraction must be in (0, 1)")

    @property
    def frame_count(self) -> int:
        frame_dt = self.params.dt * self.params.substeps_per_frame
        return max(1, round(self.duration / frame_dt))

    @property
    def surface_iso(self) -> float:
        return self.surface_iso_fraction * max(m.density for m in self.materials)


# ---------------------------------------------------------------------------
# trajectory interpolation
# ---------------------------------------------------------------------------

def _normalized(q: np.ndarray) -> np.ndarray:
    return np.asarray(q, dtype=np.float64) / np.linalg.norm(q)


def pose_at(trajectory: list[Keyframe], t: float):
    """Interpolated tool poses at time t.

    Returns (poses, jaw_state) where poses is a per-collider list of
    (T, R 3x3, linear_velocity, angular_velocity). Position interpolates
    linearly, orientation spherically; velocities are segment-constant
    (finite differences / relative-quaternion log). Out-of-range times clamp
    to the endpoints with zero velocity.
    """
    if not trajectory:
        raise SceneError("empty trajectory")
    zero = np.zeros(3)

    def fixed(kf: Keyframe):
        out = []
        for T, q in kf.poses:
            out.append((np.asarray(T, dtype=np.float64),
                        Rotation.from_quat(_normalized(q)).as_matrix(), zero, zero))
        return out, kf.jaw_state

    times = [k.time for k in trajectory]
    if t <= times[0]:
        return fixed(trajectory[0])
    if t >= times[-1]:
        return fixed(trajectory[-1])
    i = bisect_right(times, t) - 1
    a, b = trajectory[i], trajectory[i + 1]
    seg = b.time - a.time
    s = (t - a.time) / seg
    out = []
    for (ta, qa), (tb, qb) in zip(a.poses, b.poses):
        ta = np.asarray(ta, dtype=np.float64)
        tb = np.asarray(tb, dtype=np.float64)
        ra = Rotation.from_quat(_normalized(qa))
        rb = Rotation.from_quat(_normalized(qb))
        rel = (ra.inv() * rb).as_rotvec()
        rot = (ra * Rotation.from_rotvec(rel * s)).as_matrix()
        lin_vel = (tb - ta) / seg
        ang_vel = ra.apply(rel) / seg
        out.append(((1.0 - s) * ta + s * tb, rot, lin_vel, ang_vel))
    return out, a.jaw_state


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass
class MetricSample:
    time: float
    lifted_fraction: float
    detached_fraction: float
    mean_abs_j_minus_1: float
    max_displacement: float

    def csv_row(self) -> str:
        return (f"{self.time:.6f},{self.lifted_fraction:.6f},"
                f"{self.detached_fraction:.6f},{self.mean_abs_j_minus_1:.8f},"
                f"{self.max_displacement:.6f}")


def compute_metrics(state: SimState, initial_positions: np.ndarray) -> MetricSample:
    """Deformation/displacement summary relative to the spawn configuration.

    Lifted/detached count particles that rose more than 2dx / 1dx above their
    own spawn height; mean |J-1| averages volume change over particles.
    """
    dx = state.grid.dx
    dy = state.x[:, 1] - initial_positions[:, 1]
    j = np.linalg.det(state.F)
    disp = np.linalg.norm(state.x - initial_positions, axis=1)
    return MetricSample(
        time=state.time,
        lifted_fraction=float((dy > 2.0 * dx).mean()),
        detached_fraction=float((dy > dx).mean()),
        mean_abs_j_minus_1=float(np.abs(j - 1.0).mean()),
        max_displacement=float(disp.max() if len(disp) else 0.0),
    )


# ---------------------------------------------------------------------------
# scene instantiation
# ---------------------------------------------------------------------------

@dataclass
class SceneInstance:
    """A built scene: live state, posed colliders, and the kinematics feed."""

    config: SceneConfig
    state: SimState
    materials: list[Material]
    colliders: list[RigidCollider]
    initial_positions: np.ndarray

    def metrics(self) -> MetricSample:
        return compute_metrics(self.state, self.initial_positions)


def _build_collider(spec: ColliderSpec, base_dir: Path | None) -> RigidCollider:
    if spec.shape_kind == "box":
        shape = Box(spec.half_extents)
    elif spec.shape_kind == "sdf":
        path = Path(spec.sdf_path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        shape = Baked(load_sdf(path))
    else:
        raise SceneError(f"unknown collider shape {spec.shape_kind!r}")
    return RigidCollider(id=spec.id, shape=shape, friction_mu=spec.friction,
                         mode=spec.mode)


def build_scene(config: SceneConfig, base_dir: Path | None = None,
                particle_override: int | None = None,
                seed_override: int | None = None) -> SceneInstance:
    """Instantiate state and colliders from a validated scene description."""
    config.validate()
    grid = Grid(resolution=config.resolution, extent=config.domain_extent)
    spawns = []
    for b in config.bodies:
        count = particle_override if particle_override else b.count
        seed = seed_override if seed_override is not None else b.seed
        if b.kind == "box":
            spawns.append(sample_box(b.center, b.size, count, seed,
                                     material_id=b.material, grid=grid))
        elif b.kind == "mesh":
            path = Path(b.mesh_path)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            verts, tris = load_mesh(path)
            spawns.append(sample_mesh_volume(verts, tris, count, seed,
                                             material_id=b.material, grid=grid))
        else:
            raise SceneError(f"unknown body kind {b.kind!r}")
    state = SimState.from_spawns(grid, spawns, config.materials)
    colliders = [_build_collider(c, base_dir) for c in config.colliders]
    if config.trajectory:
        poses, jaw = pose_at(config.trajectory, 0.0)
        _apply_poses(config, colliders, poses, jaw)
    return SceneInstance(config=config, state=state, materials=list(config.materials),
                         colliders=colliders, initial_positions=state.x.copy())


def _apply_poses(config: SceneConfig, colliders: list[RigidCollider], poses, jaw: str) -> None:
    grouped = {cid for g in config.groups for cid in g.colliders}
    base_mode = {c.id: c.mode for c in config.colliders}
    for col, (T, R, lv, av) in zip(colliders, poses):
        col.set_pose(R, T, lv, av)
        if col.id in grouped:
            col.mode = "sticky" if jaw == "closed" else base_mode[col.id]


def make_pose_fn(instance: SceneInstance):
    """Kinematics feed for core.step: sets collider poses at substep times."""
    config = instance.config
    if not config.trajectory:
        return None

    def pose_fn(colliders, t):
        poses, jaw = pose_at(config.trajectory, t)
        _apply_poses(config, colliders, poses, jaw)

    return pose_fn


# ---------------------------------------------------------------------------
# JSON serialization (strict: unknown keys are rejected)
# ---------------------------------------------------------------------------

def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise SceneError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise SceneError(f"{where}: missing keys {sorted(missing)}")


def scene_to_dict(config: SceneConfig) -> dict:
    d = {
        "name": config.name,
        "domain": {"extent": list(config.domain_extent),
                   "resolution": list(config.resolution)},
        "params": {
            "dt": config.params.dt,
            "substeps_per_frame": config.params.substeps_per_frame,
            "gravity": list(config.params.gravity),
            "boundary_width": config.params.boundary_width,
            "boundary": config.params.boundary,
        },
        "duration": config.duration,
        "surface_iso_fraction": config.surface_iso_fraction,
        "materials": [{"young_modulus": m.young_modulus,
                       "poisson_ratio": m.poisson_ratio,
                       "density": m.density} for m in config.materials],
        "bodies": [],
        "colliders": [],
        "groups": [{"name": g.name, "colliders": list(g.colliders),
                    "jaw_axis": list(np.asarray(g.jaw_axis, dtype=float)),
                    "open_gap": g.open_gap, "closed_gap": g.closed_gap}
                   for g in config.groups],
        "trajectory": [{"time": k.time, "jaw": k.jaw_state,
                        "poses": [{"t": list(np.asarray(T, dtype=float)),
                                   "q": list(np.asarray(q, dtype=float))}
                                  for T, q in k.poses]}
                       for k in config.trajectory],
        "metrics": list(config.metrics),
    }
    for b in config.bodies:
        if b.kind == "box":
            d["bodies"].append({"type": "box", "center": list(np.asarray(b.center, dtype=float)),
                                "size": list(np.asarray(b.size, dtype=float)),
                                "count": b.count, "material": b.material, "seed": b.seed})
        else:
            d["bodies"].append({"type": "mesh", "path": b.mesh_path, "count": b.count,
                                "material": b.material, "seed": b.seed})
    for c in config.colliders:
        if c.shape_kind == "box":
            shape = {"type": "box", "half_extents": list(np.asarray(c.half_extents, dtype=float))}
        else:
            shape = {"type": "sdf", "path": c.sdf_path}
        d["colliders"].append({"id": c.id, "shape": shape,
                               "friction": c.friction, "mode": c.mode})
    return d


def scene_from_dict(d: dict) -> SceneConfig:
    _require_keys(d, {"name", "domain", "params", "duration", "surface_iso_fraction",
                      "materials", "bodies", "colliders", "groups", "trajectory",
                      "metrics"},
                  {"name", "domain", "materials", "bodies", "duration"}, "scene")
    dom = d["domain"]
    _require_keys(dom, {"extent", "resolution"}, {"extent", "resolution"}, "domain")
    pd = d.get("params", {})
    _require_keys(pd, {"dt", "substeps_per_frame", "gravity", "boundary_width",
                       "boundary"}, set(), "params")
    params = SimParams(
        dt=pd.get("dt", 5.0e-4),
        substeps_per_frame=pd.get("substeps_per_frame", 25),
        gravity=tuple(pd.get("gravity", (0.0, -9.8, 0.0))),
        boundary_width=pd.get("boundary_width", 3),
        boundary=pd.get("boundary", "clamp"),
    )
    materials = []
    for md in d["materials"]:
        _require_keys(md, {"young_modulus", "poisson_ratio", "density"},
                      {"young_modulus", "density"}, "material")
        materials.append(Material(md["young_modulus"], md.get("poisson_ratio", 0.3),
                                  md["density"]))
    bodies = []
    for bd in d["bodies"]:
        kind = bd.get("type")
        if kind == "box":
            _require_keys(bd, {"type", "center", "size", "count", "material", "seed"},
                          {"center", "size", "count"}, "body")
            bodies.append(BodySpec(kind="box", material=bd.get("material", 0),
                                   count=bd["count"], seed=bd.get("seed", 0),
                                   center=np.asarray(bd["center"], dtype=float),
                                   size=np.asarray(bd["size"], dtype=float)))
        elif kind == "mesh":
            _require_keys(bd, {"type", "path", "count", "material", "seed"},
                          {"path", "count"}, "body")
            bodies.append(BodySpec(kind="mesh", material=bd.get("material", 0),
                                   count=bd["count"], seed=bd.get("seed", 0),
                                   mesh_path=bd["path"]))
        else:
            raise SceneError(f"body type must be box|mesh, got {kind!r}")
    colliders = []
    for cd in d.get("colliders", []):
        _require_keys(cd, {"id", "shape", "friction", "mode"}, {"id", "shape"},
                      "collider")
        sh = cd["shape"]
        if sh.get("type") == "box":
            _require_keys(sh, {"type", "half_extents"}, {"half_extents"}, "collider shape")
            colliders.append(ColliderSpec(id=cd["id"], shape_kind="box",
                                          friction=cd.get("friction", 0.0),
                                          mode=cd.get("mode", "coulomb"),
                                          half_extents=np.asarray(sh["half_extents"],
                                                                  dtype=float)))
        elif sh.get("type") == "sdf":
            _require_keys(sh, {"type", "path"}, {"path"}, "collider shape")
            colliders.append(ColliderSpec(id=cd["id"], shape_kind="sdf",
                                          friction=cd.get("friction", 0.0),
                                          mode=cd.get("mode", "coulomb"),
                                          sdf_path=sh["path"]))
        else:
            raise SceneError(f"collider shape must be box|sdf, got {sh.get('type')!r}")
    groups = []
    for gd in d.get("groups", []):
        _require_keys(gd, {"name", "colliders", "jaw_axis", "open_gap", "closed_gap"},
                      {"name", "colliders"}, "group")
        groups.append(GripperGroup(name=gd["name"], colliders=list(gd["colliders"]),
                                   jaw_axis=np.asarray(gd.get("jaw_axis", [1, 0, 0]),
                                                       dtype=float),
                                   open_gap=gd.get("open_gap", 0.1),
                                   closed_gap=gd.get("closed_gap", 0.02)))
    trajectory = []
    for kd in d.get("trajectory", []):
        _require_keys(kd, {"time", "jaw", "poses"}, {"time", "poses"}, "keyframe")
        poses = []
        for p in kd["poses"]:
            _require_keys(p, {"t", "q"}, {"t"}, "pose")
            poses.append((np.asarray(p["t"], dtype=float),
                          np.asarray(p.get("q", [0.0, 0.0, 0.0, 1.0]), dtype=float)))
        trajectory.append(Keyframe(time=kd["time"], poses=poses,
                                   jaw_state=kd.get("jaw", "open")))
    config = SceneConfig(
        name=d["name"],
        domain_extent=tuple(dom["extent"]),
        resolution=tuple(dom["resolution"]),
        params=params,
        materials=materials,
        bodies=bodies,
        colliders=colliders,
        trajectory=trajectory,
        groups=groups,
        metrics=list(d.get("metrics", METRIC_NAMES)),
        duration=d["duration"],
        surface_iso_fraction=d.get("surface_iso_fraction", 0.3),
    )
    config.validate()
    return config


def load_scene(path: str | Path) -> SceneConfig:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SceneError(f"{Path(path).name}: invalid JSON ({e})") from e
    return scene_from_dict(d)


def save_scene(path: str | Path, config: SceneConfig) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(config), indent=2) + "\n",
                          encoding="utf-8")
