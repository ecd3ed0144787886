"""Builtin manipulation scenarios: push, pull, tear, tension, retraction.

Each task is a tissue slab resting on the domain floor worked by simple box
tools. Grippers are two-jaw pairs driven through a group trajectory; closing
the jaws switches them to sticky contact so grasps hold during pulling.
"""

from __future__ import annotations

import numpy as np

from .core import SimParams
from .errors import SceneError
from .materials import Material
from .scene import (BodySpec, ColliderSpec, GripperGroup, Keyframe, SceneConfig)

_IDENTITY_Q = np.array([0.0, 0.0, 0.0, 1.0])
_DEFAULT_SEED = 20240601

SCENARIO_NAMES = ("push", "pull", "tear", "tension", "retraction")


def _gripper_keyframes(waypoints, jaw_half_x: float, open_gap: float,
                       closed_gap: float):
    """Per-jaw keyframes from (time, group center, jaw state) waypoints.

    Jaw centers sit at +/- (gap/2 + jaw half width) along x from the group
    center; the gap follows the jaw state of each waypoint.
    """
    frames = []
    for t, center, jaw in waypoints:
        gap = closed_gap if jaw == "closed" else open_gap
        off = np.array([0.5 * gap + jaw_half_x, 0.0, 0.0])
        c = np.asarray(center, dtype=np.float64)
        frames.append(Keyframe(time=t, jaw_state=jaw,
                               poses=[(c - off, _IDENTITY_Q.copy()),
                                      (c + off, _IDENTITY_Q.copy())]))
    return frames


def _slab(center, size, count, seed):
    return BodySpec(kind="box", material=0, count=count, seed=seed,
                    center=np.asarray(center, dtype=np.float64),
                    size=np.asarray(size, dtype=np.float64))


def builtin_scenario(name: str, young_modulus: float | None = None,
                     particles: int | None = None,
                     seed: int | None = None) -> SceneConfig:
    """A complete, validated config for one of the builtin manipulation tasks."""
    if name not in SCENARIO_NAMES:
        raise SceneError(f"unknown scenario {name!r}; valid names: "
                         + ", ".join(SCENARIO_NAMES))
    seed = _DEFAULT_SEED if seed is None else seed
    build = {"push": _push, "pull": _pull, "tear": _tear,
             "tension": _tension, "retraction": _retraction}[name]
    config = build(young_modulus, particles, seed)
    config.validate()
    return config


def _material(young_modulus: float | None, default_e: float) -> Material:
    return Material(young_modulus=default_e if young_modulus is None else young_modulus,
                    poisson_ratio=0.3, density=1000.0)


def _push(e, particles, seed):
    count = particles or 12000
    tool = ColliderSpec(id=0, shape_kind="box", friction=0.4, mode="coulomb",
                        half_extents=np.array([0.06, 0.035, 0.06]))
    q = _IDENTITY_Q
    traj = [
        Keyframe(0.0, [(np.array([0.5, 0.45, 0.5]), q.copy())]),
        Keyframe(0.5, [(np.array([0.5, 0.19, 0.5]), q.copy())]),
        Keyframe(0.7, [(np.array([0.5, 0.19, 0.5]), q.copy())]),
        Keyframe(1.2, [(np.array([0.5, 0.45, 0.5]), q.copy())]),
    ]
    return SceneConfig(
        name="push", domain_extent=(1.0, 1.0, 1.0), resolution=(64, 64, 64),
        params=SimParams(), materials=[_material(e, 1.0e4)],
        bodies=[_slab((0.5, 0.117, 0.5), (0.56, 0.14, 0.44), count, seed)],
        colliders=[tool], trajectory=traj, duration=1.2)


def _pull(e, particles, seed):
    count = particles or 12000
    jaw_half = np.array([0.03, 0.05, 0.05])
    colliders = [
        ColliderSpec(id=0, shape_kind="box", friction=0.3, half_extents=jaw_half.copy()),
        ColliderSpec(id=1, shape_kind="box", friction=0.3, half_extents=jaw_half.copy()),
    ]
    group = GripperGroup(name="gripper", colliders=[0, 1],
                         jaw_axis=np.array([1.0, 0.0, 0.0]),
                         open_gap=0.12, closed_gap=0.012)
    traj = _gripper_keyframes([
        (0.0, (0.5, 0.50, 0.5), "open"),
        (0.3, (0.5, 0.19, 0.5), "open"),
        (0.45, (0.5, 0.19, 0.5), "closed"),
        (1.3, (0.5, 0.55, 0.5), "closed"),
        (1.5, (0.5, 0.55, 0.5), "closed"),
    ], jaw_half[0], group.open_gap, group.closed_gap)
    return SceneConfig(
        name="pull", domain_extent=(1.0, 1.0, 1.0), resolution=(64, 64, 64),
        params=SimParams(), materials=[_material(e, 1.0e4)],
        bodies=[_slab((0.5, 0.117, 0.5), (0.56, 0.14, 0.44), count, seed)],
        colliders=colliders, trajectory=traj, groups=[group], duration=1.5)


def _tension(e, particles, seed):
    count = particles or 12000
    jaw_half = np.array([0.03, 0.05, 0.05])
    colliders = [
        ColliderSpec(id=0, shape_kind="box", friction=0.3, half_extents=jaw_half.copy()),
        ColliderSpec(id=1, shape_kind="box", friction=0.3, half_extents=jaw_half.copy()),
    ]
    group = GripperGroup(name="gripper", colliders=[0, 1],
                         jaw_axis=np.array([1.0, 0.0, 0.0]),
                         open_gap=0.12, closed_gap=0.012)
    traj = _gripper_keyframes([
        (0.0, (0.35, 0.50, 0.5), "open"),
        (0.3, (0.35, 0.19, 0.5), "open"),
        (0.45, (0.35, 0.19, 0.5), "closed"),
        (1.3, (0.62, 0.22, 0.5), "closed"),
        (1.5, (0.62, 0.22, 0.5), "closed"),
    ], jaw_half[0], group.open_gap, group.closed_gap)
    return SceneConfig(
        name="tension", domain_extent=(1.0, 1.0, 1.0), resolution=(64, 64, 64),
        params=SimParams(), materials=[_material(e, 1.0e4)],
        bodies=[_slab((0.5, 0.117, 0.5), (0.56, 0.14, 0.44), count, seed)],
        colliders=colliders, trajectory=traj, groups=[group], duration=1.5)


def _tear(e, particles, seed):
    count = particles or 12000
    half = np.array([0.045, 0.045, 0.045])
    colliders = [
        ColliderSpec(id=0, shape_kind="box", friction=0.5, mode="sticky",
                     half_extents=half.copy()),
        ColliderSpec(id=1, shape_kind="box", friction=0.5, mode="sticky",
                     half_extents=half.copy()),
    ]
    q = _IDENTITY_Q
    traj = [
        Keyframe(0.0, [(np.array([0.44, 0.16, 0.5]), q.copy()),
                       (np.array([0.56, 0.16, 0.5]), q.copy())]),
        Keyframe(0.15, [(np.array([0.44, 0.16, 0.5]), q.copy()),
                        (np.array([0.56, 0.16, 0.5]), q.copy())]),
        Keyframe(1.1, [(np.array([0.18, 0.20, 0.5]), q.copy()),
                       (np.array([0.82, 0.20, 0.5]), q.copy())]),
        Keyframe(1.2, [(np.array([0.18, 0.20, 0.5]), q.copy()),
                       (np.array([0.82, 0.20, 0.5]), q.copy())]),
    ]
    return SceneConfig(
        name="tear", domain_extent=(1.0, 1.0, 1.0), resolution=(64, 64, 64),
        params=SimParams(), materials=[_material(e, 1.0e4)],
        bodies=[_slab((0.5, 0.117, 0.5), (0.56, 0.14, 0.44), count, seed)],
        colliders=colliders, trajectory=traj, duration=1.2)


def _retraction(e, particles, seed):
    # headline configuration: 24K particles, 64^3 grid, dt 5e-4, 25 substeps;
    # the 2 m domain keeps dt stable across the stiffness sweep up to 1 MPa
    count = particles or 24000
    jaw_half = np.array([0.04, 0.1, 0.08])
    colliders = [
        ColliderSpec(id=0, shape_kind="box", friction=0.3, half_extents=jaw_half.copy()),
        ColliderSpec(id=1, shape_kind="box", friction=0.3, half_extents=jaw_half.copy()),
    ]
    group = GripperGroup(name="gripper", colliders=[0, 1],
                         jaw_axis=np.array([1.0, 0.0, 0.0]),
                         open_gap=0.16, closed_gap=0.02)
    traj = _gripper_keyframes([
        (0.0, (0.5, 0.80, 1.0), "open"),
        (0.3, (0.5, 0.31, 1.0), "open"),
        (0.45, (0.5, 0.31, 1.0), "closed"),
        (1.4, (0.62, 0.95, 1.0), "closed"),
        (1.5, (0.62, 0.95, 1.0), "closed"),
    ], jaw_half[0], group.open_gap, group.closed_gap)
    return SceneConfig(
        name="retraction", domain_extent=(2.0, 2.0, 2.0), resolution=(64, 64, 64),
        params=SimParams(), materials=[_material(e, 1.0e4)],
        bodies=[_slab((1.0, 0.214, 1.0), (1.0, 0.24, 0.72), count, seed)],
        colliders=colliders, trajectory=traj, groups=[group], duration=1.5)
