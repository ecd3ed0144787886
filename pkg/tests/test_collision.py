import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import softmpm as sm
from softmpm import sdf as sdf_module
from softmpm.meshio import box_mesh


def rot_z(deg):
    return Rotation.from_euler("z", deg, degrees=True).as_matrix()


def make_box_collider(idx=0, half=(1.0, 1.0, 1.0), **kw):
    return sm.RigidCollider(id=idx, shape=sm.Box(np.asarray(half, dtype=float)), **kw)


# ---------------------------------------------------------------------------
# distances and frames
# ---------------------------------------------------------------------------

def test_box_distance_values():
    h = np.ones(3)
    assert sm.box_distance((0.0, 0.0, 0.0), h) == -1.0
    assert sm.box_distance((2.0, 0.0, 0.0), h) == 1.0
    assert sm.box_distance((2.0, 2.0, 0.0), h) == pytest.approx(np.sqrt(2.0), rel=1e-15)


def test_world_to_ref():
    c = make_box_collider()
    assert np.array_equal(sm.world_to_ref((0.3, 0.4, 0.5), c), (0.3, 0.4, 0.5))
    c = make_box_collider(translation=np.array([1.0, 0.0, 0.0]))
    assert np.array_equal(sm.world_to_ref((1.0, 0.0, 0.0), c), (0.0, 0.0, 0.0))
    c = make_box_collider(rotation=rot_z(90.0))
    ref = sm.world_to_ref((0.0, 1.0, 0.0), c)
    assert np.abs(ref - np.array([1.0, 0.0, 0.0])).max() < 1e-12


def test_rotation_must_be_orthonormal():
    with pytest.raises(sm.ParameterError):
        make_box_collider(rotation=np.eye(3) * 1.1)


def test_sdf_normal_box_faces():
    c = make_box_collider(half=(1.0, 2.0, 1.5))
    n = sm.sdf_normal(c.shape, np.array([0.0, 2.5, 0.0]), c)
    assert np.abs(n - np.array([0.0, 1.0, 0.0])).max() < 1e-9
    c_rot = make_box_collider(half=(1.0, 2.0, 1.5), rotation=rot_z(90.0))
    n = sm.sdf_normal(c_rot.shape, np.array([0.0, 2.5, 0.0]), c_rot)
    assert np.abs(n - np.array([-1.0, 0.0, 0.0])).max() < 1e-9
    assert abs(np.linalg.norm(n) - 1.0) < 1e-9


def test_collider_point_velocity():
    c = make_box_collider(linear_velocity=np.array([1.0, 2.0, 3.0]))
    assert np.array_equal(sm.collider_point_velocity(c, (5.0, 5.0, 5.0)),
                          (1.0, 2.0, 3.0))
    c = make_box_collider(angular_velocity=np.array([0.0, 0.0, 2.0]))
    v = sm.collider_point_velocity(c, (3.0, 0.0, 0.0))
    assert np.abs(v - np.array([0.0, 6.0, 0.0])).max() < 1e-12
    assert np.array_equal(sm.collider_point_velocity(c, c.translation), np.zeros(3))


# ---------------------------------------------------------------------------
# velocity resolution
# ---------------------------------------------------------------------------

def test_resolve_velocity_coulomb_sliding():
    c = make_box_collider(friction_mu=0.5)
    v = sm.resolve_velocity(np.array([1.0, -1.0, 0.0]), c,
                            np.array([0.0, 1.0, 0.0]), np.zeros(3))
    assert np.abs(v - np.array([0.5, 0.0, 0.0])).max() < 1e-12


def test_resolve_velocity_pure_normal_hit():
    c = make_box_collider(friction_mu=2.0)
    v = sm.resolve_velocity(np.array([0.0, -1.0, 0.0]), c,
                            np.array([0.0, 1.0, 0.0]), np.zeros(3))
    assert np.abs(v).max() == 0.0


def test_resolve_velocity_separating_untouched():
    c = make_box_collider(friction_mu=0.5)
    vin = np.array([0.0, 1.0, 0.0])
    v = sm.resolve_velocity(vin, c, np.array([0.0, 1.0, 0.0]), np.zeros(3))
    assert np.array_equal(v, vin)


def test_resolve_velocity_friction_cone_sticks():
    c = make_box_collider(friction_mu=2.0)
    v = sm.resolve_velocity(np.array([0.5, -1.0, 0.0]), c,
                            np.array([0.0, 1.0, 0.0]), np.zeros(3))
    assert np.abs(v).max() == 0.0  # |v_t| <= mu |v_n|: fully arrested, not reversed


def test_resolve_velocity_sticky_mode():
    c = make_box_collider(friction_mu=0.0, mode="sticky",
                          linear_velocity=np.array([0.2, 0.1, 0.0]))
    v = sm.resolve_velocity(np.array([1.0, -1.0, 0.5]), c,
                            np.array([0.0, 1.0, 0.0]), np.zeros(3))
    assert np.array_equal(v, c.linear_velocity)


def test_resolve_removes_normal_relative_velocity(rng):
    """Non-penetration: after resolution the normal relative velocity is zero."""
    for _ in range(200):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        c = make_box_collider(friction_mu=rng.uniform(0.0, 1.5),
                              linear_velocity=rng.normal(size=3),
                              angular_velocity=rng.normal(size=3))
        x = rng.normal(size=3)
        v = rng.normal(size=3) * 2.0
        v_co = sm.collider_point_velocity(c, x)
        v_out = sm.resolve_velocity(v, c, n, x)
        v_rel_in = v - v_co
        if v_rel_in @ n >= 0.0:
            assert np.array_equal(v_out, v)
        else:
            assert abs((v_out - v_co) @ n) < 1e-12
            # friction only dissipates and never reverses direction
            t_in = v_rel_in - (v_rel_in @ n) * n
            t_out = (v_out - v_co) - ((v_out - v_co) @ n) * n
            assert np.linalg.norm(t_out) <= np.linalg.norm(t_in) + 1e-12
            if np.linalg.norm(t_out) > 1e-12:
                cos = t_in @ t_out / (np.linalg.norm(t_in) * np.linalg.norm(t_out))
                assert cos > 1.0 - 1e-9


def test_resolution_is_frame_equivariant(rng):
    """Rotating the whole scene rotates the resolved velocity."""
    for _ in range(50):
        q = Rotation.random(rng=rng)
        qm = q.as_matrix()
        base_rot = Rotation.random(rng=rng).as_matrix()
        c = make_box_collider(half=(0.5, 0.8, 1.1),
                              rotation=base_rot,
                              translation=rng.normal(size=3),
                              linear_velocity=rng.normal(size=3),
                              angular_velocity=rng.normal(size=3),
                              friction_mu=0.4)
        x = c.translation + rng.normal(size=3)
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        v = rng.normal(size=3)
        v_plain = sm.resolve_velocity(v, c, n, x)
        c_rot = sm.RigidCollider(id=0, shape=c.shape, rotation=qm @ base_rot,
                                 translation=qm @ c.translation,
                                 linear_velocity=qm @ c.linear_velocity,
                                 angular_velocity=qm @ c.angular_velocity,
                                 friction_mu=0.4)
        v_rot = sm.resolve_velocity(qm @ v, c_rot, qm @ n, qm @ x)
        assert np.abs(v_rot - qm @ v_plain).max() < 1e-9


# ---------------------------------------------------------------------------
# merged field
# ---------------------------------------------------------------------------

def scalar_box_distance(c, px, py, pz):
    """Plain-arithmetic signed distance in the collider frame (oracle form)."""
    d0 = px - c.translation[0]
    d1 = py - c.translation[1]
    d2 = pz - c.translation[2]
    r = c.rotation
    lx = r[0, 0] * d0 + r[1, 0] * d1 + r[2, 0] * d2
    ly = r[0, 1] * d0 + r[1, 1] * d1 + r[2, 1] * d2
    lz = r[0, 2] * d0 + r[1, 2] * d1 + r[2, 2] * d2
    h = c.shape.half_extents
    qx, qy, qz = abs(lx) - h[0], abs(ly) - h[1], abs(lz) - h[2]
    ox, oy, oz = max(qx, 0.0), max(qy, 0.0), max(qz, 0.0)
    return np.sqrt(ox * ox + oy * oy + oz * oz) + min(max(qx, qy, qz), 0.0)


def brute_force_field(colliders, grid, theta, distance_fn=scalar_box_distance):
    """Independent per-node min/argmin loop (z-buffer style merge oracle)."""
    nx, ny, nz = grid.resolution
    dist = np.full((nx, ny, nz), 1e30)
    obj = np.full((nx, ny, nz), -1, dtype=np.int32)
    for ix in range(nx):
        for iy in range(ny):
            for iz in range(nz):
                best = 1e30
                best_i = -1
                for i, c in enumerate(colliders):
                    d = distance_fn(c, ix * grid.dx, iy * grid.dx, iz * grid.dx)
                    if d < best:
                        best = d
                        best_i = i
                dist[ix, iy, iz] = best
                obj[ix, iy, iz] = best_i if best < 2.0 * theta else -1
    return dist, obj


def test_no_colliders_all_sentinel(small_grid):
    field = sm.update_collision_field([], small_grid)
    assert (field.object_id == -1).all()
    assert (field.distance >= 1e29).all()


def test_merged_field_matches_brute_force(rng):
    grid = sm.Grid(resolution=(8, 8, 8), extent=(1.0, 1.0, 1.0))
    for trial in range(5):
        k = int(rng.integers(1, 5))
        colliders = []
        for i in range(k):
            colliders.append(sm.RigidCollider(
                id=i, shape=sm.Box(rng.uniform(0.05, 0.3, 3)),
                rotation=Rotation.random(rng=rng).as_matrix(),
                translation=rng.uniform(0.1, 0.9, 3)))
        theta = 0.5 * grid.dx
        field = sm.update_collision_field(colliders, grid, theta)
        dist, obj = brute_force_field(colliders, grid, theta)
        assert np.array_equal(field.object_id, obj)
        assert np.array_equal(field.distance, dist)


def test_merged_field_tie_goes_to_lowest(small_grid):
    shape = sm.Box(np.array([0.1, 0.1, 0.1]))
    a = sm.RigidCollider(id=2, shape=shape, translation=np.array([0.4, 0.5, 0.5]))
    b = sm.RigidCollider(id=5, shape=shape, translation=np.array([0.4, 0.5, 0.5]))
    field = sm.update_collision_field([a, b], small_grid)
    hit = field.object_id >= 0
    assert hit.any()
    assert (field.object_id[hit] == 0).all()  # index 0 is the id=2 collider


def test_merged_field_baked_matches_brute_force(rng):
    verts, tris = box_mesh(size=(0.3, 0.3, 0.3))
    grid_sdf = sm.bake_sdf(verts, tris, resolution=32)
    grid = sm.Grid(resolution=(8, 8, 8), extent=(1.0, 1.0, 1.0))
    colliders = [
        sm.RigidCollider(id=0, shape=sm.Baked(grid_sdf),
                         rotation=Rotation.random(rng=rng).as_matrix(),
                         translation=np.array([0.4, 0.5, 0.5])),
        sm.RigidCollider(id=1, shape=sm.Box(np.array([0.15, 0.1, 0.2])),
                         translation=np.array([0.7, 0.4, 0.6])),
    ]
    theta = 0.5 * grid.dx

    def public_ops_distance(c, px, py, pz):
        return sm.sample_distance(c.shape, sm.world_to_ref(np.array([px, py, pz]), c))

    field = sm.update_collision_field(colliders, grid, theta)
    dist, obj = brute_force_field(colliders, grid, theta, public_ops_distance)
    assert np.abs(field.distance - dist).max() < 1e-12
    assert np.array_equal(field.object_id, obj)


def test_no_bake_inside_simulation_loop(small_grid):
    verts, tris = box_mesh(size=(0.2, 0.2, 0.2))
    baked = sm.Baked(sm.bake_sdf(verts, tris, resolution=24))
    collider = sm.RigidCollider(id=0, shape=baked,
                                translation=np.array([0.5, 0.3, 0.5]))
    mats = [sm.Material(1.0e4, 0.3, 1000.0)]
    spawn = sm.sample_box((0.5, 0.6, 0.5), (0.15, 0.15, 0.15), 200, seed=3,
                          grid=small_grid)
    state = sm.SimState.from_spawns(small_grid, [spawn], mats)
    count_before = sdf_module.BAKE_COUNT
    for _ in range(20):
        sm.substep(state, mats, sm.SimParams(), [collider])
    assert sdf_module.BAKE_COUNT == count_before


def test_grid_update_resolves_against_collider(small_grid):
    """A node inside the collision band adopts the tool's normal velocity."""
    mats = [sm.Material(1.0e4, 0.3, 1000.0)]
    spawn = sm.sample_box((0.5, 0.62, 0.5), (0.1, 0.1, 0.1), 64, seed=5,
                          grid=small_grid)
    state = sm.SimState.from_spawns(small_grid, [spawn], mats)
    state.v[:, 1] = -1.0  # falling onto a sticky tool just below
    collider = sm.RigidCollider(id=0, shape=sm.Box(np.array([0.2, 0.05, 0.2])),
                                translation=np.array([0.5, 0.45, 0.5]),
                                mode="sticky")
    params = sm.SimParams(gravity=(0.0, 0.0, 0.0))
    for _ in range(40):
        sm.substep(state, mats, params, [collider])
    # the block cannot fall through: its lowest particles stop near the tool top
    assert state.x[:, 1].min() > 0.45 + 0.05 - 2.5 * small_grid.dx
