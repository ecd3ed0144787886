"""End-to-end acceptance suite.

Each criterion runs at its stated tolerance and prints one PASS/FAIL line
(run pytest with -s to watch them). The heavy scenario runs are shared
through a module-scoped fixture so the full suite stays within its budget.
"""

import time

import numba
import numpy as np
import pytest
from scipy.spatial.transform import Rotation
from scipy.stats import linregress

import softmpm as sm
from softmpm import cli, oracle
from softmpm.meshio import box_mesh
from conftest import random_f, random_state

from test_collision import brute_force_field, make_box_collider


def report(name: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# conservation
# ---------------------------------------------------------------------------

def test_conservation_suite():
    grid = sm.Grid(resolution=(16, 16, 16), extent=(1.0, 1.0, 1.0))
    rng = np.random.default_rng(2024)
    params = sm.SimParams()
    state, mats = random_state(grid, 100, rng)
    sm.p2g(state, mats, params)  # warm the compiled kernels outside the clock

    worst_mass = 0.0
    worst_mom = 0.0
    t0 = time.perf_counter()
    for _ in range(100):
        state, mats = random_state(grid, 100, rng)
        momentum = (state.mass[:, None] * state.v).sum(axis=0)
        sm.p2g(state, mats, params)
        worst_mass = max(worst_mass,
                         abs(state.grid_m.sum() - state.mass.sum()) / state.mass.sum())
        rel = np.linalg.norm(state.grid_mv.reshape(-1, 3).sum(axis=0) - momentum) \
            / np.linalg.norm(momentum)
        worst_mom = max(worst_mom, rel)
    elapsed = time.perf_counter() - t0
    ok = worst_mass < 1e-9 and worst_mom < 1e-9 and elapsed <= 1.0
    report("conservation (mass & momentum, 100 random states)", ok,
           f"mass rel err {worst_mass:.2e}, momentum rel err {worst_mom:.2e}, "
           f"{elapsed:.2f}s")


# ---------------------------------------------------------------------------
# constitutive model
# ---------------------------------------------------------------------------

def test_constitutive_suite():
    rng = np.random.default_rng(99)
    t0 = time.perf_counter()
    p_identity = np.abs(sm.neo_hookean_stress(np.eye(3), 500.0, 600.0)).max()
    worst_rot = max(np.abs(sm.neo_hookean_stress(r, 500.0, 600.0)).max()
                    for r in Rotation.random(100, rng=rng).as_matrix())
    worst_fd = 0.0
    h = 1.0e-6
    for _ in range(100):
        f = random_f(rng)
        mu = rng.uniform(100.0, 2000.0)
        lam = rng.uniform(0.0, 3000.0)
        p = sm.neo_hookean_stress(f, mu, lam)
        g = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                fp, fm = f.copy(), f.copy()
                fp[i, j] += h
                fm[i, j] -= h
                g[i, j] = (sm.energy_density(fp, mu, lam)
                           - sm.energy_density(fm, mu, lam)) / (2 * h)
        worst_fd = max(worst_fd, np.linalg.norm(g - p) / np.linalg.norm(p))
    elapsed = time.perf_counter() - t0
    ok = p_identity <= 1e-12 and worst_rot <= 1e-12 and worst_fd < 1e-5 \
        and elapsed <= 1.0
    report("constitutive (rest/rotation neutrality + energy gradient)", ok,
           f"|P(I)| {p_identity:.1e}, max |P(R)| {worst_rot:.2e}, "
           f"FD rel err {worst_fd:.2e}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# oracle equivalence
# ---------------------------------------------------------------------------

def test_oracle_equivalence():
    oracle.oracle_divergence(substeps=1)  # warm both implementations
    t0 = time.perf_counter()
    gap = oracle.oracle_divergence()
    elapsed = time.perf_counter() - t0
    ok = gap <= 1e-12 and elapsed <= 5.0
    report("oracle equivalence (parallel vs loop-nest reference)", ok,
           f"max |dx| {gap:.2e} over {oracle.ORACLE_SUBSTEPS} substeps "
           f"(512 particles, 16^3), {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# collision
# ---------------------------------------------------------------------------

def test_collision_suite():
    rng = np.random.default_rng(5150)
    t0 = time.perf_counter()

    # non-penetration + friction clamp
    worst_pen = 0.0
    for _ in range(200):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        c = make_box_collider(friction_mu=rng.uniform(0.0, 1.2),
                              linear_velocity=rng.normal(size=3))
        x = rng.normal(size=3)
        v = rng.normal(size=3) * 2.0
        v_co = sm.collider_point_velocity(c, x)
        if (v - v_co) @ n >= 0.0:
            continue
        v_out = sm.resolve_velocity(v, c, n, x)
        worst_pen = max(worst_pen, abs((v_out - v_co) @ n))
    c = make_box_collider(friction_mu=2.0)
    clamped = sm.resolve_velocity(np.array([0.5, -1.0, 0.0]), c,
                                  np.array([0.0, 1.0, 0.0]), np.zeros(3))
    clamp_ok = np.abs(clamped).max() == 0.0
    slide = sm.resolve_velocity(np.array([1.0, -1.0, 0.0]),
                                make_box_collider(friction_mu=0.5),
                                np.array([0.0, 1.0, 0.0]), np.zeros(3))
    slide_ok = np.abs(slide - np.array([0.5, 0.0, 0.0])).max() < 1e-12

    # frame-rotation consistency
    worst_frame = 0.0
    for _ in range(50):
        q = Rotation.random(rng=rng).as_matrix()
        base = Rotation.random(rng=rng).as_matrix()
        c = make_box_collider(friction_mu=0.4, rotation=base,
                              translation=rng.normal(size=3),
                              linear_velocity=rng.normal(size=3),
                              angular_velocity=rng.normal(size=3))
        x = c.translation + rng.normal(size=3)
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        v = rng.normal(size=3)
        v_plain = sm.resolve_velocity(v, c, n, x)
        c_rot = sm.RigidCollider(id=0, shape=c.shape, rotation=q @ base,
                                 translation=q @ c.translation,
                                 linear_velocity=q @ c.linear_velocity,
                                 angular_velocity=q @ c.angular_velocity,
                                 friction_mu=0.4)
        v_rot = sm.resolve_velocity(q @ v, c_rot, q @ n, q @ x)
        worst_frame = max(worst_frame, np.abs(v_rot - q @ v_plain).max())

    # merged field vs brute force, random scenes of up to 4 colliders
    grid = sm.Grid(resolution=(8, 8, 8), extent=(1.0, 1.0, 1.0))
    merge_ok = True
    for _ in range(3):
        colliders = [sm.RigidCollider(id=i, shape=sm.Box(rng.uniform(0.05, 0.3, 3)),
                                      rotation=Rotation.random(rng=rng).as_matrix(),
                                      translation=rng.uniform(0.1, 0.9, 3))
                     for i in range(int(rng.integers(1, 5)))]
        theta = 0.5 * grid.dx
        field = sm.update_collision_field(colliders, grid, theta)
        dist, obj = brute_force_field(colliders, grid, theta)
        merge_ok &= np.array_equal(field.distance, dist)
        merge_ok &= np.array_equal(field.object_id, obj)

    elapsed = time.perf_counter() - t0
    ok = worst_pen <= 1e-12 and clamp_ok and slide_ok and worst_frame < 1e-9 \
        and merge_ok and elapsed <= 2.0
    report("collision (non-penetration, friction, frame, merge)", ok,
           f"normal residual {worst_pen:.1e}, frame dev {worst_frame:.2e}, "
           f"merge exact {merge_ok}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# SDF fidelity
# ---------------------------------------------------------------------------

def test_sdf_fidelity_256():
    verts, tris = box_mesh(size=(1.0, 1.0, 1.0))
    sm.bake_sdf(verts, tris, resolution=16)  # warm compiled kernels
    rng = np.random.default_rng(31337)
    t0 = time.perf_counter()
    grid = sm.bake_sdf(verts, tris, resolution=256)
    pts = rng.uniform(grid.bounds_min, grid.bounds_min + grid.extent, (10000, 3))
    baked = grid.sample(pts)
    elapsed = time.perf_counter() - t0
    exact = np.array([sm.box_distance(p, (0.5, 0.5, 0.5)) for p in pts])
    cell = grid.extent * grid.dx_sdf
    worst = np.abs(baked - exact).max()
    ok = worst < 2.0 * cell and elapsed <= 10.0
    report("SDF fidelity (256^3 cube bake)", ok,
           f"max deviation {worst:.5f} m < {2 * cell:.5f} m (2 cells), "
           f"bake+queries {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# retraction scenario: stability + stiffness trend (shared runs)
# ---------------------------------------------------------------------------

E_SWEEP = (1.0e3, 1.0e4, 1.0e5, 1.0e6)


@pytest.fixture(scope="module")
def retraction_sweep():
    results = {}
    for e in E_SWEEP:
        config = sm.builtin_scenario("retraction", young_modulus=e)
        instance = sm.build_scene(config)
        pose_fn = sm.make_pose_fn(instance)
        extent = np.array(config.domain_extent)
        t0 = time.perf_counter()
        nan_free = True
        in_domain = True
        for _ in range(config.frame_count):
            sm.step(instance.state, instance.materials, config.params,
                    instance.colliders, pose_fn)
            if instance.state.has_nan():
                nan_free = False
                break
            if (instance.state.x < 0.0).any() or (instance.state.x > extent).any():
                in_domain = False
        results[e] = {
            "wall": time.perf_counter() - t0,
            "nan_free": nan_free,
            "in_domain": in_domain,
            "frames": config.frame_count,
            "particles": instance.state.particle_count,
            "final": instance.metrics(),
        }
    return results


def test_stability_retraction_120_frames(retraction_sweep):
    r = retraction_sweep[1.0e4]  # the builtin scenario's default stiffness
    ok = r["nan_free"] and r["in_domain"] and r["frames"] == 120 \
        and r["particles"] == 24000 and r["wall"] <= 300.0
    report("stability (retraction, 24K particles, 64^3, 120 frames)", ok,
           f"no NaN: {r['nan_free']}, in-domain: {r['in_domain']}, "
           f"wall {r['wall']:.0f}s <= 300s")


def test_stiffness_trend(retraction_sweep):
    finals = [retraction_sweep[e]["final"].mean_abs_j_minus_1 for e in E_SWEEP]
    healthy = all(retraction_sweep[e]["nan_free"] for e in E_SWEEP)
    decreasing = all(a > b for a, b in zip(finals, finals[1:]))
    detail = ", ".join(f"E={e:g}: {v:.4f}" for e, v in zip(E_SWEEP, finals))
    report("stiffness trend (mean|J-1| strictly decreasing in E)",
           healthy and decreasing, detail)


# ---------------------------------------------------------------------------
# scaling trend
# ---------------------------------------------------------------------------

def test_scaling_trend_single_thread():
    counts = (6000, 12000, 24000, 48000)
    threads_before = numba.get_num_threads()
    times = []
    try:
        numba.set_num_threads(1)
        for count in counts:
            instance = cli.bench_scene(count)
            sm.step(instance.state, instance.materials, instance.config.params)
            samples = []
            for _ in range(3):
                rep = sm.step(instance.state, instance.materials,
                              instance.config.params)
                samples.append(rep.timings_ms["soft_simulation"])
            times.append(float(np.median(samples)))
    finally:
        numba.set_num_threads(threads_before)
    fit = linregress(np.array(counts, dtype=float), np.array(times))
    r2 = float(fit.rvalue ** 2)
    detail = ", ".join(f"{c // 1000}K: {t:.0f}ms" for c, t in zip(counts, times)) \
        + f"; R^2 = {r2:.4f}"
    report("scaling trend (single-thread ms/frame linear in particles)",
           r2 >= 0.95, detail)


# ---------------------------------------------------------------------------
# timing report taxonomy
# ---------------------------------------------------------------------------

def test_timing_report_taxonomy(tmp_path):
    config = sm.builtin_scenario("push", particles=2000)
    config.resolution = (32, 32, 32)
    instance = sm.build_scene(config)
    rows, means, total = cli.simulate(instance, 6, tmp_path, write_mesh=True,
                                      progress=False)
    cli._write_outputs(tmp_path, rows, means)
    header = (tmp_path / "timings.csv").read_text().splitlines()[0]
    taxonomy_ok = header == "collision_detection,soft_simulation,marching_cubes," \
                            "data_export,other"
    covered = sum(means.values())
    within = abs(covered - total) <= 0.05 * total
    report("timing report (taxonomy + categories sum to total within 5%)",
           taxonomy_ok and within,
           f"columns '{header}', sum {covered:.1f}ms vs total {total:.1f}ms")
