import json
from pathlib import Path

import numpy as np
import pytest

import softmpm as sm
from softmpm.cli import TIMING_COLUMNS, main


@pytest.fixture
def tiny_scene(tmp_path):
    """A fast scene: few particles, small grid, short trajectory."""
    config = sm.builtin_scenario("push", particles=400)
    config.resolution = (32, 32, 32)
    config.duration = 0.05
    path = tmp_path / "tiny.json"
    sm.save_scene(path, config)
    return path


def test_run_produces_outputs(tiny_scene, tmp_path):
    out = tmp_path / "out"
    rc = main(["run", "--scene", str(tiny_scene), "--frames", "3",
               "--out", str(out), "--seed", "5"])
    assert rc == 0
    objs = sorted(out.glob("frame_*.obj"))
    assert len(objs) == 3
    assert objs[0].name == "frame_000000.obj"
    metrics = (out / "metrics.csv").read_text().strip().splitlines()
    assert metrics[0] == ("time,lifted_fraction,detached_fraction,"
                          "mean_abs_J_minus_1,max_displacement")
    assert len(metrics) == 4
    timings = (out / "timings.csv").read_text().strip().splitlines()
    assert timings[0] == ",".join(TIMING_COLUMNS)
    values = [float(v) for v in timings[1].split(",")]
    assert len(values) == len(TIMING_COLUMNS)
    assert all(v >= 0.0 for v in values)
    assert (out / "particles_final.npz").exists()


def test_run_no_mesh_skips_objs(tiny_scene, tmp_path):
    out = tmp_path / "out2"
    rc = main(["run", "--scene", str(tiny_scene), "--frames", "2",
               "--no-mesh", "--out", str(out)])
    assert rc == 0
    assert not list(out.glob("*.obj"))
    assert (out / "metrics.csv").exists()


def test_run_is_reproducible(tiny_scene, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main(["run", "--scene", str(tiny_scene), "--frames", "2",
                   "--deterministic", "--seed", "9", "--no-mesh",
                   "--out", str(out)])
        assert rc == 0
        outs.append((out / "metrics.csv").read_bytes())
    assert outs[0] == outs[1]


def test_missing_scene_is_config_error(tmp_path):
    rc = main(["run", "--scene", str(tmp_path / "nope.json"),
               "--out", str(tmp_path / "o")])
    assert rc == 2


def test_invalid_scene_is_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "x"}))
    rc = main(["run", "--scene", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_oracle_check_passes():
    assert main(["run", "--oracle-check"]) == 0


def test_sweep_summary(tmp_path):
    out = tmp_path / "sweep"
    rc = main(["sweep", "--scenario", "pull", "--param", "E",
               "--values", "2e3,2e4", "--frames", "2", "--particles", "300",
               "--out", str(out)])
    assert rc == 0
    lines = (out / "summary.csv").read_text().strip().splitlines()
    assert lines[0].startswith("young_modulus,status,time,")
    assert len(lines) == 3
    assert lines[1].startswith("2000,ok,")
    assert lines[2].startswith("20000,ok,")


def test_bench_csv_contract(tmp_path):
    out = tmp_path / "bench.csv"
    rc = main(["bench", "--particles", "500,1000", "--threads", "2",
               "--frames", "2", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "particles,threads,ms_per_frame"
    assert len(lines) == 3
    for line in lines[1:]:
        count, threads, ms = line.split(",")
        assert int(count) in (500, 1000)
        assert int(threads) == 2
        assert float(ms) > 0.0


def test_scene_export_round_trip(tmp_path):
    path = tmp_path / "exported.json"
    assert main(["scene", "--scenario", "tear", "--out", str(path)]) == 0
    config = sm.load_scene(path)
    assert config.name == "tear"
    assert len(config.colliders) == 2


def test_bake_subcommand(tmp_path):
    from softmpm.meshio import box_mesh, save_obj
    verts, tris = box_mesh(size=(0.4, 0.4, 0.4))
    mesh_path = tmp_path / "tool.obj"
    save_obj(mesh_path, verts, tris)
    out = tmp_path / "tool.sdf1"
    rc = main(["bake", "--mesh", str(mesh_path), "--out", str(out),
               "--resolution", "32"])
    assert rc == 0
    grid = sm.load_sdf(out)
    assert grid.values.shape == (32, 32, 32)
    assert grid.sample(np.zeros(3)) < 0.0


def test_scene_with_baked_collider_runs(tmp_path):
    from softmpm.meshio import box_mesh, save_obj
    verts, tris = box_mesh(size=(0.15, 0.1, 0.15))
    mesh_path = tmp_path / "tool.obj"
    save_obj(mesh_path, verts, tris)
    assert main(["bake", "--mesh", str(mesh_path), "--out",
                 str(tmp_path / "tool.sdf1"), "--resolution", "24"]) == 0

    config = sm.builtin_scenario("push", particles=300)
    config.resolution = (32, 32, 32)
    from softmpm.scene import scene_to_dict
    d = scene_to_dict(config)
    d["colliders"][0]["shape"] = {"type": "sdf", "path": "tool.sdf1"}
    scene_path = tmp_path / "baked_scene.json"
    scene_path.write_text(json.dumps(d))
    out = tmp_path / "out"
    rc = main(["run", "--scene", str(scene_path), "--frames", "2",
               "--no-mesh", "--out", str(out)])
    assert rc == 0


def test_multithread_not_slower_at_scale():
    """Parallel soft simulation must not regress below single-thread speed."""
    import numba

    from softmpm import step
    from softmpm.cli import bench_scene

    before = numba.get_num_threads()
    medians = {}
    try:
        for threads in (1, 2):
            numba.set_num_threads(threads)
            instance = bench_scene(48000)
            step(instance.state, instance.materials, instance.config.params)
            samples = []
            for _ in range(3):
                rep = step(instance.state, instance.materials,
                           instance.config.params)
                samples.append(rep.timings_ms["soft_simulation"])
            medians[threads] = float(np.median(samples))
    finally:
        numba.set_num_threads(before)
    assert medians[2] <= medians[1]
