"""Headless command line: run scenarios, sweep stiffness, benchmark, serve.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import oracle
from .core import step
from .errors import NumericalFailure, SimError
from .meshio import load_mesh
from .scene import (METRICS_CSV_HEADER, SceneConfig, SceneInstance, build_scene,
                    load_scene, make_pose_fn, save_scene)
from .scenarios import SCENARIO_NAMES, builtin_scenario
from .sdf import bake_sdf, save_sdf
from .surfacing import export_obj, extract_surface

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

TIMING_COLUMNS = ("collision_detection", "soft_simulation", "marching_cubes",
                  "data_export", "other")


def _set_threads(requested: int | None) -> int:
    import numba
    n = requested
    if n is None:
        env = os.environ.get("MPM_THREADS", "")
        n = int(env) if env else None
    if n is not None:
        numba.set_num_threads(max(1, n))
    return numba.get_num_threads()


def _load_config(args) -> tuple[SceneConfig, Path | None]:
    if getattr(args, "scene", None):
        path = Path(args.scene)
        return load_scene(path), path.parent
    if getattr(args, "scenario", None):
        return builtin_scenario(args.scenario), None
    raise SimError("one of --scene or --scenario is required")


def simulate(instance: SceneInstance, frames: int, out_dir: Path | None,
             write_mesh: bool, progress: bool = True):
    """Drive a built scene for ``frames`` frames, collecting outputs.

    Returns (metric_rows, timing_means_ms, mean_total_ms). Raises
    NumericalFailure on NaN.
    """
    cfg = instance.config
    pose_fn = make_pose_fn(instance)
    iso = cfg.surface_iso
    totals = {k: 0.0 for k in TIMING_COLUMNS}
    grand_total = 0.0
    rows = []
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    for f in range(frames):
        t_frame = time.perf_counter()
        rep = step(instance.state, instance.materials, cfg.params,
                   instance.colliders, pose_fn)
        if instance.state.has_nan():
            raise NumericalFailure(f"NaN state detected at frame {f}")
        t_mc = 0.0
        t_export = 0.0
        if write_mesh:
            t0 = time.perf_counter()
            mesh = extract_surface(instance.state, iso)
            t_mc = time.perf_counter() - t0
            if out_dir is not None:
                t0 = time.perf_counter()
                export_obj(mesh, out_dir / f"frame_{f:06d}.obj")
                t_export = time.perf_counter() - t0
        t0 = time.perf_counter()
        rows.append(instance.metrics().csv_row())
        t_export += time.perf_counter() - t0
        frame_total = 1000.0 * (time.perf_counter() - t_frame)
        grand_total += frame_total
        coll = rep.timings_ms["collision_detection"]
        soft = rep.timings_ms["soft_simulation"]
        totals["collision_detection"] += coll
        totals["soft_simulation"] += soft
        totals["marching_cubes"] += 1000.0 * t_mc
        totals["data_export"] += 1000.0 * t_export
        totals["other"] += max(0.0, frame_total - coll - soft
                               - 1000.0 * t_mc - 1000.0 * t_export)
        if progress and (f + 1) % 20 == 0:
            print(f"  frame {f + 1}/{frames}  t={instance.state.time:.3f}s "
                  f"({frame_total:.0f} ms)", flush=True)
    means = {k: v / max(1, frames) for k, v in totals.items()}
    return rows, means, grand_total / max(1, frames)


def _write_outputs(out_dir: Path, rows, means) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.csv").write_text(
        METRICS_CSV_HEADER + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    header = ",".join(TIMING_COLUMNS)
    values = ",".join(f"{means[k]:.3f}" for k in TIMING_COLUMNS)
    (out_dir / "timings.csv").write_text(header + "\n" + values + "\n",
                                         encoding="utf-8")


def cmd_run(args) -> int:
    threads = _set_threads(args.threads)
    if args.oracle_check:
        gap = oracle.oracle_divergence()
        ok = gap <= oracle.ORACLE_TOLERANCE
        print(f"oracle check: max position gap {gap:.3e} over "
              f"{oracle.ORACLE_SUBSTEPS} substeps "
              f"({'OK' if ok else 'MISMATCH'}, tolerance {oracle.ORACLE_TOLERANCE:.0e})")
        return EXIT_OK if ok else EXIT_NUMERICAL
    config, base_dir = _load_config(args)
    frames = args.frames or config.frame_count
    out_dir = Path(args.out)
    instance = build_scene(config, base_dir, particle_override=args.particles,
                           seed_override=args.seed)
    print(f"scenario {config.name!r}: {instance.state.particle_count} particles, "
          f"grid {config.resolution}, {frames} frames, {threads} threads")
    rows, means, _ = simulate(instance, frames, out_dir, write_mesh=not args.no_mesh)
    _write_outputs(out_dir, rows, means)
    np.savez_compressed(out_dir / "particles_final.npz",
                        x=instance.state.x, v=instance.state.v)
    total = sum(means.values())
    print("mean per-frame ms: "
          + ", ".join(f"{k}={means[k]:.1f}" for k in TIMING_COLUMNS)
          + f", total={total:.1f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    _set_threads(args.threads)
    if args.param.upper() != "E":
        raise SimError(f"only the Young's modulus sweep (--param E) is supported, "
                       f"got {args.param!r}")
    values = [float(v) for v in args.values.split(",")]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["young_modulus,status," + METRICS_CSV_HEADER]
    for e in values:
        config = builtin_scenario(args.scenario, young_modulus=e)
        frames = args.frames or config.frame_count
        print(f"sweep E={e:g}: {frames} frames")
        try:
            instance = build_scene(config, particle_override=args.particles,
                                   seed_override=args.seed)
            rows, _, _ = simulate(instance, frames, None, write_mesh=False)
            lines.append(f"{e:g},ok," + rows[-1])
        except SimError as exc:
            print(f"  E={e:g} failed: {exc}")
            lines.append(f"{e:g},failed," + ",".join("nan" for _ in range(5)))
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {out_dir / 'summary.csv'}")
    return EXIT_OK


def bench_scene(count: int) -> SceneInstance:
    """Collider-free settling block used for timing runs."""
    config = builtin_scenario("push", particles=count)
    config.colliders = []
    config.trajectory = []
    config.groups = []
    return build_scene(config)


def cmd_bench(args) -> int:
    counts = [int(v) for v in args.particles.split(",")]
    thread_list = [int(v) for v in (args.threads or "1").split(",")]
    frames = args.frames
    rows = ["particles,threads,ms_per_frame"]
    singles = []
    for threads in thread_list:
        _set_threads(threads)
        for count in counts:
            instance = bench_scene(count)
            step(instance.state, instance.materials, instance.config.params)  # warmup
            samples = []
            for _ in range(frames):
                rep = step(instance.state, instance.materials, instance.config.params)
                samples.append(rep.timings_ms["soft_simulation"])
            ms = float(np.median(samples))
            rows.append(f"{count},{threads},{ms:.3f}")
            if threads == 1:
                singles.append((count, ms))
            print(f"  {count} particles, {threads} threads: {ms:.2f} ms/frame")
    if len(singles) >= 3:
        xs = np.array([s[0] for s in singles], dtype=float)
        ys = np.array([s[1] for s in singles], dtype=float)
        r2 = linear_fit_r2(xs, ys)
        print(f"single-thread linear fit: R^2 = {r2:.4f}")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text("\n".join(rows) + "\n", encoding="utf-8")
        print(f"wrote {out}")
    return EXIT_OK


def linear_fit_r2(xs: np.ndarray, ys: np.ndarray) -> float:
    from scipy.stats import linregress
    fit = linregress(xs, ys)
    return float(fit.rvalue ** 2)


def cmd_serve(args) -> int:
    from .server import serve  # imported lazily: pulls in asyncio/websockets
    _set_threads(args.threads)
    config, base_dir = _load_config(args)
    host, _, port = args.bind.rpartition(":")
    serve(config, host or "127.0.0.1", int(port), base_dir=base_dir,
          static_dir=Path(args.static) if args.static else None,
          particle_override=args.particles,
          frame_rate=args.frame_rate, v_max=args.v_max)
    return EXIT_OK


def cmd_bake(args) -> int:
    verts, tris = load_mesh(args.mesh)
    grid = bake_sdf(verts, tris, resolution=args.resolution)
    save_sdf(args.out, grid)
    print(f"baked {args.mesh} -> {args.out} at {args.resolution}^3 "
          f"(extent {grid.extent:.4g} m)")
    return EXIT_OK


def cmd_scene(args) -> int:
    config = builtin_scenario(args.scenario)
    save_scene(args.out, config)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softmpm",
        description="Soft-body MPM simulator: headless runs, sweeps, benchmarks, "
                    "and a live streaming server.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scene_source(p):
        p.add_argument("--scene", help="scene JSON path")
        p.add_argument("--scenario", choices=SCENARIO_NAMES,
                       help="builtin scenario name")

    run = sub.add_parser("run", help="simulate a scenario headless")
    add_scene_source(run)
    run.add_argument("--frames", type=int, default=None)
    run.add_argument("--particles", type=int, default=None)
    run.add_argument("--threads", type=int, default=None)
    run.add_argument("--deterministic", action="store_true",
                     help="assert reproducible accumulation (always on; kept "
                          "for interface stability)")
    run.add_argument("--no-mesh", action="store_true")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default="out")
    run.add_argument("--oracle-check", action="store_true",
                     help="compare optimized vs reference substeps and exit")
    run.set_defaults(fn=cmd_run)

    sweep = sub.add_parser("sweep", help="run a scenario across stiffness values")
    sweep.add_argument("--scenario", default="retraction", choices=SCENARIO_NAMES)
    sweep.add_argument("--param", default="E")
    sweep.add_argument("--values", default="1e3,1e4,1e5,1e6")
    sweep.add_argument("--frames", type=int, default=None)
    sweep.add_argument("--particles", type=int, default=None)
    sweep.add_argument("--threads", type=int, default=None)
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--out", default="sweep")
    sweep.set_defaults(fn=cmd_sweep)

    bench = sub.add_parser("bench", help="time soft simulation vs particle count")
    bench.add_argument("--particles", default="6000,12000,24000,48000")
    bench.add_argument("--threads", default="1")
    bench.add_argument("--frames", type=int, default=5)
    bench.add_argument("--out", default=None)
    bench.set_defaults(fn=cmd_bench)

    serve_p = sub.add_parser("serve", help="interactive streaming session")
    add_scene_source(serve_p)
    serve_p.add_argument("--bind", default="127.0.0.1:8765")
    serve_p.add_argument("--static", default=None,
                         help="directory of viewer files to serve over HTTP")
    serve_p.add_argument("--threads", type=int, default=None)
    serve_p.add_argument("--particles", type=int, default=None)
    serve_p.add_argument("--frame-rate", type=float, default=20.0)
    serve_p.add_argument("--v-max", type=float, default=0.5,
                         help="tool speed clamp, m/s")
    serve_p.set_defaults(fn=cmd_serve)

    bake = sub.add_parser("bake", help="bake a mesh into an SDF1 file")
    bake.add_argument("--mesh", required=True)
    bake.add_argument("--out", required=True)
    bake.add_argument("--resolution", type=int, default=256)
    bake.set_defaults(fn=cmd_bake)

    scene_p = sub.add_parser("scene", help="export a builtin scenario as JSON")
    scene_p.add_argument("--scenario", required=True, choices=SCENARIO_NAMES)
    scene_p.add_argument("--out", required=True)
    scene_p.set_defaults(fn=cmd_scene)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (SimError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
