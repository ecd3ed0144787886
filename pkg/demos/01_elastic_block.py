"""A falling elastic block, start to finish.

Samples a soft cube, drops it onto the domain floor, and narrates what the
solver guarantees along the way: exact mass on the grid, momentum-conserving
transfers, and a surface mesh you can open in any OBJ viewer.
"""

import numpy as np

import softmpm as sm

grid = sm.Grid(resolution=(48, 48, 48), extent=(1.0, 1.0, 1.0))
material = sm.Material(young_modulus=8.0e3, poisson_ratio=0.3, density=1000.0)
spawn = sm.sample_box(center=(0.5, 0.55, 0.5), size=(0.22, 0.22, 0.22),
                      count=6000, seed=7, grid=grid)
state = sm.SimState.from_spawns(grid, [spawn], [material])
params = sm.SimParams()  # dt = 0.5 ms, 25 substeps per frame, gravity on

print(f"block: {state.particle_count} particles, "
      f"{state.mass.sum():.3f} kg over {spawn.rest_volume_per_particle * 6000:.4f} m^3")

sm.p2g(state, [material], params)
print(f"grid mass after scatter: {state.grid_m.sum():.6f} kg "
      f"(particles: {state.mass.sum():.6f} kg)")

for frame in range(40):
    report = sm.step(state, [material], params)
    if frame % 10 == 0:
        top = state.x[:, 1].max()
        speed = np.linalg.norm(state.v, axis=1).max()
        print(f"t={state.time:.3f}s  top={top:.3f}m  max|v|={speed:.2f} m/s  "
              f"soft={report.timings_ms['soft_simulation']:.1f} ms")

mesh = sm.extract_surface(state, iso=0.3 * material.density)
sm.export_obj(mesh, "block_final.obj")
print(f"wrote block_final.obj ({len(mesh.vertices)} vertices, "
      f"{len(mesh.indices)} triangles)")
