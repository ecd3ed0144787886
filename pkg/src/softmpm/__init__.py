"""softmpm: interactive soft-body simulation via MLS-MPM.

Lagrangian particles carry mass, velocity, and deformation state; an Eulerian
grid mediates forces and collisions with posed rigid tools. Includes surface
extraction for rendering, a scenario library with metrics, a headless CLI,
and a WebSocket streaming server for live tool steering.
"""

from .collision import (Baked, Box, CollisionField, RigidCollider, box_distance,
                        collider_point_velocity, pack_colliders, resolve_velocity,
                        sample_distance, sdf_normal, update_collision_field,
                        world_to_ref)
from .core import (Grid, SimParams, SimState, StepReport, bspline_weights,
                   g2p_advect, grid_update, p2g, step, substep)
from .errors import (InvertedElementError, MeshError, NumericalFailure,
                     ParameterError, SceneError, SimError, SpawnError,
                     StencilError)
from .materials import (Material, energy_density, lame_from_young_poisson,
                        neo_hookean_stress)
from .sampling import ParticleSpawn, sample_box, sample_mesh_volume
from .scene import (BodySpec, ColliderSpec, GripperGroup, Keyframe,
                    MetricSample, SceneConfig, SceneInstance, build_scene,
                    compute_metrics, load_scene, make_pose_fn, pose_at,
                    save_scene)
from .scenarios import SCENARIO_NAMES, builtin_scenario
from .sdf import SdfGrid, bake_sdf, load_sdf, save_sdf
from .surfacing import (ScalarField, SurfaceMesh, compute_uvs, export_obj,
                        extract_surface, marching_cubes, splat_density)

__version__ = "0.1.0"

__all__ = [
    "Baked", "BodySpec", "Box", "ColliderSpec", "CollisionField", "Grid",
    "GripperGroup", "InvertedElementError", "Keyframe", "Material",
    "MeshError", "MetricSample", "NumericalFailure", "ParameterError",
    "ParticleSpawn", "RigidCollider", "SCENARIO_NAMES", "ScalarField",
    "SceneConfig", "SceneError", "SceneInstance", "SdfGrid", "SimError",
    "SimParams", "SimState", "SpawnError", "StencilError", "StepReport",
    "SurfaceMesh", "bake_sdf", "box_distance", "bspline_weights",
    "build_scene", "builtin_scenario", "collider_point_velocity",
    "compute_metrics", "compute_uvs", "energy_density", "export_obj",
    "extract_surface", "g2p_advect", "grid_update", "lame_from_young_poisson",
    "load_scene", "load_sdf", "make_pose_fn", "marching_cubes",
    "neo_hookean_stress", "p2g", "pack_colliders", "pose_at",
    "resolve_velocity", "sample_box", "sample_distance", "sample_mesh_volume",
    "save_scene", "save_sdf", "sdf_normal", "splat_density", "step", "substep",
    "update_collision_field", "world_to_ref",
]
