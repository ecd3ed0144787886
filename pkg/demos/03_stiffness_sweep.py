"""Stiffness controls deformation: the retraction task across Young's moduli.

Runs a scaled-down version of the builtin retraction scenario (gripper grabs
a slab edge and peels it upward) at four stiffness values and prints the
final deformation metrics. Softer tissue deforms dramatically; stiffer
tissue lifts almost rigidly. The full-scale version of this plot is
``softmpm sweep --scenario retraction``.
"""

import softmpm as sm

print(f"{'E (Pa)':>10}  {'mean|J-1|':>10}  {'lifted':>7}  {'max disp (m)':>12}")
for young in (1.0e3, 1.0e4, 1.0e5, 1.0e6):
    config = sm.builtin_scenario("retraction", young_modulus=young,
                                 particles=6000)
    instance = sm.build_scene(config)
    pose_fn = sm.make_pose_fn(instance)
    for _ in range(config.frame_count):
        sm.step(instance.state, instance.materials, config.params,
                instance.colliders, pose_fn)
    m = instance.metrics()
    print(f"{young:>10.0f}  {m.mean_abs_j_minus_1:>10.4f}  "
          f"{m.lifted_fraction:>7.3f}  {m.max_displacement:>12.3f}")
