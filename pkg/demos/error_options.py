"""
Beam divergence errors
======================

The footprint grows with range.  Either move the hit point inside the
footprint ellipse, or tilt the beam and cast it again.
"""

import numpy as np

from lidarforest.error_model import (DivergenceTable, ErrorOption, divergence_at, perturb_angle,
                                     sample_ellipse_offset)
from lidarforest.motion import ScanPath, SwayConfig
from lidarforest.scene import SceneSpec, generate_forest
from lidarforest.sensor import preset
from lidarforest.simulation import simulate

table = DivergenceTable.vlp16()
for d in (5, 20, 40, 90):
    h, v = divergence_at(table, d)
    print(f"{d:3d} m: h={h * 1000:.1f} mm  v={v * 1000:.1f} mm")

rng = np.random.default_rng(0)
offsets = np.array([(o.a, o.b) for o in (sample_ellipse_offset(rng, 0.03, 0.02) for _ in range(5000))])
print("largest ellipse offset:", np.abs(offsets).max(axis=0))
angles = np.array([perturb_angle(rng, 10.0, 0.03, 0.02) for _ in range(5000)])
print("largest angle tilt (mrad):", 1000 * np.abs(angles).max(axis=0))

scene = generate_forest(SceneSpec(seed=5, extent=(30.0, 30.0), tree_count_range=(8, 8)))
path = ScanPath([(-3, 0, 0), (3, 0, 0)], 1.0)
clouds = {}
for option in ErrorOption:
    sensor = preset("Beams16", mount_height=1.8, error_option=option)
    clouds[option] = simulate(scene, sensor, path, SwayConfig(), 30, 0.2, seed=1).points
    print(f"{option.value:18s} {len(clouds[option])} points")

clean, moved = clouds[ErrorOption.NONE], clouds[ErrorOption.COORDINATE_OFFSET]
shift = np.sqrt(sum((clean[a] - moved[a]) ** 2 for a in ("ax", "ay", "az")))
print(f"coordinate offset: median shift {1000 * np.median(shift):.1f} mm, max {1000 * shift.max():.1f} mm")
