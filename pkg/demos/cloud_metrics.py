"""
Density, uniformity and Chamfer distance
========================================

Compare clouds from two sensors over the same patch of forest.
"""

import numpy as np

from lidarforest.metrics import MetricsParams, RegionOfInterest, chamfer, infra_d, infra_nuc
from lidarforest.motion import ScanPath, SwayConfig
from lidarforest.scene import SceneSpec, generate_forest
from lidarforest.sensor import preset
from lidarforest.simulation import simulate

scene = generate_forest(SceneSpec(seed=9, extent=(30.0, 30.0), tree_count_range=(10, 10)))
path = ScanPath([(-4, 0, 0), (4, 0, 0)], 1.0)
region = RegionOfInterest(-5.0, -5.0, 10.0, 10.0)
params = MetricsParams(disks=50, ratio=0.01, seed=0)

clouds = {}
for name in ("Beams16", "Beams64"):
    pts = simulate(scene, preset(name, mount_height=1.8), path, SwayConfig(), 30, 0.2).points
    xyz = np.column_stack([pts["ax"], pts["ay"], pts["az"]])
    clouds[name] = xyz
    print(f"{name}: InfraD={infra_d(xyz, region):.1f} pts/m2  "
          f"InfraNUC={infra_nuc(xyz, region, params):.3f}")

print(f"Chamfer(Beams16, Beams64) = {chamfer(clouds['Beams16'], clouds['Beams64']):.4f} m")
