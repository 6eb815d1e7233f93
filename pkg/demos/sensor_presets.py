"""
Scanning with different beam counts
===================================

One scene, one pose, four presets: the cloud gets denser with more beams.
"""

import numpy as np

from lidarforest.motion import ScanPath, SwayConfig
from lidarforest.scene import SceneSpec, generate_forest
from lidarforest.sensor import SensorConfig, preset
from lidarforest.simulation import simulate

scene = generate_forest(SceneSpec(seed=3, extent=(30.0, 30.0), tree_count_range=(10, 10)))
path = ScanPath([(-4, 0, 0), (4, 0, 0)], walk_speed=1.0)

for name in ("Beams8", "Beams16", "Beams64", "Beams256"):
    sensor = preset(name, mount_height=1.8)
    result = simulate(scene, sensor, path, SwayConfig(), fps=30, duration=0.1)
    print(f"{name:9s} rays={result.rays:7d} hits={result.hits:7d}")

# the timing example: 8 columns per turn at 1200 RPM is 160 columns per second
timing = SensorConfig(vertical_angles=(-15.0,), azimuth_resolution=45.0, spin_rate=1200,
                      mount_height=1.8)
print("columns per second:", timing.columns_per_second)
result = simulate(scene, timing, ScanPath([(-5, 0, 0), (5, 0, 0)], 1.0), SwayConfig.still(),
                  fps=30, duration=1.0)
print("rays in one second:", result.rays_per_beam[0])

# relative coordinates sit in the sensor frame, absolute ones in the world
pts = result.points
r = np.sqrt(pts["x"] ** 2 + pts["y"] ** 2 + pts["z"] ** 2)
print(f"{len(pts)} returns, ranges {r.min():.2f} .. {r.max():.2f} m")
