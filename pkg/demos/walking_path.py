"""
Walking a scan path
===================

Constant-speed travel along a centripetal Catmull-Rom spline, with the
carrier bobbing up and down and swaying side to side.
"""

import numpy as np

from lidarforest.motion import ScanPath, SwayConfig, pose_at

path = ScanPath([(0, 0, 0), (5, 3, 0), (10, -1, 0), (15, 2, 0)], walk_speed=1.2)
print(f"path length {path.length:.3f} m, {path.duration:.2f} s at 1.2 m/s")

still = SwayConfig.still()
gait = SwayConfig(amp_vertical=0.05, freq_vertical=2.0, amp_lateral=0.04, freq_lateral=1.0)

t = np.linspace(0, path.duration, 400)
base = np.array([pose_at(path, still, ti).position for ti in t])
moving = np.array([pose_at(path, gait, ti).position for ti in t])

speed = np.linalg.norm(np.diff(base, axis=0), axis=1) / np.diff(t)
print(f"speed {speed.min():.4f} .. {speed.max():.4f} m/s")
print(f"vertical sway peak {np.abs(moving[:, 2] - base[:, 2]).max():.4f} m")
print(f"lateral sway peak {np.linalg.norm((moving - base)[:, :2], axis=1).max():.4f} m")

for ti in (0.0, path.duration / 2, path.duration):
    pose = pose_at(path, gait, ti, mount_height=1.8)
    print(f"t={ti:5.2f}s  position={np.round(pose.position, 3)}  yaw={np.degrees(pose.yaw):6.1f} deg")
