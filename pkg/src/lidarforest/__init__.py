"""Engine-free LiDAR scanning of procedural forest scenes."""

from .error_model import DivergenceTable, ErrorOption
from .metrics import MetricsParams, RegionOfInterest, chamfer, infra_d, infra_nuc
from .motion import Pose, ScanPath, SwayConfig, pose_at
from .raycast import Ray, build_accelerator, intersect, intersect_brute
from .scene import LeafWood, SceneSpec, Semantic, TreeSpec, generate_forest
from .sensor import SensorConfig, preset
from .simulation import simulate

__version__ = "0.1.0"

__all__ = [
    "DivergenceTable", "ErrorOption", "LeafWood", "MetricsParams", "Pose", "Ray",
    "RegionOfInterest", "ScanPath", "SceneSpec", "Semantic", "SensorConfig", "SwayConfig",
    "TreeSpec", "build_accelerator", "chamfer", "generate_forest", "infra_d", "infra_nuc",
    "intersect", "intersect_brute", "pose_at", "preset", "simulate",
]
