"""Spinning multi-beam LiDAR model.

A scan is organised in azimuth columns: every column fires all beams at
once.  :class:`FrameSchedule` decides how many columns fall into each
rendered frame so that the long-run column rate matches
``spin_rate / 60 * 360 / azimuth_resolution`` exactly, whatever the frame
rate.
"""

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .error_model import (DivergenceTable, ErrorOption, apply_coordinate_offset, beam_frame,
                          divergence_at, perturb_angles_keyed, sample_ellipse_offsets_keyed)
from .io import POINT_DTYPE
from .raycast import cast_rays

PRESET_BEAMS = {"Beams8": 8, "Beams16": 16, "Beams64": 64, "Beams256": 256}
VERTICAL_FOV = (-15.0, 15.0)


@dataclass(frozen=True)
class SensorConfig:
    vertical_angles: tuple
    azimuth_resolution: float = 0.2
    spin_rate: float = 1200.0
    horizontal_fov: float = 360.0
    max_range: float = 100.0
    divergence: DivergenceTable = field(default_factory=DivergenceTable.vlp16)
    error_option: ErrorOption = ErrorOption.NONE
    mount_height: float = 0.0

    def __post_init__(self):
        angles = tuple(float(a) for a in self.vertical_angles)
        object.__setattr__(self, "vertical_angles", angles)
        object.__setattr__(self, "error_option", ErrorOption(self.error_option))
        if not angles:
            raise ValueError("vertical_angles must not be empty")
        if any(b <= a for a, b in zip(angles, angles[1:])):
            raise ValueError("vertical_angles must be strictly increasing")
        if not self.azimuth_resolution > 0:
            raise ValueError("azimuth_resolution must be positive")
        if not self.spin_rate > 0:
            raise ValueError("spin_rate must be positive")
        if not 0 < self.horizontal_fov <= 360:
            raise ValueError("horizontal_fov must lie in (0, 360]")
        if not self.max_range > 0:
            raise ValueError("max_range must be positive")
        if self.divergence.max_distance < self.max_range:
            raise ValueError("divergence table must cover the full max_range")

    @property
    def beam_count(self):
        return len(self.vertical_angles)

    @property
    def columns_per_second(self):
        """Exact column rate as a :class:`~fractions.Fraction`."""
        rpm = _exact(self.spin_rate)
        res = _exact(self.azimuth_resolution)
        return rpm / 60 * (Fraction(360) / res)


def _exact(value):
    return Fraction(value).limit_denominator(10**9)


def evenly_spaced(count, lo=VERTICAL_FOV[0], hi=VERTICAL_FOV[1]):
    if count == 1:
        return (0.5 * (lo + hi),)
    return tuple(float(a) for a in np.linspace(lo, hi, count))


def preset(name, **overrides):
    """Sensor config for one of the four beam-count presets.

    All presets share the VLP-16 envelope: 30 deg vertical FOV, 100 m range,
    1200 RPM, 0.2 deg azimuth resolution.
    """
    if name not in PRESET_BEAMS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESET_BEAMS)}")
    config = SensorConfig(vertical_angles=evenly_spaced(PRESET_BEAMS[name]))
    return replace(config, **overrides) if overrides else config


def beam_directions(yaw, azimuth, elevation):
    """Unit beam directions (broadcasting); ``yaw`` in radians, angles in degrees."""
    heading = yaw + np.radians(azimuth)
    el = np.radians(elevation)
    c = np.cos(el)
    return np.stack(np.broadcast_arrays(c * np.cos(heading), c * np.sin(heading), np.sin(el)),
                    axis=-1)


def beam_direction(pose, azimuth, elevation):
    """World direction of a beam fired at ``azimuth``/``elevation`` (degrees)."""
    return beam_directions(pose.yaw, azimuth, elevation)


@dataclass(frozen=True)
class FrameSchedule:
    fps: Fraction
    columns_per_second: Fraction
    azimuth_resolution: float
    horizontal_fov: float = 360.0
    accumulator: Fraction = Fraction(0)
    column_cursor: int = 0
    columns_this_frame: int = 0

    @classmethod
    def for_sensor(cls, config, fps):
        if not fps > 0:
            raise ValueError("fps must be positive")
        return cls(_exact(fps), config.columns_per_second, config.azimuth_resolution,
                   config.horizontal_fov)

    @property
    def columns_per_frame(self):
        return self.columns_per_second / self.fps

    @property
    def azimuth_cursor(self):
        return column_azimuths(self, [self.column_cursor])[0]


def column_azimuths(schedule, columns):
    """Azimuth in degrees of absolute column indices."""
    fov = schedule.horizontal_fov
    start = 0.0 if fov >= 360 else -0.5 * fov
    cols = np.asarray(columns, dtype=np.int64)
    per_sweep = max(1, int(math.floor(fov / schedule.azimuth_resolution + 1e-9)))
    if fov >= 360:
        return np.mod(cols * schedule.azimuth_resolution, fov) + start
    # sector scanners restart the sweep at the sector edge
    return (cols % per_sweep) * schedule.azimuth_resolution + start


def advance_schedule(schedule):
    """Columns fired during the next frame.

    Returns ``(azimuths, schedule)``; the new schedule's ``column_cursor``
    points past the emitted columns and ``columns_this_frame`` counts them.
    """
    acc = schedule.accumulator + schedule.columns_per_frame
    n = math.floor(acc)
    cols = np.arange(schedule.column_cursor, schedule.column_cursor + n)
    new = replace(schedule, accumulator=acc - n, column_cursor=schedule.column_cursor + n,
                  columns_this_frame=n)
    return column_azimuths(schedule, cols), new


def _rotate_z(v, angle):
    c, s = math.cos(angle), math.sin(angle)
    x, y = v[..., 0], v[..., 1]
    return np.stack([c * x - s * y, s * x + c * y, v[..., 2]], axis=-1)


def sensor_origin(pose, config):
    return np.asarray(pose.position, dtype=float) + np.array([0.0, 0.0, config.mount_height])


@dataclass
class FrameResult:
    records: np.ndarray
    rays: int
    recasts: int


def scan_frame(scene, pose, config, columns, azimuths, frame_index, t=0.0, stream=None):
    """Fire every beam for each scheduled column and collect the returns.

    ``columns`` are absolute column indices (they key the error draws through
    ``stream``, a :class:`~lidarforest.rng.KeyedStream`); ``azimuths`` their
    angles in degrees.  Misses produce no record.
    """
    columns = np.asarray(columns, dtype=np.int64)
    azimuths = np.asarray(azimuths, dtype=float)
    elev = np.asarray(config.vertical_angles)
    n_col, n_beam = len(columns), len(elev)
    origin = sensor_origin(pose, config)
    rays = n_col * n_beam
    if rays == 0:
        return FrameResult(np.zeros(0, dtype=POINT_DTYPE), 0, 0)

    az = np.repeat(azimuths, n_beam)
    el = np.tile(elev, n_col)
    col = np.repeat(columns, n_beam)
    beam = np.tile(np.arange(n_beam), n_col)
    dirs = beam_directions(pose.yaw, az, el)
    dist, prim = cast_rays(scene.accelerator, origin, dirs, config.max_range)
    recasts = 0

    option = config.error_option
    if option is not ErrorOption.NONE and stream is None:
        raise ValueError("an error option needs a keyed random stream")

    if option is ErrorOption.ANGLE_OFFSET:
        hit = np.flatnonzero(prim >= 0)
        h_div, v_div = divergence_at(config.divergence, dist[hit])
        keys = (np.full(hit.size, frame_index), col[hit], beam[hit])
        d_az, d_el = perturb_angles_keyed(stream, keys, dist[hit], h_div, v_div)
        new_dirs = beam_directions(pose.yaw, az[hit] + np.degrees(d_az), el[hit] + np.degrees(d_el))
        new_dist, new_prim = cast_rays(scene.accelerator, origin, new_dirs, config.max_range)
        recasts = hit.size
        dirs[hit] = new_dirs
        dist[hit] = new_dist
        prim[hit] = new_prim

    hit = np.flatnonzero(prim >= 0)
    points = origin + dist[hit, None] * dirs[hit]

    if option is ErrorOption.COORDINATE_OFFSET and hit.size:
        h_div, v_div = divergence_at(config.divergence, dist[hit])
        keys = (np.full(hit.size, frame_index), col[hit], beam[hit])
        a, b = sample_ellipse_offsets_keyed(stream, keys, h_div, v_div)
        points = apply_coordinate_offset(points, (a, b), beam_frame(dirs[hit]))

    out = np.zeros(hit.size, dtype=POINT_DTYPE)
    out["frame"] = frame_index
    out["t"] = t
    out["beam"] = beam[hit]
    out["azimuth"] = az[hit]
    rel = _rotate_z(points - origin, -pose.yaw)
    out["x"], out["y"], out["z"] = rel[:, 0], rel[:, 1], rel[:, 2]
    out["ax"], out["ay"], out["az"] = points[:, 0], points[:, 1], points[:, 2]
    p = prim[hit]
    out["leaf_wood"] = scene.packed.leaf_wood[p]
    out["semantic"] = scene.packed.semantic[p]
    out["instance"] = scene.packed.instance[p]
    return FrameResult(out, rays, recasts)
