"""Carrier trajectory: constant-speed walk along a spline plus gait sway."""

import math
from dataclasses import dataclass

import numpy as np

UP = np.array([0.0, 0.0, 1.0])


class EndOfPath(ValueError):
    """Raised when a pose is requested past the end of the scan path."""


@dataclass(frozen=True)
class SwayConfig:
    amp_vertical: float = 0.05
    freq_vertical: float = 2.0
    phase_vertical: float = 0.0
    amp_lateral: float = 0.04
    freq_lateral: float = 1.0
    phase_lateral: float = 0.0

    def __post_init__(self):
        if self.amp_vertical < 0 or self.amp_lateral < 0:
            raise ValueError("sway amplitudes must be non-negative")
        if self.freq_vertical < 0 or self.freq_lateral < 0:
            raise ValueError("sway frequencies must be non-negative")

    @classmethod
    def still(cls):
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    yaw: float


def sway(config, t):
    """Vertical and lateral displacement at time ``t``."""
    dz = config.amp_vertical * np.sin(2 * np.pi * config.freq_vertical * t + config.phase_vertical)
    dlat = config.amp_lateral * np.sin(2 * np.pi * config.freq_lateral * t + config.phase_lateral)
    return dz, dlat


class CatmullRom:
    """Centripetal Catmull-Rom curve through every control point.

    The open ends get phantom points reflected through the end points, so
    the first and last segments are well defined.
    """

    alpha = 0.5

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
            raise ValueError("need at least two 3-D control points")
        if np.any(np.linalg.norm(np.diff(pts, axis=0), axis=1) <= 0):
            raise ValueError("consecutive control points must be distinct")
        self.points = pts
        self._ext = np.vstack([2 * pts[0] - pts[1], pts, 2 * pts[-1] - pts[-2]])
        steps = np.linalg.norm(np.diff(self._ext, axis=0), axis=1) ** self.alpha
        self._knots = np.concatenate([[0.0], np.cumsum(steps)])

    @property
    def n_segments(self):
        return len(self.points) - 1

    def evaluate(self, segment, u):
        """Position and derivative (w.r.t. ``u``) on ``segment`` at ``u`` in [0, 1]."""
        p0, p1, p2, p3 = self._ext[segment:segment + 4]
        t0, t1, t2, t3 = self._knots[segment:segment + 4]
        t = t1 + u * (t2 - t1)

        def lerp(ta, tb, x, dx, y, dy):
            w = tb - ta
            val = ((tb - t) * x + (t - ta) * y) / w
            der = ((tb - t) * dx + (t - ta) * dy + (y - x)) / w
            return val, der

        zero = np.zeros(3)
        a1 = lerp(t0, t1, p0, zero, p1, zero)
        a2 = lerp(t1, t2, p1, zero, p2, zero)
        a3 = lerp(t2, t3, p2, zero, p3, zero)
        b1 = lerp(t0, t2, *a1, *a2)
        b2 = lerp(t1, t3, *a2, *a3)
        c, dc = lerp(t1, t2, *b1, *b2)
        if u == 0.0:
            c = p1.copy()
        elif u == 1.0:
            c = p2.copy()
        return c, dc * (t2 - t1)


class ArcLengthTable:
    """Map between arc length and spline parameter.

    Lengths are chord sums over a uniform ``u`` sampling.  The inverse
    ``s -> u`` is a cubic Hermite interpolant whose end slopes are the exact
    ``du/ds`` from the spline derivative, so traversal speed stays flat
    between samples.
    """

    def __init__(self, spline, samples_per_segment=64):
        if samples_per_segment < 8:
            raise ValueError("samples_per_segment must be at least 8")
        self.spline = spline
        self.samples = samples_per_segment
        us = np.linspace(0.0, 1.0, samples_per_segment + 1)
        seg, lo, hi, m_lo, m_hi, pts = [], [], [], [], [], [spline.points[0]]
        for k in range(spline.n_segments):
            ev = [spline.evaluate(k, u) for u in us]
            speed = [np.linalg.norm(d) for _, d in ev]
            for j in range(samples_per_segment):
                seg.append(k)
                lo.append(us[j])
                hi.append(us[j + 1])
                m_lo.append(1.0 / speed[j])
                m_hi.append(1.0 / speed[j + 1])
                pts.append(ev[j + 1][0])
        pts = np.array(pts)
        self._segment = np.array(seg)
        self._u_lo, self._u_hi = np.array(lo), np.array(hi)
        self._m_lo, self._m_hi = np.array(m_lo), np.array(m_hi)
        self._s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])

    @property
    def length(self):
        return float(self._s[-1])

    def locate(self, s):
        """``(segment, u)`` at arc length ``s``."""
        if s < 0 or s > self.length * (1 + 1e-12):
            raise EndOfPath(f"arc length {s:.6g} outside [0, {self.length:.6g}]")
        k = int(np.clip(np.searchsorted(self._s, s, side="right") - 1, 0, len(self._s) - 2))
        h = self._s[k + 1] - self._s[k]
        x = min(max((s - self._s[k]) / h, 0.0), 1.0)
        u0, u1 = self._u_lo[k], self._u_hi[k]
        if x == 0.0:
            return int(self._segment[k]), float(u0)
        if x == 1.0:
            return int(self._segment[k]), float(u1)
        x2, x3 = x * x, x * x * x
        u = ((2 * x3 - 3 * x2 + 1) * u0 + (x3 - 2 * x2 + x) * h * self._m_lo[k]
             + (-2 * x3 + 3 * x2) * u1 + (x3 - x2) * h * self._m_hi[k])
        return int(self._segment[k]), float(min(max(u, u0), u1))

    def point(self, s):
        return self.spline.evaluate(*self.locate(s))[0]


def arc_length_table(path, samples_per_segment=64):
    return ArcLengthTable(path.spline, samples_per_segment)


class ScanPath:
    def __init__(self, control_points, walk_speed, samples_per_segment=64):
        if not walk_speed > 0:
            raise ValueError("walk_speed must be positive")
        self.control_points = np.asarray(control_points, dtype=float)
        self.walk_speed = float(walk_speed)
        self.spline = CatmullRom(self.control_points)
        self.table = ArcLengthTable(self.spline, samples_per_segment)

    @property
    def length(self):
        return self.table.length

    @property
    def duration(self):
        return self.length / self.walk_speed


def pose_at(path, sway_config, t, mount_height=0.0):
    """Carrier pose at time ``t``: spline point, then sway in the path frame."""
    if t < 0:
        raise ValueError("t must be non-negative")
    s = path.walk_speed * t
    if s > path.length * (1 + 1e-12):
        raise EndOfPath(f"t={t:.6g}s is past the end of the path ({path.duration:.6g}s)")
    seg, u = path.table.locate(min(s, path.length))
    base, deriv = path.spline.evaluate(seg, u)
    tangent = deriv / np.linalg.norm(deriv)
    lateral = np.cross(UP, tangent)
    norm = np.linalg.norm(lateral)
    lateral = lateral / norm if norm > 1e-12 else np.array([0.0, 1.0, 0.0])
    dz, dlat = sway(sway_config, t)
    position = base + dz * UP + dlat * lateral + mount_height * UP
    return Pose(position, math.atan2(tangent[1], tangent[0]))
