"""Beam-divergence error injection.

A :class:`DivergenceTable` is a step function from range to the footprint
half-widths ``(h_div, v_div)``.  Two ways of using it:

* coordinate offset: move the hit point by a uniform draw from the
  footprint ellipse, in the plane perpendicular to the beam;
* angle offset: tilt the beam by up to ``arctan(div / range)`` in azimuth
  and elevation before casting it again.

Scalar functions take a :class:`numpy.random.Generator`; the ``*_keyed``
variants draw from a :class:`~lidarforest.rng.KeyedStream` so that batches
are reproducible per ``(frame, column, beam)``.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np


class ErrorOption(Enum):
    NONE = "none"
    COORDINATE_OFFSET = "coordinate_offset"
    ANGLE_OFFSET = "angle_offset"


@dataclass(frozen=True)
class DivergenceTable:
    """Rows of ``(upper_distance, h_div, v_div)`` in metres."""

    segments: tuple

    def __post_init__(self):
        rows = tuple(tuple(float(v) for v in row) for row in self.segments)
        if not rows:
            raise ValueError("divergence table needs at least one segment")
        uppers = [r[0] for r in rows]
        if any(len(r) != 3 for r in rows):
            raise ValueError("divergence rows are (upper_distance, h_div, v_div)")
        if uppers[0] <= 0 or any(b <= a for a, b in zip(uppers, uppers[1:])):
            raise ValueError("segment upper distances must be positive and strictly increasing")
        if any(r[1] < 0 or r[2] < 0 for r in rows):
            raise ValueError("divergence values must be non-negative")
        object.__setattr__(self, "segments", rows)

    @property
    def max_distance(self):
        return self.segments[-1][0]

    @property
    def max_semi_axis(self):
        return max(max(h, v) for _, h, v in self.segments)

    def _arrays(self):
        seg = np.array(self.segments)
        return seg[:, 0], seg[:, 1], seg[:, 2]

    @classmethod
    def zeros(cls, max_distance):
        return cls(((float(max_distance), 0.0, 0.0),))

    @classmethod
    def vlp16(cls, max_distance=100.0):
        """Four-step approximation of a VLP-16 footprint.

        Half-widths are evaluated at each segment's far end from a
        12.7 x 9.5 mm exit aperture growing at 3.0 x 1.5 mrad full angle.
        """
        uppers = [10.0, 25.0, 50.0, max(100.0, float(max_distance))]
        rows = []
        for d in uppers:
            rows.append((d, 0.5 * (0.0127 + 0.0030 * d), 0.5 * (0.0095 + 0.0015 * d)))
        return cls(tuple(rows))


def divergence_at(table, distance):
    """``(h_div, v_div)`` of the first segment whose upper bound is >= distance.

    Accepts scalars or arrays.
    """
    uppers, h, v = table._arrays()
    d = np.asarray(distance, dtype=float)
    if np.any(~(d > 0)) or np.any(d > uppers[-1]):
        raise ValueError(f"distance outside divergence table coverage (0, {uppers[-1]}]")
    k = np.searchsorted(uppers, d, side="left")
    if d.ndim == 0:
        return float(h[k]), float(v[k])
    return h[k], v[k]


@dataclass(frozen=True)
class EllipseOffset:
    a: float
    b: float


def sample_ellipse_offset(rng, h_div, v_div):
    """Uniform point in the footprint ellipse by rejection from its box."""
    if h_div < 0 or v_div < 0:
        raise ValueError("divergence must be non-negative")
    if h_div == 0 or v_div == 0:
        return EllipseOffset(0.0, 0.0)
    while True:
        x, y = rng.uniform(-1.0, 1.0, size=2)
        if x * x + y * y <= 1.0:
            return EllipseOffset(float(x * h_div), float(y * v_div))


def sample_ellipse_offsets_keyed(stream, counters, h_div, v_div, max_rounds=64):
    """Vectorised :func:`sample_ellipse_offset` driven by counter keys.

    Round ``k`` of the rejection loop uses draws ``2k`` and ``2k+1`` of each
    key, so a ray's offset never depends on its neighbours in the batch.
    """
    h = np.asarray(h_div, dtype=float)
    v = np.asarray(v_div, dtype=float)
    shape = np.broadcast_shapes(h.shape, v.shape, *[np.shape(c) for c in counters])
    x = np.zeros(shape)
    y = np.zeros(shape)
    pending = np.broadcast_to((h > 0) & (v > 0), shape).copy()
    counters = [np.broadcast_to(c, shape) for c in counters]
    for k in range(max_rounds):
        if not pending.any():
            break
        keys = [c[pending] for c in counters]
        ux = stream.symmetric(keys, 2 * k)
        uy = stream.symmetric(keys, 2 * k + 1)
        inside = ux * ux + uy * uy <= 1.0
        where = np.flatnonzero(pending)[inside]
        x.flat[where] = ux[inside]
        y.flat[where] = uy[inside]
        pending.flat[where] = False
    # (1 - pi/4)^64 ~ 1e-43: any straggler keeps the zero offset
    return x * np.broadcast_to(h, shape), y * np.broadcast_to(v, shape)


def beam_frame(direction):
    """Unit axes ``(horizontal, vertical)`` perpendicular to each beam.

    ``horizontal = up x d`` (normalised), ``vertical = d x horizontal``; a
    vertical beam falls back to the world x axis for ``horizontal``.
    """
    d = np.atleast_2d(np.asarray(direction, dtype=float))
    hx, hy = -d[:, 1], d[:, 0]
    norm = np.hypot(hx, hy)
    degenerate = norm < 1e-12
    safe = np.where(degenerate, 1.0, norm)
    horiz = np.stack([np.where(degenerate, 1.0, hx / safe),
                      np.where(degenerate, 0.0, hy / safe),
                      np.zeros(len(d))], axis=1)
    vert = np.cross(d, horiz)
    if np.ndim(direction) == 1:
        return horiz[0], vert[0]
    return horiz, vert


def apply_coordinate_offset(point, offset, frame):
    """``point + a * horizontal + b * vertical``.

    ``offset`` is an :class:`EllipseOffset` or an ``(a, b)`` pair of arrays;
    ``frame`` is the ``(horizontal, vertical)`` pair from :func:`beam_frame`.
    """
    if isinstance(offset, EllipseOffset):
        a, b = offset.a, offset.b
    else:
        a, b = offset
    horiz, vert = frame
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    p = np.asarray(point, dtype=float)
    moved = p + a * horiz + b * vert
    # keep untouched points bit-identical (no -0.0 / rounding from adding zeros)
    return np.where((a == 0) & (b == 0), p, moved)


def angle_bounds(distance, h_div, v_div):
    """Largest azimuth/elevation deviation (radians) at ``distance``."""
    d = np.asarray(distance, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be positive")
    return np.arctan(np.asarray(h_div) / d), np.arctan(np.asarray(v_div) / d)


def perturb_angle(rng, distance, h_div, v_div):
    """Random ``(d_azimuth, d_elevation)`` in radians, uniform in the bound box."""
    th, tv = angle_bounds(distance, h_div, v_div)
    u, w = rng.uniform(-1.0, 1.0, size=2)
    return float(u * th), float(w * tv)


def perturb_angles_keyed(stream, counters, distance, h_div, v_div):
    th, tv = angle_bounds(distance, h_div, v_div)
    u = stream.symmetric(counters, 0)
    w = stream.symmetric(counters, 1)
    return u * th, w * tv
