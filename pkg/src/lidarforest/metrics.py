"""Point-cloud distribution metrics: InfraD, InfraNUC and Chamfer distance."""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .rng import stream


@dataclass(frozen=True)
class RegionOfInterest:
    """Axis-aligned ground-plane rectangle ``[x0, x0+width) x [y0, y0+depth)``."""

    x0: float
    y0: float
    width: float
    depth: float

    def __post_init__(self):
        if not (self.width > 0 and self.depth > 0):
            raise ValueError("region width and depth must be positive")

    @property
    def area(self):
        return self.width * self.depth

    def contains(self, points):
        p = np.asarray(points, dtype=float)
        x, y = p[:, 0], p[:, 1]
        return ((x >= self.x0) & (x < self.x0 + self.width)
                & (y >= self.y0) & (y < self.y0 + self.depth))


@dataclass(frozen=True)
class MetricsParams:
    disks: int = 100
    ratio: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.disks < 1:
            raise ValueError("need at least one disk")
        if not 0 < self.ratio < 1:
            raise ValueError("disk area ratio must lie in (0, 1)")
        if self.disks * self.ratio > 1:
            warnings.warn(f"disks * ratio = {self.disks * self.ratio:g} > 1: disks overlap heavily")


def _xy(points):
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] < 2:
        raise ValueError("points must be an (N, 2) or (N, 3) array")
    return p


def infra_d(points, region):
    """Points per square metre inside ``region`` (N / S)."""
    p = _xy(points)
    return int(np.count_nonzero(region.contains(p))) / region.area


def disk_centers(region, params):
    """Uniform disk centres, kept at least one radius from the region edge."""
    r = math.sqrt(params.ratio * region.area / math.pi)
    if 2 * r > min(region.width, region.depth):
        raise ValueError("disks of this area ratio do not fit inside the region")
    g = stream(params.seed, "infra_nuc")
    cx = g.uniform(region.x0 + r, region.x0 + region.width - r, params.disks)
    cy = g.uniform(region.y0 + r, region.y0 + region.depth - r, params.disks)
    return np.column_stack([cx, cy]), r


def nuc_from_counts(counts, n_total, ratio):
    """Population standard deviation of ``n_i / (N * p)``."""
    n = np.asarray(counts, dtype=float)
    if n_total <= 0:
        raise ValueError("need at least one point in the region")
    share = n / (n_total * ratio)
    return float(np.sqrt(np.mean((share - share.mean()) ** 2)))


def infra_nuc(points, region, params):
    p = _xy(points)
    inside = p[region.contains(p)][:, :2]
    if len(inside) == 0:
        raise ValueError("no points inside the region")
    centers, r = disk_centers(region, params)
    tree = cKDTree(inside)
    counts = [len(hits) for hits in tree.query_ball_point(centers, r)]
    return nuc_from_counts(counts, len(inside), params.ratio)


def _nearest_brute(src, dst, chunk=1024):
    out = np.empty(len(src))
    for s in range(0, len(src), chunk):
        d = src[s:s + chunk, None, :] - dst[None, :, :]
        out[s:s + chunk] = np.sqrt((d * d).sum(axis=-1)).min(axis=1)
    return out


def nearest_distances(src, dst, method="kdtree"):
    if method == "kdtree":
        return cKDTree(dst).query(src, k=1)[0]
    if method == "brute":
        return _nearest_brute(src, dst)
    raise ValueError(f"unknown nearest-neighbour method {method!r}")


def chamfer(P, Q, squared=False, method="kdtree"):
    """Mean nearest-neighbour distance from P to Q plus from Q to P."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if len(P) == 0 or len(Q) == 0:
        raise ValueError("chamfer distance needs two non-empty point sets")
    pq = nearest_distances(P, Q, method)
    qp = nearest_distances(Q, P, method)
    if squared:
        pq, qp = pq**2, qp**2
    return float(pq.mean() + qp.mean())
