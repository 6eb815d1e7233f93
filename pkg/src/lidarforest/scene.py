"""Procedural forest scenes built from labeled geometric proxies.

Terrain is a triangulated value-noise heightfield; each tree is a stack of
truncated cones for the trunk plus a cloud of disc leaves.  Optional stones
(small octahedra) and shrubs (disc clusters) can be scattered on top.
"""

import math
import warnings
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .rng import stream

BREAST_HEIGHT = 1.3


class LeafWood(IntEnum):
    NOT_APPLICABLE = 0
    WOOD = 1
    LEAF = 2


class Semantic(IntEnum):
    GROUND = 0
    TREE = 1
    STONE = 2
    SHRUB = 3


def _vec(v):
    out = tuple(float(c) for c in v)
    if len(out) != 3 or not all(math.isfinite(c) for c in out):
        raise ValueError(f"expected a finite 3-vector, got {v!r}")
    return out


@dataclass(frozen=True)
class Triangle:
    v0: tuple
    v1: tuple
    v2: tuple

    def __post_init__(self):
        for name in ("v0", "v1", "v2"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        e1 = np.subtract(self.v1, self.v0)
        e2 = np.subtract(self.v2, self.v0)
        if np.linalg.norm(np.cross(e1, e2)) <= 1e-12:
            raise ValueError("triangle vertices are collinear")


@dataclass(frozen=True)
class TruncatedCone:
    """Lateral surface of a frustum.

    ``axis`` runs from the base centre to the top centre, so its length is
    the frustum height.
    """

    base: tuple
    axis: tuple
    base_radius: float
    top_radius: float

    def __post_init__(self):
        object.__setattr__(self, "base", _vec(self.base))
        object.__setattr__(self, "axis", _vec(self.axis))
        if math.hypot(*self.axis) <= 0.0:
            raise ValueError("cone axis must have positive length")
        if not (self.base_radius > 0 and self.top_radius > 0):
            raise ValueError("cone radii must be positive")


@dataclass(frozen=True)
class Disc:
    center: tuple
    normal: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "normal", _vec(self.normal))
        if abs(math.hypot(*self.normal) - 1.0) > 1e-9:
            raise ValueError("disc normal must be unit length")
        if not self.radius > 0:
            raise ValueError("disc radius must be positive")


@dataclass(frozen=True)
class LabeledPrimitive:
    geometry: object
    leaf_wood: LeafWood
    semantic: Semantic
    instance: int

    def __post_init__(self):
        object.__setattr__(self, "leaf_wood", LeafWood(self.leaf_wood))
        object.__setattr__(self, "semantic", Semantic(self.semantic))
        if self.instance < 0:
            raise ValueError("instance ids are non-negative")
        if self.semantic == Semantic.TREE:
            if self.leaf_wood == LeafWood.NOT_APPLICABLE:
                raise ValueError("tree primitives must be labeled Wood or Leaf")
        elif self.leaf_wood != LeafWood.NOT_APPLICABLE:
            raise ValueError("only tree primitives carry a leaf/wood label")


@dataclass(frozen=True)
class TreeSpec:
    """Species parameters for a proxy tree (lengths in metres).

    ``has_foliage=False`` declares a bare species, the only case where
    ``leaf_count=0`` is accepted.
    """

    species_name: str
    trunk_height: float
    dbh: float
    taper: float
    canopy_radius: float
    canopy_base_height: float
    leaf_count: int
    leaf_radius: float
    has_foliage: bool = True

    def __post_init__(self):
        if not self.trunk_height > self.canopy_base_height >= 0:
            raise ValueError("need trunk_height > canopy_base_height >= 0")
        if not self.dbh > 0:
            raise ValueError("dbh must be positive")
        if not 0 <= self.taper < 1:
            raise ValueError("taper must lie in [0, 1)")
        if not self.canopy_radius > 0:
            raise ValueError("canopy_radius must be positive")
        if self.leaf_count < 0 or int(self.leaf_count) != self.leaf_count:
            raise ValueError("leaf_count must be a non-negative integer")
        if self.leaf_count == 0 and self.has_foliage:
            raise ValueError("leaf_count=0 requires has_foliage=False")
        if self.leaf_count > 0 and not self.leaf_radius > 0:
            raise ValueError("leaf_radius must be positive")
        if self.ground_radius() <= 0:
            raise ValueError("taper too strong: trunk radius vanishes below breast height")

    def ground_radius(self):
        """Trunk radius at z=0, extrapolated from DBH along the linear taper."""
        slope = (1.0 - self.taper) / self.trunk_height
        return 0.5 * self.dbh / (1.0 - slope * BREAST_HEIGHT)

    def radius_at(self, z):
        r0 = self.ground_radius()
        return r0 * (1.0 - (1.0 - self.taper) * z / self.trunk_height)

    def canopy_centroid_height(self):
        return self.canopy_base_height + self.canopy_radius


SPECIES = {
    "pine": TreeSpec("pine", trunk_height=14.0, dbh=0.35, taper=0.3, canopy_radius=2.2,
                     canopy_base_height=8.0, leaf_count=220, leaf_radius=0.12),
    "birch": TreeSpec("birch", trunk_height=10.0, dbh=0.22, taper=0.4, canopy_radius=2.0,
                      canopy_base_height=4.5, leaf_count=260, leaf_radius=0.08),
    "oak": TreeSpec("oak", trunk_height=7.0, dbh=0.6, taper=0.5, canopy_radius=3.5,
                    canopy_base_height=3.0, leaf_count=320, leaf_radius=0.15),
    "snag": TreeSpec("snag", trunk_height=6.0, dbh=0.3, taper=0.6, canopy_radius=0.5,
                     canopy_base_height=5.0, leaf_count=0, leaf_radius=0.0, has_foliage=False),
}


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    extent: tuple = (40.0, 40.0)
    tree_count_range: tuple = (10, 20)
    species_mix: tuple = ((SPECIES["pine"], 1.0), (SPECIES["birch"], 1.0))
    terrain_amplitude: float = 0.5
    terrain_cell: float = 2.0
    min_tree_spacing: float = 1.5
    terrain_feature_size: float = 10.0
    stone_count: int = 0
    shrub_count: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        w, d = self.extent
        if not (w > 0 and d > 0):
            raise ValueError("extent must be positive")
        lo, hi = self.tree_count_range
        if not 0 <= lo <= hi:
            raise ValueError("tree_count_range must satisfy 0 <= min <= max")
        if len(self.species_mix) == 0:
            raise ValueError("species_mix is empty")
        weights = [w for _, w in self.species_mix]
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ValueError("species weights must be >= 0 and not all zero")
        if self.terrain_amplitude < 0 or not self.terrain_cell > 0:
            raise ValueError("terrain_amplitude must be >= 0 and terrain_cell > 0")
        if self.min_tree_spacing < 0 or self.stone_count < 0 or self.shrub_count < 0:
            raise ValueError("spacing and scatter counts must be non-negative")


@dataclass(frozen=True)
class InstanceInfo:
    semantic: Semantic
    species: object
    root: tuple


@dataclass
class Scene:
    primitives: list
    packed: object
    accelerator: object
    bounds: tuple
    instance_table: dict
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_primitives(cls, primitives, instance_table=None, metadata=None):
        from .raycast import PrimitiveSet, build_accelerator

        packed = PrimitiveSet.from_list(primitives)
        accel = build_accelerator(packed) if len(packed) else None
        if len(packed):
            lo, hi = packed.bounding_boxes()
            bounds = (lo.min(axis=0), hi.max(axis=0))
        else:
            bounds = (np.zeros(3), np.zeros(3))
        table = dict(instance_table or {})
        table.setdefault(0, InstanceInfo(Semantic.GROUND, None, (0.0, 0.0, 0.0)))
        missing = set(np.unique(packed.instance).tolist()) - set(table)
        if missing:
            raise ValueError(f"instances {sorted(missing)} have no instance_table entry")
        return cls(list(primitives), packed, accel, bounds, table, dict(metadata or {}))

    @classmethod
    def empty(cls):
        return cls.from_primitives([])

    def __len__(self):
        return len(self.primitives)

    def tree_ids(self):
        return sorted(k for k, v in self.instance_table.items() if v.semantic == Semantic.TREE)


class Heightfield:
    """Triangulated terrain on a regular grid centred on the origin."""

    def __init__(self, xs, ys, z):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        self.z = np.asarray(z, dtype=float)

    @classmethod
    def generate(cls, seed, extent, amplitude, cell, feature_size=10.0):
        width, depth = extent
        if not (width > 0 and depth > 0):
            raise ValueError("terrain extent must be positive")
        if not cell > 0:
            raise ValueError("terrain cell must be positive")
        if amplitude < 0:
            raise ValueError("terrain amplitude must be non-negative")
        nx = max(1, math.ceil(width / cell - 1e-9))
        ny = max(1, math.ceil(depth / cell - 1e-9))
        xs = np.minimum(-0.5 * width + cell * np.arange(nx + 1), 0.5 * width)
        ys = np.minimum(-0.5 * depth + cell * np.arange(ny + 1), 0.5 * depth)

        # value noise lattice, bilinearly sampled at the vertices
        feature = max(float(feature_size), cell)
        lx = math.ceil(width / feature) + 1
        ly = math.ceil(depth / feature) + 1
        lattice = stream(seed, "terrain").uniform(-1.0, 1.0, size=(lx + 1, ly + 1))
        gx = (xs + 0.5 * width) / feature
        gy = (ys + 0.5 * depth) / feature
        ix = np.minimum(np.floor(gx).astype(int), lx - 1)
        iy = np.minimum(np.floor(gy).astype(int), ly - 1)
        fx = (gx - ix)[:, None]
        fy = (gy - iy)[None, :]
        c00 = lattice[ix][:, iy]
        c10 = lattice[ix + 1][:, iy]
        c01 = lattice[ix][:, iy + 1]
        c11 = lattice[ix + 1][:, iy + 1]
        noise = (c00 * (1 - fx) * (1 - fy) + c10 * fx * (1 - fy)
                 + c01 * (1 - fx) * fy + c11 * fx * fy)
        z = amplitude * np.clip(noise, -1.0, 1.0) + 0.0
        return cls(xs, ys, z)

    def height_at(self, x, y):
        """Exact height of the triangulated surface (clamped to the grid)."""
        xs, ys, z = self.xs, self.ys, self.z
        i = int(np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2))
        j = int(np.clip(np.searchsorted(ys, y, side="right") - 1, 0, len(ys) - 2))
        u = min(max((x - xs[i]) / (xs[i + 1] - xs[i]), 0.0), 1.0)
        v = min(max((y - ys[j]) / (ys[j + 1] - ys[j]), 0.0), 1.0)
        z00, z10, z01, z11 = z[i, j], z[i + 1, j], z[i, j + 1], z[i + 1, j + 1]
        if u >= v:
            return float(z00 + u * (z10 - z00) + v * (z11 - z10))
        return float(z00 + v * (z01 - z00) + u * (z11 - z01))

    def primitives(self):
        xs, ys, z = self.xs, self.ys, self.z
        out = []
        for i in range(len(xs) - 1):
            for j in range(len(ys) - 1):
                p00 = (xs[i], ys[j], z[i, j])
                p10 = (xs[i + 1], ys[j], z[i + 1, j])
                p01 = (xs[i], ys[j + 1], z[i, j + 1])
                p11 = (xs[i + 1], ys[j + 1], z[i + 1, j + 1])
                out.append(LabeledPrimitive(Triangle(p00, p10, p11),
                                            LeafWood.NOT_APPLICABLE, Semantic.GROUND, 0))
                out.append(LabeledPrimitive(Triangle(p00, p11, p01),
                                            LeafWood.NOT_APPLICABLE, Semantic.GROUND, 0))
        return out


def generate_terrain(seed, extent, amplitude, cell, feature_size=10.0):
    """Triangulated value-noise ground covering ``extent`` (centred on the origin)."""
    return Heightfield.generate(seed, extent, amplitude, cell, feature_size).primitives()


def _uniform_ball(g, n, radius):
    direction = g.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * np.cbrt(g.random(n))
    return direction * r[:, None]


def _unit_vectors(g, n):
    v = g.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def build_tree(spec, instance, root, seed):
    """Proxy geometry for one tree rooted at ``root``.

    The trunk is a stack of at least four frustums following a linear taper
    through ``dbh/2`` at breast height; leaves are discs whose centres are
    uniform in the canopy ball.
    """
    root = np.asarray(_vec(root))
    segments = max(4, math.ceil(spec.trunk_height / 2.0))
    heights = np.linspace(0.0, spec.trunk_height, segments + 1)
    min_radius = 1e-3
    out = []
    for z0, z1 in zip(heights[:-1], heights[1:]):
        cone = TruncatedCone(root + (0.0, 0.0, z0), (0.0, 0.0, z1 - z0),
                             max(spec.radius_at(z0), min_radius),
                             max(spec.radius_at(z1), min_radius))
        out.append(LabeledPrimitive(cone, LeafWood.WOOD, Semantic.TREE, instance))

    if spec.leaf_count:
        g = stream(seed, "leaves", instance)
        centroid = root + (0.0, 0.0, spec.canopy_centroid_height())
        centers = centroid + _uniform_ball(g, spec.leaf_count, spec.canopy_radius)
        normals = _unit_vectors(g, spec.leaf_count)
        for c, n in zip(centers, normals):
            out.append(LabeledPrimitive(Disc(c, n, spec.leaf_radius),
                                        LeafWood.LEAF, Semantic.TREE, instance))
    return out


def _build_stone(g, instance, root):
    size = g.uniform(0.2, 0.6)
    sx, sy, sz = size * g.uniform(0.7, 1.3, size=3)
    centre = np.asarray(root) + (0.0, 0.0, 0.3 * sz)
    verts = [centre + v for v in ((sx, 0, 0), (0, sy, 0), (-sx, 0, 0), (0, -sy, 0))]
    top, bottom = centre + (0, 0, sz), centre - (0, 0, sz)
    out = []
    for k in range(4):
        a, b = verts[k], verts[(k + 1) % 4]
        for apex in (top, bottom):
            out.append(LabeledPrimitive(Triangle(a, b, apex),
                                        LeafWood.NOT_APPLICABLE, Semantic.STONE, instance))
    return out


def _build_shrub(g, instance, root, count=40):
    radius = g.uniform(0.4, 0.9)
    centre = np.asarray(root) + (0.0, 0.0, radius)
    centers = centre + _uniform_ball(g, count, radius)
    normals = _unit_vectors(g, count)
    return [LabeledPrimitive(Disc(c, n, 0.1), LeafWood.NOT_APPLICABLE, Semantic.SHRUB, instance)
            for c, n in zip(centers, normals)]


def _place_trees(spec, count):
    width, depth = spec.extent
    placed = []
    truncated = False
    for i in range(count):
        g = stream(spec.seed, "placement", i)
        for _ in range(1000):
            x = g.uniform(-0.5 * width, 0.5 * width)
            y = g.uniform(-0.5 * depth, 0.5 * depth)
            if all(math.hypot(x - px, y - py) >= spec.min_tree_spacing for px, py in placed):
                placed.append((x, y))
                break
        else:
            truncated = True
    return placed, truncated


def generate_forest(spec):
    """Terrain plus randomly placed trees (ids ``1..K`` in placement order)."""
    if not spec.species_mix:
        raise ValueError("species_mix is empty")
    hf = Heightfield.generate(spec.seed, spec.extent, spec.terrain_amplitude,
                              spec.terrain_cell, spec.terrain_feature_size)
    primitives = hf.primitives()
    table = {0: InstanceInfo(Semantic.GROUND, None, (0.0, 0.0, 0.0))}

    lo, hi = spec.tree_count_range
    requested = int(stream(spec.seed, "tree_count").integers(lo, hi + 1))
    weights = np.array([w for _, w in spec.species_mix], dtype=float)
    choice = stream(spec.seed, "species").choice(len(weights), size=requested,
                                                  p=weights / weights.sum())
    locations, truncated = _place_trees(spec, requested)
    if truncated:
        warnings.warn(f"placed only {len(locations)} of {requested} trees "
                      f"at spacing {spec.min_tree_spacing} m")

    instance = 0
    for k, (x, y) in enumerate(locations):
        instance += 1
        tree = spec.species_mix[choice[k]][0]
        root = (x, y, hf.height_at(x, y))
        primitives.extend(build_tree(tree, instance, root, spec.seed))
        table[instance] = InstanceInfo(Semantic.TREE, tree, root)

    width, depth = spec.extent
    for kind, count, builder in ((Semantic.STONE, spec.stone_count, _build_stone),
                                 (Semantic.SHRUB, spec.shrub_count, _build_shrub)):
        for j in range(count):
            g = stream(spec.seed, kind.name.lower(), j)
            x = g.uniform(-0.5 * width, 0.5 * width)
            y = g.uniform(-0.5 * depth, 0.5 * depth)
            root = (x, y, hf.height_at(x, y))
            instance += 1
            primitives.extend(builder(g, instance, root))
            table[instance] = InstanceInfo(kind, None, root)

    metadata = {
        "requested_trees": requested,
        "placed_trees": len(locations),
        "placement_truncated": truncated,
    }
    return Scene.from_primitives(primitives, table, metadata)
