"""Nearest-hit ray queries.

Primitives are packed into flat arrays (:class:`PrimitiveSet`) and indexed by
a median-split BVH whose traversal is compiled with numba.  An exhaustive
numpy implementation, :func:`intersect_brute`, is kept as the reference the
BVH is tested against.

Tie rule shared by both paths: among hits whose distance is within
``TIE_EPS`` of the minimum, the lowest primitive index wins.
"""

from dataclasses import dataclass

import numba
import numpy as np

from .scene import Disc, LabeledPrimitive, LeafWood, Semantic, Triangle, TruncatedCone

TRIANGLE, CONE, DISC = 0, 1, 2
T_MIN = 1e-9
TIE_EPS = 1e-9
MAX_LEAF_SIZE = 4
_BOX_PAD = 1e-7
_STACK = 128


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_max: float

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class Hit:
    point: np.ndarray
    distance: float
    primitive_index: int
    leaf_wood: LeafWood
    semantic: Semantic
    instance: int


class PrimitiveSet:
    """Structure-of-arrays view of a primitive list.

    ``params`` rows hold, by kind:
    triangle ``v0 v1 v2``; cone ``base axis r0 r1 -``; disc ``center normal r - -``.
    """

    def __init__(self, kind, params, leaf_wood, semantic, instance):
        self.kind = np.ascontiguousarray(kind, dtype=np.int8)
        self.params = np.ascontiguousarray(params, dtype=np.float64).reshape(-1, 9)
        self.leaf_wood = np.ascontiguousarray(leaf_wood, dtype=np.uint8)
        self.semantic = np.ascontiguousarray(semantic, dtype=np.uint8)
        self.instance = np.ascontiguousarray(instance, dtype=np.int64)
        self._columns = None

    def columns(self, kind):
        """``(indices, column arrays)`` for one primitive kind, cached."""
        if self._columns is None:
            self._columns = {}
            for k in (TRIANGLE, CONE, DISC):
                sel = np.flatnonzero(self.kind == k)
                self._columns[k] = (sel, tuple(np.ascontiguousarray(c) for c in self.params[sel].T))
        return self._columns[kind]

    @classmethod
    def from_list(cls, primitives):
        n = len(primitives)
        kind = np.empty(n, dtype=np.int8)
        params = np.zeros((n, 9))
        labels = np.empty((n, 3), dtype=np.int64)
        for i, p in enumerate(primitives):
            g = p.geometry
            if isinstance(g, Triangle):
                kind[i] = TRIANGLE
                params[i] = g.v0 + g.v1 + g.v2
            elif isinstance(g, TruncatedCone):
                kind[i] = CONE
                params[i, :8] = g.base + g.axis + (g.base_radius, g.top_radius)
            elif isinstance(g, Disc):
                kind[i] = DISC
                params[i, :7] = g.center + g.normal + (g.radius,)
            else:
                raise TypeError(f"unsupported geometry {type(g).__name__}")
            labels[i] = (p.leaf_wood, p.semantic, p.instance)
        return cls(kind, params, labels[:, 0], labels[:, 1], labels[:, 2])

    def to_list(self):
        out = []
        for k, p, lw, sem, inst in zip(self.kind, self.params, self.leaf_wood,
                                       self.semantic, self.instance):
            if k == TRIANGLE:
                g = Triangle(p[0:3], p[3:6], p[6:9])
            elif k == CONE:
                g = TruncatedCone(p[0:3], p[3:6], p[6], p[7])
            else:
                g = Disc(p[0:3], p[3:6], p[6])
            out.append(LabeledPrimitive(g, int(lw), int(sem), int(inst)))
        return out

    def __len__(self):
        return len(self.kind)

    def bounding_boxes(self):
        """Exact per-primitive axis-aligned boxes as ``(lo, hi)`` arrays."""
        n = len(self)
        lo = np.empty((n, 3))
        hi = np.empty((n, 3))
        p = self.params
        tri = self.kind == TRIANGLE
        if tri.any():
            v = p[tri].reshape(-1, 3, 3)
            lo[tri] = v.min(axis=1)
            hi[tri] = v.max(axis=1)
        cone = self.kind == CONE
        if cone.any():
            base, axis = p[cone, 0:3], p[cone, 3:6]
            unit = axis / np.linalg.norm(axis, axis=1, keepdims=True)
            spread = np.sqrt(np.clip(1.0 - unit**2, 0.0, 1.0))
            e0 = spread * p[cone, 6:7]
            e1 = spread * p[cone, 7:8]
            top = base + axis
            lo[cone] = np.minimum(base - e0, top - e1)
            hi[cone] = np.maximum(base + e0, top + e1)
        disc = self.kind == DISC
        if disc.any():
            c, nrm, r = p[disc, 0:3], p[disc, 3:6], p[disc, 6:7]
            e = r * np.sqrt(np.clip(1.0 - nrm**2, 0.0, 1.0))
            lo[disc] = c - e
            hi[disc] = c + e
        return lo, hi


@dataclass(frozen=True)
class BVH:
    node_lo: np.ndarray
    node_hi: np.ndarray
    node_left: np.ndarray   # child index, or -1 for a leaf
    node_right: np.ndarray
    node_start: np.ndarray  # leaf range into ``order``
    node_count: np.ndarray
    order: np.ndarray
    kind: np.ndarray
    params: np.ndarray

    @property
    def depth(self):
        depth = np.zeros(len(self.node_left), dtype=int)
        for i in range(len(self.node_left)):
            if self.node_left[i] >= 0:
                depth[self.node_left[i]] = depth[self.node_right[i]] = depth[i] + 1
        return int(depth.max()) + 1


def build_accelerator(primitives, max_leaf_size=MAX_LEAF_SIZE):
    """Median-split BVH over primitive bounding boxes."""
    prims = primitives if isinstance(primitives, PrimitiveSet) else PrimitiveSet.from_list(primitives)
    n = len(prims)
    if n == 0:
        raise ValueError("cannot build an accelerator over zero primitives")
    lo, hi = prims.bounding_boxes()
    pad = _BOX_PAD * (1.0 + np.abs(np.concatenate([lo, hi])).max())
    lo, hi = lo - pad, hi + pad
    centroid = 0.5 * (lo + hi)
    order = np.arange(n, dtype=np.int64)

    nodes_lo, nodes_hi, left, right, start, count = [], [], [], [], [], []

    def new_node(s, e):
        idx = order[s:e]
        nodes_lo.append(lo[idx].min(axis=0))
        nodes_hi.append(hi[idx].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(s)
        count.append(e - s)
        return len(left) - 1

    stack = [(new_node(0, n), 0, n)]
    while stack:
        node, s, e = stack.pop()
        if e - s <= max_leaf_size:
            continue
        idx = order[s:e]
        c = centroid[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        mid = (e - s) // 2
        # stable ordering makes the build reproducible for equal centroids
        part = np.argsort(c[:, axis], kind="stable")
        order[s:e] = idx[part]
        l_node = new_node(s, s + mid)
        r_node = new_node(s + mid, e)
        left[node], right[node] = l_node, r_node
        count[node] = 0
        stack.append((r_node, s + mid, e))
        stack.append((l_node, s, s + mid))

    return BVH(np.array(nodes_lo), np.array(nodes_hi),
               np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
               np.array(start, dtype=np.int64), np.array(count, dtype=np.int64),
               order, prims.kind, prims.params)


# ---------------------------------------------------------------- kernels

_jit = numba.njit(cache=True, nogil=True, error_model="numpy")


@_jit
def _hit_triangle(p, ox, oy, oz, dx, dy, dz):
    e1x, e1y, e1z = p[3] - p[0], p[4] - p[1], p[5] - p[2]
    e2x, e2y, e2z = p[6] - p[0], p[7] - p[1], p[8] - p[2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < 1e-15:
        return np.inf
    inv = 1.0 / det
    tx, ty, tz = ox - p[0], oy - p[1], oz - p[2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return np.inf
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return np.inf
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t <= T_MIN:
        return np.inf
    return t


@_jit
def _hit_cone(p, ox, oy, oz, dx, dy, dz):
    h = np.sqrt(p[3] * p[3] + p[4] * p[4] + p[5] * p[5])
    ax, ay, az = p[3] / h, p[4] / h, p[5] / h
    wx, wy, wz = ox - p[0], oy - p[1], oz - p[2]
    zo = wx * ax + wy * ay + wz * az
    zd = dx * ax + dy * ay + dz * az
    wpx, wpy, wpz = wx - zo * ax, wy - zo * ay, wz - zo * az
    dpx, dpy, dpz = dx - zd * ax, dy - zd * ay, dz - zd * az
    k = (p[7] - p[6]) / h
    r0 = p[6] + k * zo
    kk = k * zd
    a = dpx * dpx + dpy * dpy + dpz * dpz - kk * kk
    b = wpx * dpx + wpy * dpy + wpz * dpz - r0 * kk
    c = wpx * wpx + wpy * wpy + wpz * wpz - r0 * r0
    if abs(a) < 1e-14:
        if abs(b) < 1e-300:
            return np.inf
        t = -c / (2.0 * b)
        z = zo + t * zd
        if t > T_MIN and z >= 0.0 and z <= h:
            return t
        return np.inf
    disc = b * b - a * c
    if disc < 0.0:
        return np.inf
    sq = np.sqrt(disc)
    t1 = (-b - sq) / a
    t2 = (-b + sq) / a
    if t1 > t2:
        t1, t2 = t2, t1
    z = zo + t1 * zd
    if t1 > T_MIN and z >= 0.0 and z <= h:
        return t1
    z = zo + t2 * zd
    if t2 > T_MIN and z >= 0.0 and z <= h:
        return t2
    return np.inf


@_jit
def _hit_disc(p, ox, oy, oz, dx, dy, dz):
    denom = dx * p[3] + dy * p[4] + dz * p[5]
    if abs(denom) < 1e-15:
        return np.inf
    t = ((p[0] - ox) * p[3] + (p[1] - oy) * p[4] + (p[2] - oz) * p[5]) / denom
    if t <= T_MIN:
        return np.inf
    qx = ox + t * dx - p[0]
    qy = oy + t * dy - p[1]
    qz = oz + t * dz - p[2]
    if qx * qx + qy * qy + qz * qz > p[6] * p[6]:
        return np.inf
    return t


@_jit
def _hit_primitive(kind, p, ox, oy, oz, dx, dy, dz):
    if kind == 0:
        return _hit_triangle(p, ox, oy, oz, dx, dy, dz)
    if kind == 1:
        return _hit_cone(p, ox, oy, oz, dx, dy, dz)
    return _hit_disc(p, ox, oy, oz, dx, dy, dz)


@_jit
def _box_entry(lo, hi, ox, oy, oz, dx, dy, dz, limit):
    """Entry distance of the ray into the box, or inf when it misses."""
    tnear = -np.inf
    tfar = np.inf
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    for k in range(3):
        if d[k] == 0.0:
            if o[k] < lo[k] or o[k] > hi[k]:
                return np.inf
        else:
            inv = 1.0 / d[k]
            t0 = (lo[k] - o[k]) * inv
            t1 = (hi[k] - o[k]) * inv
            if t0 > t1:
                t0, t1 = t1, t0
            if t0 > tnear:
                tnear = t0
            if t1 < tfar:
                tfar = t1
    slack = 1e-9 * (1.0 + abs(tfar))
    if tnear > tfar + slack or tfar < 0.0 or tnear > limit + slack:
        return np.inf
    return tnear


@_jit
def _traverse(node_lo, node_hi, node_left, node_right, node_start, node_count,
              order, kind, params, ox, oy, oz, dx, dy, dz, t_max, t_best, tie_pass):
    """One BVH pass.

    With ``tie_pass`` false returns the minimum hit distance (<= t_max).
    With ``tie_pass`` true returns the lowest primitive index whose hit lies
    within TIE_EPS of ``t_best``.
    """
    stack = np.empty(_STACK, dtype=np.int64)
    top = 0
    stack[top] = 0
    top += 1
    best_t = t_max
    found = False
    best_idx = -1
    limit = t_max
    if tie_pass:
        limit = min(t_max, t_best + TIE_EPS)
    while top > 0:
        top -= 1
        node = stack[top]
        if _box_entry(node_lo[node], node_hi[node], ox, oy, oz, dx, dy, dz, limit) == np.inf:
            continue
        if node_left[node] < 0:
            s = node_start[node]
            for j in range(s, s + node_count[node]):
                prim = order[j]
                t = _hit_primitive(kind[prim], params[prim], ox, oy, oz, dx, dy, dz)
                if t > t_max:
                    continue
                if tie_pass:
                    if t - t_best < TIE_EPS and (best_idx < 0 or prim < best_idx):
                        best_idx = prim
                elif t < best_t or (t == best_t and not found):
                    best_t = t
                    found = True
                    limit = best_t + TIE_EPS
        else:
            stack[top] = node_right[node]
            top += 1
            stack[top] = node_left[node]
            top += 1
    if tie_pass:
        return float(best_idx)
    if not found:
        return np.inf
    return best_t


@_jit
def _cast_batch(node_lo, node_hi, node_left, node_right, node_start, node_count,
                order, kind, params, origins, dirs, t_max, out_t, out_idx):
    for i in range(origins.shape[0]):
        ox, oy, oz = origins[i, 0], origins[i, 1], origins[i, 2]
        dx, dy, dz = dirs[i, 0], dirs[i, 1], dirs[i, 2]
        t = _traverse(node_lo, node_hi, node_left, node_right, node_start, node_count,
                      order, kind, params, ox, oy, oz, dx, dy, dz, t_max, 0.0, False)
        if t == np.inf:
            out_t[i] = np.inf
            out_idx[i] = -1
            continue
        idx = int(_traverse(node_lo, node_hi, node_left, node_right, node_start, node_count,
                            order, kind, params, ox, oy, oz, dx, dy, dz, t_max, t, True))
        out_idx[i] = idx
        out_t[i] = _hit_primitive(kind[idx], params[idx], ox, oy, oz, dx, dy, dz)


def cast_rays(accelerator, origins, directions, t_max):
    """Batch nearest-hit query.

    Returns ``(distance, primitive_index)`` arrays; misses have ``inf`` and
    ``-1``.  ``accelerator`` may be ``None`` for an empty scene.
    """
    origins = np.ascontiguousarray(np.broadcast_to(origins, np.shape(directions)), dtype=np.float64)
    directions = np.ascontiguousarray(directions, dtype=np.float64)
    n = directions.shape[0]
    out_t = np.full(n, np.inf)
    out_idx = np.full(n, -1, dtype=np.int64)
    if accelerator is None or n == 0:
        return out_t, out_idx
    a = accelerator
    _cast_batch(a.node_lo, a.node_hi, a.node_left, a.node_right, a.node_start, a.node_count,
                a.order, a.kind, a.params, origins, directions, float(t_max), out_t, out_idx)
    return out_t, out_idx


def _make_hit(prims, ray, t, idx):
    return Hit(point=ray.origin + t * ray.direction, distance=float(t), primitive_index=int(idx),
               leaf_wood=LeafWood(int(prims.leaf_wood[idx])),
               semantic=Semantic(int(prims.semantic[idx])),
               instance=int(prims.instance[idx]))


def intersect(ray, scene):
    """Nearest hit of ``ray`` in ``scene`` through the BVH, or ``None``."""
    t, idx = cast_rays(scene.accelerator, ray.origin[None, :], ray.direction[None, :], ray.t_max)
    if idx[0] < 0:
        return None
    return _make_hit(scene.packed, ray, t[0], idx[0])


# ---------------------------------------------------------------- oracle

def brute_distances(prims, ray):
    """Hit distance of ``ray`` against every primitive (``inf`` on a miss)."""
    ox, oy, oz = (float(c) for c in ray.origin)
    dx, dy, dz = (float(c) for c in ray.direction)
    t = np.full(len(prims), np.inf)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        sel, q = prims.columns(TRIANGLE)
        if sel.size:
            e1x, e1y, e1z = q[3] - q[0], q[4] - q[1], q[5] - q[2]
            e2x, e2y, e2z = q[6] - q[0], q[7] - q[1], q[8] - q[2]
            px = dy * e2z - dz * e2y
            py = dz * e2x - dx * e2z
            pz = dx * e2y - dy * e2x
            det = e1x * px + e1y * py + e1z * pz
            inv = 1.0 / det
            tx, ty, tz = ox - q[0], oy - q[1], oz - q[2]
            u = (tx * px + ty * py + tz * pz) * inv
            qx = ty * e1z - tz * e1y
            qy = tz * e1x - tx * e1z
            qz = tx * e1y - ty * e1x
            v = (dx * qx + dy * qy + dz * qz) * inv
            tt = (e2x * qx + e2y * qy + e2z * qz) * inv
            ok = (np.abs(det) >= 1e-15) & (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1) & (tt > T_MIN)
            t[sel[ok]] = tt[ok]

        sel, q = prims.columns(CONE)
        if sel.size:
            h = np.sqrt(q[3] * q[3] + q[4] * q[4] + q[5] * q[5])
            ax, ay, az = q[3] / h, q[4] / h, q[5] / h
            wx, wy, wz = ox - q[0], oy - q[1], oz - q[2]
            zo = wx * ax + wy * ay + wz * az
            zd = dx * ax + dy * ay + dz * az
            wpx, wpy, wpz = wx - zo * ax, wy - zo * ay, wz - zo * az
            dpx, dpy, dpz = dx - zd * ax, dy - zd * ay, dz - zd * az
            k = (q[7] - q[6]) / h
            r0 = q[6] + k * zo
            kk = k * zd
            a = dpx * dpx + dpy * dpy + dpz * dpz - kk * kk
            b = wpx * dpx + wpy * dpy + wpz * dpz - r0 * kk
            c = wpx * wpx + wpy * wpy + wpz * wpz - r0 * r0

            def valid(root):
                z = zo + root * zd
                return (root > T_MIN) & (z >= 0.0) & (z <= h)

            linear = np.abs(a) < 1e-14
            tl = -c / (2.0 * b)
            ok_l = linear & (np.abs(b) >= 1e-300) & valid(tl)
            disc = b * b - a * c
            sq = np.sqrt(np.where(disc >= 0, disc, 0.0))
            r1 = (-b - sq) / a
            r2 = (-b + sq) / a
            t1, t2 = np.minimum(r1, r2), np.maximum(r1, r2)
            quad = ~linear & (disc >= 0)
            ok1 = quad & valid(t1)
            ok2 = quad & ~ok1 & valid(t2)
            res = np.full(sel.size, np.inf)
            res[ok_l] = tl[ok_l]
            res[ok1] = t1[ok1]
            res[ok2] = t2[ok2]
            t[sel] = res

        sel, q = prims.columns(DISC)
        if sel.size:
            denom = dx * q[3] + dy * q[4] + dz * q[5]
            tt = ((q[0] - ox) * q[3] + (q[1] - oy) * q[4] + (q[2] - oz) * q[5]) / denom
            hx = ox + tt * dx - q[0]
            hy = oy + tt * dy - q[1]
            hz = oz + tt * dz - q[2]
            ok = (np.abs(denom) >= 1e-15) & (tt > T_MIN) & (hx * hx + hy * hy + hz * hz <= q[6] * q[6])
            t[sel[ok]] = tt[ok]
    return t


def intersect_brute(ray, primitives):
    """Exhaustive nearest hit over ``primitives`` (list or :class:`PrimitiveSet`)."""
    prims = primitives if isinstance(primitives, PrimitiveSet) else PrimitiveSet.from_list(primitives)
    if len(prims) == 0:
        return None
    t = brute_distances(prims, ray)
    t[t > ray.t_max] = np.inf
    t_min = t.min()
    if t_min == np.inf:
        return None
    idx = int(np.flatnonzero(t - t_min < TIE_EPS)[0])
    return _make_hit(prims, ray, t[idx], idx)
