import math
import time

import numpy as np
import pytest

from lidarforest.raycast import (PrimitiveSet, Ray, build_accelerator, cast_rays, intersect,
                                 intersect_brute)
from lidarforest.scene import (Disc, LabeledPrimitive, LeafWood, Scene, Semantic, Triangle,
                               TruncatedCone, generate_terrain)


def _tree(g, instance=1):
    return LabeledPrimitive(g, LeafWood.WOOD, Semantic.TREE, instance)


def _flat_ground():
    return generate_terrain(0, (40, 40), 0.0, 4.0)


def _random_rays(rng, n, lo, hi):
    o = rng.uniform(lo, hi, size=(n, 3))
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return o, d


def _march_cone(cone, origin, direction, t_max, steps=200_000):
    """First crossing of the frustum's lateral surface by dense sampling + bisection."""
    base = np.array(cone.base)
    axis = np.array(cone.axis)
    h = np.linalg.norm(axis)
    a = axis / h

    def f(t):
        q = origin + np.multiply.outer(t, direction) - base
        z = q @ a
        radial = np.linalg.norm(q - np.multiply.outer(z, a), axis=-1)
        r = cone.base_radius + (cone.top_radius - cone.base_radius) * z / h
        return radial - r, z

    ts = np.linspace(1e-6, t_max, steps)
    val, z = f(ts)
    inside = (z >= 0) & (z <= h)
    for i in range(steps - 1):
        if np.sign(val[i]) != np.sign(val[i + 1]) and (inside[i] or inside[i + 1]):
            lo, hi = ts[i], ts[i + 1]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if np.sign(f(np.array([mid]))[0][0]) == np.sign(val[i]):
                    lo = mid
                else:
                    hi = mid
            tz = f(np.array([lo]))[1][0]
            if 0 <= tz <= h:
                return 0.5 * (lo + hi)
    return None


class TestBrute:
    def test_straight_down_onto_ground(self):
        hit = intersect_brute(Ray((0, 0, 10), (0, 0, -1), 100.0), _flat_ground())
        assert hit is not None
        np.testing.assert_allclose(hit.point, (0, 0, 0), atol=1e-12)
        assert hit.distance == pytest.approx(10.0)
        assert hit.semantic == Semantic.GROUND

    def test_ray_away_from_geometry(self):
        assert intersect_brute(Ray((0, 0, 10), (0, 0, 1), 100.0), _flat_ground()) is None

    def test_nested_coaxial_cones_nearer_wins(self):
        outer = TruncatedCone((0, 0, 0), (0, 0, 4), 1.0, 0.6)
        inner = TruncatedCone((0, 0, 0), (0, 0, 4), 0.5, 0.3)
        prims = [_tree(inner, 2), _tree(outer, 1)]
        z = 1.0
        hit = intersect_brute(Ray((-5, 0.2, z), (1, 0, 0), 100.0), prims)
        r = 1.0 + (0.6 - 1.0) * z / 4
        expected = -math.sqrt(r * r - 0.2**2)
        assert hit.primitive_index == 1 and hit.instance == 1
        assert hit.point[0] == pytest.approx(expected, abs=1e-12)

    def test_ray_inside_cone_hits_far_wall(self):
        cone = TruncatedCone((0, 0, 0), (0, 0, 2), 1.0, 1.0)
        hit = intersect_brute(Ray((0, 0, 1), (1, 0, 0), 10.0), [_tree(cone)])
        assert hit.distance == pytest.approx(1.0)

    def test_cone_matches_marching_oracle(self, rng):
        cone = TruncatedCone((0.3, -0.2, 0.5), (0.4, 0.3, 3.0), 0.8, 0.3)
        prims = [_tree(cone)]
        agree = 0
        for _ in range(25):
            target = np.array(cone.base) + rng.uniform(0, 1) * np.array(cone.axis) \
                + rng.uniform(-0.6, 0.6, 3)
            origin = rng.uniform(-6, 6, 3)
            d = target - origin
            d /= np.linalg.norm(d)
            hit = intersect_brute(Ray(origin, d, 20.0), prims)
            t_ref = _march_cone(cone, origin, d, 20.0)
            if t_ref is None:
                assert hit is None
            else:
                assert hit is not None
                assert hit.distance == pytest.approx(t_ref, abs=1e-7)
                agree += 1
        assert agree >= 10

    def test_disc_radius_test(self):
        disc = LabeledPrimitive(Disc((0, 0, 2), (0, 0, 1), 0.5), LeafWood.LEAF, Semantic.TREE, 1)
        assert intersect_brute(Ray((0.49, 0, 0), (0, 0, 1), 10.0), [disc]).distance == pytest.approx(2.0)
        assert intersect_brute(Ray((0.51, 0, 0), (0, 0, 1), 10.0), [disc]) is None
        # grazing (parallel) ray
        assert intersect_brute(Ray((-1, 0, 2), (1, 0, 0), 10.0), [disc]) is None

    def test_tie_breaks_to_lowest_index(self):
        tri = Triangle((-1, -1, 0), (1, -1, 0), (0, 1, 0))
        prims = [LabeledPrimitive(tri, 0, Semantic.GROUND, 0)] * 3
        hit = intersect_brute(Ray((0, 0, 5), (0, 0, -1), 10.0), prims)
        assert hit.primitive_index == 0

    def test_range_clipping(self):
        ray = Ray((0, 0, 10), (0, 0, -1), 9.5)
        assert intersect_brute(ray, _flat_ground()) is None


class TestBVH:
    def test_single_primitive(self):
        prims = [_tree(Disc((0, 0, 3), (0, 0, 1), 1.0))]
        bvh = build_accelerator(prims)
        assert len(bvh.node_left) == 1
        scene = Scene.from_primitives(prims, {1: None})
        hit = intersect(Ray((0.2, 0.1, 0), (0, 0, 1), 10.0), scene)
        assert hit.distance == pytest.approx(3.0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            build_accelerator([])

    def test_identical_boxes_terminate(self):
        tri = Triangle((0, 0, 0), (1, 0, 0), (0, 1, 0))
        prims = [LabeledPrimitive(tri, 0, Semantic.GROUND, 0)] * 500
        bvh = build_accelerator(prims)
        assert bvh.node_count.max() <= 4
        assert bvh.depth <= 12
        t, idx = cast_rays(bvh, np.array([[0.2, 0.2, 1.0]]), np.array([[0.0, 0.0, -1.0]]), 5.0)
        assert idx[0] == 0 and t[0] == pytest.approx(1.0)

    def test_brute_examples_through_scene(self):
        scene = Scene.from_primitives(_flat_ground())
        hit = intersect(Ray((0, 0, 10), (0, 0, -1), 100.0), scene)
        ref = intersect_brute(Ray((0, 0, 10), (0, 0, -1), 100.0), scene.packed)
        assert hit.primitive_index == ref.primitive_index and hit.distance == ref.distance
        assert intersect(Ray((0, 0, 10), (0, 0, 1), 100.0), scene) is None
        assert intersect(Ray((0, 0, 10), (0, 0, -1), 5.0), scene) is None

    def test_edge_hits_prefer_lowest_index(self):
        scene = Scene.from_primitives(_flat_ground())
        # vertical rays through shared grid vertices and diagonals
        for x, y in [(0.0, 0.0), (4.0, 4.0), (2.0, 2.0), (-8.0, 3.0)]:
            ray = Ray((x, y, 3.0), (0, 0, -1), 10.0)
            a = intersect(ray, scene)
            b = intersect_brute(ray, scene.packed)
            assert a.primitive_index == b.primitive_index

    def test_differential_small_forest(self, small_forest, rng):
        o, d = _random_rays(rng, 1500, small_forest.bounds[0], small_forest.bounds[1])
        t, idx = cast_rays(small_forest.accelerator, o, d, 60.0)
        for i in range(len(o)):
            ref = intersect_brute(Ray(o[i], d[i], 60.0), small_forest.packed)
            if ref is None:
                assert idx[i] == -1
            else:
                assert idx[i] == ref.primitive_index
                assert abs(t[i] - ref.distance) <= 1e-9

    def test_hit_invariants(self, small_forest, rng):
        o, d = _random_rays(rng, 300, small_forest.bounds[0], small_forest.bounds[1])
        for i in range(len(o)):
            ray = Ray(o[i], d[i], 50.0)
            hit = intersect(ray, small_forest)
            if hit is None:
                continue
            assert 0 < hit.distance <= 50.0
            assert np.linalg.norm(hit.point - ray.origin) == pytest.approx(hit.distance, abs=1e-6)
            # monotone clipping
            shorter = intersect(Ray(o[i], d[i], hit.distance + 1e-6), small_forest)
            assert shorter.primitive_index == hit.primitive_index
            np.testing.assert_array_equal(shorter.point, hit.point)
            assert intersect(Ray(o[i], d[i], hit.distance * 0.5), small_forest) is None \
                or intersect(Ray(o[i], d[i], hit.distance * 0.5), small_forest).distance < hit.distance

    def test_packing_round_trip(self, small_forest):
        again = PrimitiveSet.from_list(small_forest.packed.to_list())
        np.testing.assert_array_equal(again.params, small_forest.packed.params)
        np.testing.assert_array_equal(again.instance, small_forest.packed.instance)

    @pytest.mark.slow
    def test_speedup_on_leaf_discs(self, rng):
        n = 100_000
        centers = rng.uniform(-50, 50, size=(n, 3))
        normals = rng.normal(size=(n, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        params = np.zeros((n, 9))
        params[:, 0:3], params[:, 3:6], params[:, 6] = centers, normals, 0.1
        prims = PrimitiveSet(np.full(n, 2), params, np.full(n, 2), np.ones(n), np.ones(n))
        bvh = build_accelerator(prims)
        o, d = _random_rays(rng, 10_000, -50, 50)
        cast_rays(bvh, o[:10], d[:10], 200.0)  # compile outside the timing
        start = time.perf_counter()
        cast_rays(bvh, o, d, 200.0)
        per_ray_bvh = (time.perf_counter() - start) / len(o)
        sample = 200
        start = time.perf_counter()
        for i in range(sample):
            intersect_brute(Ray(o[i], d[i], 200.0), prims)
        per_ray_brute = (time.perf_counter() - start) / sample
        assert per_ray_brute / per_ray_bvh >= 10
