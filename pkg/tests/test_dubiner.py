import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from polymesh import (AffineMap, DirectionSet, InputError, MetricContext, NormalizedBody,
                      affine_transfer_bound, doubling_ratio, rho_ball_membership, rho_batch,
                      rho_brute_force, rho_directional, rho_lower, rho_refined,
                      rho_refined_with_direction, sample_candidates, strip_shrink_check)
from conftest import ball_body, sevengon_hpoly, square_vpoly

SQ2 = math.sqrt(2.0)


def _pairs(ctx, n, seed, bf=0.6):
    pool = sample_candidates(ctx.body, 2 * n, bf, seed)
    return pool[:n], pool[n:]


class TestDirectionSet:
    def test_angular_grid_exact(self):
        ds = DirectionSet.angular(8)
        k = np.arange(8)
        expected = np.column_stack([np.cos(2 * np.pi * k / 8), np.sin(2 * np.pi * k / 8)])
        assert np.array_equal(ds.directions, expected)

    def test_unit_norm_enforced(self):
        with pytest.raises(InputError):
            DirectionSet(2, np.array([[1.0, 1.0]]), "angular-grid", 1)

    def test_defaults(self):
        assert DirectionSet.default_for(2).count == 4096
        assert DirectionSet.default_for(3).count == 8192
        fib = DirectionSet.fibonacci(128)
        assert np.abs(np.linalg.norm(fib.directions, axis=1) - 1).max() <= 1e-12


class TestSupportCache:
    def test_cache_agrees_with_support(self, unit_disk_ctx):
        from polymesh import support_value

        ctx = unit_disk_ctx
        assert np.all(ctx.support_a <= ctx.support_b)
        assert np.all(ctx.support_b - ctx.support_a <= 2 * ctx.body.outer_radius + 1e-12)
        for i in (0, 17, 901):
            xi = ctx.base_directions.directions[i]
            assert ctx.support_b[i] == pytest.approx(
                support_value(ctx.body.body, xi), abs=1e-10)


class TestRhoDirectional:
    def test_same_point(self, unit_disk_ctx):
        assert rho_directional(unit_disk_ctx, [0.3, 0.1], [0.3, 0.1], [1, 0]) == 0.0

    def test_disk_pair_e1(self, unit_disk_ctx):
        v = rho_directional(unit_disk_ctx, [0, 0], [1, 0], [1, 0])
        assert v == pytest.approx(SQ2 - 1.0, abs=1e-12)

    def test_disk_pair_e2(self, unit_disk_ctx):
        assert rho_directional(unit_disk_ctx, [0, 0], [1, 0], [0, 1]) == pytest.approx(0, abs=1e-12)

    def test_outside_point_rejected(self, unit_disk_ctx):
        with pytest.raises(InputError):
            rho_directional(unit_disk_ctx, [0, 0], [2, 0], [1, 0])


class TestRhoLower:
    def test_same_point(self, unit_disk_ctx):
        assert rho_lower(unit_disk_ctx, [0.2, -0.4], [0.2, -0.4]) == 0.0

    def test_disk_center_to_boundary(self, unit_disk_ctx):
        # the maximizing direction is -e1 (support minimum attained at the
        # target point), giving |sqrt(1) - sqrt(0)| = 1; confirmed by the
        # dense-grid oracle
        v = rho_lower(unit_disk_ctx, [0, 0], [1, 0])
        assert v == pytest.approx(1.0, abs=1e-9)
        assert rho_brute_force(unit_disk_ctx, [0, 0], [1, 0]) == pytest.approx(1.0, abs=1e-9)

    def test_square_center_to_edge(self):
        ctx = MetricContext.create(NormalizedBody.wrap(square_vpoly()))
        v = rho_lower(ctx, [0, 0], [1, 0])
        assert v == pytest.approx(1.0, abs=1e-9)
        assert rho_brute_force(ctx, [0, 0], [1, 0]) == pytest.approx(1.0, abs=1e-9)

    def test_matches_brute_force_on_sample(self, unit_disk_ctx):
        X, Y = _pairs(unit_disk_ctx, 20, 3)
        for x, y in zip(X, Y):
            brute = rho_brute_force(unit_disk_ctx, x, y, 2**16)
            assert rho_lower(unit_disk_ctx, x, y) <= brute + 1e-12
            assert rho_refined(unit_disk_ctx, x, y) == pytest.approx(brute, rel=1e-6)


class TestRhoRefined:
    def test_rounds_zero_equals_lower(self, unit_disk_ctx):
        X, Y = _pairs(unit_disk_ctx, 50, 5)
        for x, y in zip(X, Y):
            assert rho_refined(unit_disk_ctx, x, y, rounds=0) >= rho_lower(
                unit_disk_ctx, x, y) - 1e-15

    def test_near_boundary_refinement(self, disk):
        # spec-scale check: coarse grid M=64 with 8 refinement rounds lands
        # within 1e-4 relative of the dense-grid value
        nb = NormalizedBody.wrap(disk)
        coarse = MetricContext.create(nb, DirectionSet.angular(64))
        dense = MetricContext.create(nb)
        x, y = np.array([0.9, 0.0]), np.array([0.9, 0.1])
        r = rho_refined(coarse, x, y, rounds=8)
        b = rho_brute_force(dense, x, y, 2**20)
        assert abs(r - b) <= 1e-4 * b

    def test_same_point_any_rounds(self, unit_disk_ctx):
        assert rho_refined(unit_disk_ctx, [0.5, 0.2], [0.5, 0.2], rounds=5) == 0.0

    def test_symmetry_exact(self, unit_disk_ctx):
        X, Y = _pairs(unit_disk_ctx, 10**4, 17)
        fwd = rho_batch(unit_disk_ctx, X, Y)
        rev = rho_batch(unit_disk_ctx, Y, X)
        assert np.array_equal(fwd, rev)

    def test_identity_separates(self, unit_disk_ctx):
        X, Y = _pairs(unit_disk_ctx, 10**4, 23)
        keep = np.linalg.norm(X - Y, axis=1) >= 1e-6
        vals = rho_batch(unit_disk_ctx, X[keep], Y[keep])
        assert np.all(vals > 0)

    def test_triangle_inequality_fixed_directions(self, disk):
        # chord augmentation varies per pair, so the triangle inequality is
        # asserted for the pure fixed-direction max
        ctx = MetricContext.create(NormalizedBody.wrap(disk), DirectionSet.angular(512),
                                   include_chord=False)
        pool = sample_candidates(ctx.body, 3 * 10**4, 0.5, 31)
        X, Y, Z = pool[:10**4], pool[10**4:2 * 10**4], pool[2 * 10**4:]
        xz = rho_batch(ctx, X, Z, rounds=0)
        xy = rho_batch(ctx, X, Y, rounds=0)
        yz = rho_batch(ctx, Y, Z, rounds=0)
        assert np.all(xz <= xy + yz + 1e-12)

    def test_sqrt_euclid_upper_bound(self, unit_disk_ctx):
        X, Y = _pairs(unit_disk_ctx, 10**4, 37)
        vals = rho_batch(unit_disk_ctx, X, Y)
        assert np.all(vals <= np.sqrt(np.linalg.norm(X - Y, axis=1)) + 1e-12)

    def test_chord_lower_bound(self, disk_ctx):
        X, Y = _pairs(disk_ctx, 10**4, 41)
        vals = rho_batch(disk_ctx, X, Y)
        bound = np.linalg.norm(X - Y, axis=1) / (2 * math.sqrt(2 * disk_ctx.body.outer_radius))
        assert np.all(vals >= bound - 1e-12)

    def test_monotone_under_inclusion(self):
        # Ball(0,1) inside the square inside Ball(0, sqrt 2), same directions
        ds = DirectionSet.angular(1024)
        inner = MetricContext.create(NormalizedBody.wrap(ball_body()), ds)
        mid = MetricContext.create(NormalizedBody.wrap(square_vpoly()), ds)
        outer = MetricContext.create(NormalizedBody.wrap(ball_body(radius=SQ2)), ds)
        pool = sample_candidates(inner.body, 2000, 0.5, 43)
        X, Y = pool[:1000], pool[1000:]
        v_in = rho_batch(inner, X, Y, rounds=0)
        v_mid = rho_batch(mid, X, Y, rounds=0)
        v_out = rho_batch(outer, X, Y, rounds=0)
        assert np.all(v_mid <= v_in + 1e-12)
        assert np.all(v_out <= v_mid + 1e-12)

    def test_refined_direction_attains_value(self, unit_disk_ctx):
        x, y = np.array([0.3, -0.5]), np.array([-0.6, 0.2])
        val, xi = rho_refined_with_direction(unit_disk_ctx, x, y)
        assert rho_directional(unit_disk_ctx, x, y, xi) == pytest.approx(val, abs=1e-12)


class TestStripShrink:
    def test_examples(self):
        assert strip_shrink_check(1.0, 9.0, 1.0)
        assert strip_shrink_check(4.0, 4.0, 0.5)
        h = 0.37
        assert strip_shrink_check(0.0, 4 * h * h, h)

    def test_bulk_random(self):
        rng = np.random.default_rng(53)
        count = 0
        while count < 10**5:
            s = rng.uniform(0, 9)
            h = rng.uniform(1e-6, 2.0)
            t = rng.uniform(0, 9)
            if abs(math.sqrt(s) - math.sqrt(t)) <= 2 * h:
                assert strip_shrink_check(s, t, h)
                count += 1

    @given(st.floats(0, 100), st.floats(0, 100), st.floats(1e-6, 10))
    @settings(max_examples=300, deadline=None)
    def test_hypothesis(self, s, t, h):
        assume(abs(math.sqrt(s) - math.sqrt(t)) <= 2 * h)
        assert strip_shrink_check(s, t, h)

    def test_precondition_violations(self):
        with pytest.raises(InputError):
            strip_shrink_check(-1.0, 1.0, 1.0)
        with pytest.raises(InputError):
            strip_shrink_check(0.0, 100.0, 0.1)
        with pytest.raises(InputError):
            strip_shrink_check(1.0, 1.0, 0.0)


class TestRhoBall:
    def test_huge_radius_catches_all(self, unit_disk_ctx):
        pool = sample_candidates(unit_disk_ctx.body, 2000, 0.5, 3)
        h = math.sqrt(2 * unit_disk_ctx.body.outer_radius)
        samp = rho_ball_membership(unit_disk_ctx, [0, 0], h, pool)
        assert samp.hits.shape[0] == pool.shape[0]

    def test_tiny_radius_only_center(self, unit_disk_ctx):
        pool = sample_candidates(unit_disk_ctx.body, 500, 0.5, 3)
        pool = np.vstack([pool, [[0.0, 0.0]]])
        samp = rho_ball_membership(unit_disk_ctx, [0, 0], 1e-9, pool)
        assert samp.hits.shape[0] == 1
        assert np.allclose(samp.hits[0], [0, 0])

    def test_volume_regression(self, unit_disk_ctx):
        # frozen from the first verified run (uniform 10^5-point sample)
        rng = np.random.default_rng(11)
        z = rng.standard_normal((10**5, 2))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        pool = z * (unit_disk_ctx.body.outer_radius * np.sqrt(rng.random(10**5)))[:, None]
        samp = rho_ball_membership(unit_disk_ctx, [0, 0], 0.3, pool)
        assert abs(samp.volume_estimate - 0.8197671870277207) <= 3 * samp.stderr

    def test_invalid_radius(self, unit_disk_ctx):
        with pytest.raises(InputError):
            rho_ball_membership(unit_disk_ctx, [0, 0], 0.0, np.zeros((1, 2)))


class TestDoubling:
    def test_disk_small_scale(self, unit_disk_ctx):
        ratio, stderr = doubling_ratio(unit_disk_ctx, [0, 0], 0.2, 2 * 10**4, 5)
        assert ratio <= 16.0 + 3 * stderr

    def test_square_corner(self, square_ctx):
        corner = square_ctx.body.body.world.vertices[0] * 0.98
        ratio, stderr = doubling_ratio(square_ctx, corner, 0.1, 2 * 10**4, 6)
        assert ratio <= 16.0 + 3 * stderr

    def test_diameter_ratio_one(self, unit_disk_ctx):
        h = 2 * math.sqrt(2 * unit_disk_ctx.body.outer_radius)
        ratio, _ = doubling_ratio(unit_disk_ctx, [0, 0], h, 10**4, 7)
        assert ratio == 1.0

    def test_too_small_h(self, unit_disk_ctx):
        with pytest.raises(InputError):
            doubling_ratio(unit_disk_ctx, [0.99, 0], 1e-12, 10**4, 8)

    def test_sample_floor(self, unit_disk_ctx):
        with pytest.raises(InputError):
            doubling_ratio(unit_disk_ctx, [0, 0], 0.2, 100, 9)


class TestAffineTransfer:
    def test_identity(self, unit_disk_ctx):
        lhs, rhs = affine_transfer_bound(unit_disk_ctx, AffineMap.identity(2),
                                         [0.3, 0.1], [-0.2, 0.5])
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_dilation(self, unit_disk_ctx):
        # pure dilation by 4 scales the metric by exactly 2
        amap = AffineMap(4 * np.eye(2), np.zeros(2))
        x, y = [0.3, 0.1], [-0.4, -0.2]
        lhs, rhs = affine_transfer_bound(unit_disk_ctx, amap, x, y)
        assert lhs == pytest.approx(2.0 * rho_refined(unit_disk_ctx, x, y), rel=1e-9)
        assert lhs <= rhs * (1 + 1e-9)

    def test_rotation(self, square_ctx):
        th = 0.7
        rot = AffineMap(np.array([[math.cos(th), -math.sin(th)],
                                  [math.sin(th), math.cos(th)]]), np.zeros(2))
        pool = sample_candidates(square_ctx.body, 40, 0.5, 3)
        tau = 1e-3
        for i in range(10):
            lhs, rhs = affine_transfer_bound(square_ctx, rot, pool[i], pool[i + 10])
            assert lhs <= rhs * (1 + tau)

    def test_singular_rejected(self, unit_disk_ctx):
        with pytest.raises(InputError):
            affine_transfer_bound(unit_disk_ctx, AffineMap(np.zeros((2, 2)), np.zeros(2)),
                                  [0, 0], [0.1, 0])
