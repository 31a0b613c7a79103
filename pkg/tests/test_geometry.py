import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polymesh import (AffineMap, ConvexBody, FlatnessError, InputError, NormalizedBody,
                      UnboundedBodyError, contains, john_normalize, ray_extent,
                      sample_candidates, support_point, support_value)
from conftest import ball_body, ellipsoid_body, sevengon_hpoly, square_hpoly, square_vpoly

SQ2 = math.sqrt(2.0)


class TestSupport:
    def test_unit_ball_e1(self, disk):
        assert support_value(disk, [1, 0]) == pytest.approx(1.0, abs=1e-12)

    def test_square_diagonal(self):
        v = support_value(square_vpoly(), [1 / SQ2, 1 / SQ2])
        assert v == pytest.approx(SQ2, abs=1e-12)

    def test_ellipsoid_axes(self):
        assert support_value(ellipsoid_body((4, 1)), [1, 0]) == pytest.approx(2.0, abs=1e-12)

    def test_non_unit_direction_rejected(self, disk):
        with pytest.raises(InputError):
            support_value(disk, [1, 1])

    def test_subadditivity(self, disk):
        # h(sigma) * ||xi + eta|| <= h(xi) + h(eta) on 10^4 random pairs
        rng = np.random.default_rng(5)
        for body in (disk, square_vpoly(), sevengon_hpoly(), ellipsoid_body((4, 1))):
            shape = body.world
            xi = rng.standard_normal((10**4, 2))
            eta = rng.standard_normal((10**4, 2))
            xi /= np.linalg.norm(xi, axis=1, keepdims=True)
            eta /= np.linalg.norm(eta, axis=1, keepdims=True)
            s = xi + eta
            nrm = np.linalg.norm(s, axis=1)
            ok = nrm > 1e-12
            sig = s[ok] / nrm[ok, None]
            lhs = shape.support(sig) * nrm[ok]
            rhs = shape.support(xi[ok]) + shape.support(eta[ok])
            assert np.all(lhs <= rhs + 1e-9)

    def test_inclusion_monotonicity(self, disk):
        sq = square_vpoly()
        dirs = np.random.default_rng(3).standard_normal((2000, 2))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        assert np.all(disk.world.support(dirs) <= sq.world.support(dirs) + 1e-12)

    def test_hpolytope_matches_lp_oracle(self):
        body = sevengon_hpoly()
        rng = np.random.default_rng(1)
        for _ in range(25):
            xi = rng.standard_normal(2)
            xi /= np.linalg.norm(xi)
            assert support_value(body, xi) == pytest.approx(
                body.world.support_lp(xi), abs=1e-7)


class TestSupportPoint:
    def test_ball(self, disk):
        assert support_point(disk, [0, 1]) == pytest.approx([0, 1], abs=1e-12)

    def test_square_face(self):
        z = support_point(square_vpoly(), [1, 0])
        assert z[0] == pytest.approx(1.0, abs=1e-12)
        assert -1 - 1e-12 <= z[1] <= 1 + 1e-12

    def test_ellipsoid(self):
        assert support_point(ellipsoid_body((4, 1)), [1, 0]) == pytest.approx([2, 0], abs=1e-9)

    def test_witness_property(self, disk):
        rng = np.random.default_rng(2)
        for body in (disk, square_vpoly(), sevengon_hpoly()):
            for _ in range(20):
                xi = rng.standard_normal(2)
                xi /= np.linalg.norm(xi)
                z = support_point(body, xi)
                assert contains(body, z, 1e-9)
                assert float(z @ xi) == pytest.approx(support_value(body, xi), abs=1e-9)


class TestContains:
    def test_ball_cases(self, disk):
        assert contains(disk, [0, 0], 0)
        assert not contains(disk, [1.001, 0], 0)
        assert contains(disk, [1.001, 0], 0.01)

    def test_square_vertex(self):
        assert contains(square_vpoly(), [1, 1], 0)

    def test_vpolytope_outside(self):
        assert not contains(square_vpoly(), [1.1, 0], 0)
        assert contains(square_vpoly(), [1.05, 0], 0.1)


class TestRayExtent:
    def test_examples(self, disk):
        assert ray_extent(disk, [0, 0], [1, 0]) == pytest.approx(1.0, abs=1e-12)
        assert ray_extent(square_vpoly(), [0, 0], [1 / SQ2, 1 / SQ2]) == pytest.approx(SQ2, abs=1e-9)
        assert ray_extent(disk, [0.5, 0], [1, 0]) == pytest.approx(0.5, abs=1e-12)

    def test_consistency(self, disk):
        rng = np.random.default_rng(7)
        for body in (disk, square_hpoly(), sevengon_hpoly(), ellipsoid_body((4, 1))):
            for _ in range(50):
                u = rng.standard_normal(2)
                u /= np.linalg.norm(u)
                origin = 0.2 * rng.uniform(-1, 1, 2)
                t = ray_extent(body, origin, u)
                assert contains(body, origin + (t - 1e-9) * u, 0)
                assert not contains(body, origin + (t + 1e-6) * u, 0)

    def test_outside_origin_rejected(self, disk):
        with pytest.raises(InputError):
            ray_extent(disk, [2, 0], [1, 0])


class TestJohnNormalize:
    def test_shifted_ball(self):
        nb = john_normalize(ball_body(center=(3.0, 0.0), radius=2.0))
        # map must be a pure shift: normalized body is B(0, 2) up to tolerance
        assert np.allclose(nb.to_normalized.matrix, np.eye(2), atol=1e-6)
        assert np.allclose(nb.to_normalized.shift, [-3, 0], atol=1e-6)
        assert nb.inner_radius >= 1.0 - 1e-6
        assert nb.outer_radius <= 2.0 + 1e-6

    def test_square_loewner_disk(self):
        # Khachiyan MVEE of the square is the circumscribed disk of radius
        # sqrt(2); the map scales by 2/sqrt(2) = sqrt(2)
        nb = john_normalize(square_vpoly())
        assert np.allclose(nb.to_normalized.matrix, SQ2 * np.eye(2), atol=1e-3)
        assert nb.inner_radius == pytest.approx(SQ2, rel=1e-3)
        assert nb.outer_radius == pytest.approx(2.0, rel=1e-3)

    def test_ellipsoid_self_mvee(self):
        nb = john_normalize(ellipsoid_body((9.0, 1.0)))
        sv = np.linalg.svd(nb.to_normalized.matrix, compute_uv=False)
        assert sorted(sv) == pytest.approx([2.0 / 3.0, 2.0], rel=1e-4)
        assert nb.inner_radius == pytest.approx(2.0, rel=1e-3)
        assert nb.outer_radius == pytest.approx(2.0, rel=1e-3)

    def test_round_trip(self, square_normalized):
        rng = np.random.default_rng(11)
        pts = rng.uniform(-3, 3, (1000, 2))
        back = square_normalized.from_normalized.apply(
            square_normalized.to_normalized.apply(pts))
        assert np.abs(back - pts).max() <= 1e-10

    def test_certificate(self, disk_normalized, square_normalized):
        from polymesh.geometry import spread_directions

        for nb in (disk_normalized, square_normalized):
            dirs = spread_directions(2, 10**4, seed=23)
            vals = nb.body.world.support(dirs)
            assert vals.min() >= 1.0 - 0.02
            assert vals.max() <= 2.0 * 1.02

    def test_sample_count_validated(self, disk):
        with pytest.raises(InputError):
            john_normalize(disk, num_support_samples=5)

    def test_flat_body_rejected(self):
        with pytest.raises(FlatnessError):
            ConvexBody.from_dict(
                {"dim": 2, "shape": {"type": "vpolytope", "vertices": [[0, 0], [1, 0], [2, 0]]}})

    def test_unbounded_rejected(self):
        with pytest.raises(UnboundedBodyError):
            ConvexBody.from_dict(
                {"dim": 2, "shape": {"type": "hpolytope", "halfspaces": [
                    {"normal": [1, 0], "offset": 1}, {"normal": [0, 1], "offset": 1}]}})


class TestSampleCandidates:
    def test_membership_and_boundary_stats(self, disk):
        # frozen from the first verified run: r = cos(theta/2) clustering puts
        # 70 of 1000 points beyond 0.99 and 428 beyond 0.8 at this seed
        nb = NormalizedBody.wrap(disk)
        pool = sample_candidates(nb, 1000, 0.7, 42)
        assert pool.shape == (1000, 2)
        assert bool(nb.body.world.contains(pool, 1e-9).all())
        r = np.linalg.norm(pool, axis=1)
        assert int((r > 0.99).sum()) == 70
        assert int((r > 0.8).sum()) == 428

    def test_single_point_interior(self, disk_normalized):
        pool = sample_candidates(disk_normalized, 1, 0.7, 3)
        assert pool.shape == (1, 2)
        assert bool(disk_normalized.body.world.contains(pool, 0.0).all())
        assert np.linalg.norm(pool[0]) < disk_normalized.outer_radius

    def test_determinism(self, disk_normalized):
        a = sample_candidates(disk_normalized, 500, 0.5, 9)
        b = sample_candidates(disk_normalized, 500, 0.5, 9)
        assert np.array_equal(a, b)

    def test_vpolytope_pool(self):
        nb = NormalizedBody.wrap(square_vpoly())
        pool = sample_candidates(nb, 64, 0.5, 1)
        assert bool(nb.body.world.contains(pool, 1e-9).all())


class TestSerialization:
    def test_round_trip_all_shapes(self, disk):
        for body in (disk, square_vpoly(), square_hpoly(), sevengon_hpoly(),
                     ellipsoid_body((4, 1))):
            again = ConvexBody.from_dict(body.to_dict())
            assert again.fingerprint() == body.fingerprint()
            dirs = np.random.default_rng(0).standard_normal((50, 2))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            assert np.allclose(again.world.support(dirs), body.world.support(dirs), atol=1e-12)

    def test_transform_baking(self):
        amap = {"matrix": [[2.0, 0.0], [0.0, 2.0]], "shift": [1.0, 0.0]}
        body = ConvexBody.from_dict(
            {"dim": 2, "shape": {"type": "ball", "center": [0, 0], "radius": 1},
             "transform": amap})
        assert support_value(body, [1, 0]) == pytest.approx(3.0, abs=1e-9)
        assert contains(body, [2.9, 0], 0) and not contains(body, [3.1, 0], 0)

    def test_malformed_rejected(self):
        with pytest.raises(InputError):
            ConvexBody.from_dict({"shape": {"type": "ball"}})
        with pytest.raises(InputError):
            ConvexBody.from_dict({"dim": 2, "shape": {"type": "nonagon"}})


class TestAffineMap:
    def test_singular_rejected(self):
        with pytest.raises(InputError):
            AffineMap(np.zeros((2, 2)), np.zeros(2))

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(4)
        m = AffineMap(rng.standard_normal((3, 3)) + 3 * np.eye(3), rng.standard_normal(3))
        pts = rng.standard_normal((100, 3))
        assert np.abs(m.inverse().apply(m.apply(pts)) - pts).max() <= 1e-10

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_compose_matches_sequential(self, seed):
        rng = np.random.default_rng(seed)
        a = AffineMap(rng.standard_normal((2, 2)) + 2 * np.eye(2), rng.standard_normal(2))
        b = AffineMap(rng.standard_normal((2, 2)) + 2 * np.eye(2), rng.standard_normal(2))
        pts = rng.standard_normal((16, 2))
        assert np.allclose(a.compose(b).apply(pts), a.apply(b.apply(pts)), atol=1e-9)
