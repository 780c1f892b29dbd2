import math

import numpy as np
import pytest

from blindspot.geometry import (
    EnvParams,
    Obstacle,
    PolarPoint,
    ShadowSector,
    alpha_overlap,
    blocked_matrix,
    blocked_matrix_sector,
    chord_x,
    epsilon_overlap,
    exact_visible_area,
    is_visible,
    is_visible_sector,
    make_obstacles,
    obstacle_segment,
    sector,
    shadow_area_single,
    sweep_visible_area,
    theta,
    wrap_angle,
)
from oracles import alpha_bruteforce, arc_overlap_bruteforce, hit_or_miss_visible

PI = math.pi


def z_of(l_over_r, mean=8.0):
    return EnvParams.normalized(mean, l_over_r)


class TestTypes:
    def test_env_validation(self):
        with pytest.raises(ValueError):
            EnvParams(-1.0, 0.5, 1.0)
        with pytest.raises(ValueError):
            EnvParams(1.0, -0.5, 1.0)
        with pytest.raises(ValueError):
            EnvParams(1.0, 0.5, 0.0)
        with pytest.raises(ValueError):
            EnvParams(math.inf, 0.5, 1.0)

    def test_normalized(self):
        z = EnvParams.normalized(8.0, 0.5, R=2.0)
        assert z.mean_obstacles == pytest.approx(8.0)
        assert z.L == 1.0

    def test_polar_reduction(self):
        assert PolarPoint(1.0, -PI / 2).phi == pytest.approx(3 * PI / 2)
        assert PolarPoint(1.0, 2 * PI).phi == 0.0
        assert 0.0 <= wrap_angle(-1e-300) < 2 * PI
        with pytest.raises(ValueError):
            PolarPoint(-0.1, 0.0)

    def test_obstacle_facing(self):
        ob = Obstacle(PolarPoint(0.7, 1.1), 0.4)
        (ax, ay), (bx, by) = ob.endpoints
        mx, my = ob.mid.xy
        assert math.hypot(ax - mx, ay - my) == pytest.approx(0.2)
        # chord is perpendicular to the radius
        assert (bx - ax) * mx + (by - ay) * my == pytest.approx(0.0, abs=1e-15)
        assert ob.orientation == pytest.approx(1.1 + PI / 2)


class TestTheta:
    def test_origin_limit(self):
        assert theta(PolarPoint(1e-12, 0.3), z_of(0.5)) == pytest.approx(PI)

    def test_rim(self):
        assert theta(PolarPoint(1.0, 0.0), z_of(0.5)) == 0.0

    def test_branch_point_identity(self):
        z = z_of(1.0)
        r = math.sqrt(3) / 2
        assert theta(PolarPoint(r, 0.0), z) == pytest.approx(PI / 3, abs=1e-15)
        assert 2 * math.atan(0.5 / r) == pytest.approx(2 * math.acos(r), abs=1e-15)

    @pytest.mark.parametrize("lr", [0.05, 0.3, 0.5, 1.0, 1.6])
    def test_continuity_at_branch(self, lr):
        z = z_of(lr)
        rb = z.branch_radius
        for f in (theta, chord_x, shadow_area_single):
            left = f(PolarPoint(rb, 0.0), z)
            right = f(PolarPoint(math.nextafter(rb, 2.0), 0.0), z)
            assert abs(left - right) < 1e-12

    @pytest.mark.parametrize("lr", [0.1, 0.5, 1.0])
    def test_non_increasing(self, lr):
        z = z_of(lr)
        vals = [theta(PolarPoint(r, 0.0), z) for r in np.linspace(0, 1, 401)]
        assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))

    def test_domain(self):
        with pytest.raises(ValueError):
            theta(PolarPoint(1.5, 0.0), z_of(0.5))


class TestChord:
    def test_ends(self):
        z = z_of(0.5)
        assert chord_x(PolarPoint(0.0, 0.0), z) == 0.5
        assert chord_x(PolarPoint(1.0, 0.0), z) == 0.0

    def test_branch(self):
        z = z_of(1.0)
        assert chord_x(PolarPoint(math.sqrt(3) / 2, 0.0), z) == pytest.approx(1.0)
        assert 2 * math.sqrt(1 - 0.75) == pytest.approx(1.0)


class TestShadowArea:
    def test_ends(self):
        z = z_of(0.5)
        assert shadow_area_single(PolarPoint(1e-14, 0.0), z) == pytest.approx(PI / 2)
        assert shadow_area_single(PolarPoint(1.0, 0.0), z) == 0.0

    def test_hit_or_miss(self):
        z = z_of(0.5)
        gen = np.random.default_rng(11)
        est, se = hit_or_miss_visible([0.4], [0.0], z.L, z.R, 400_000, gen)
        shadow = z.disc_area - est
        assert abs(shadow - shadow_area_single(PolarPoint(0.4, 0.0), z)) <= 3 * se


class TestSector:
    def test_wrap(self):
        z = z_of(0.5)
        # r chosen so that theta = pi/2 on the inner branch: 2*atan(c/r) = pi/2 -> r = c
        s = sector(PolarPoint(0.25, 0.0), z)
        assert s.theta == pytest.approx(PI / 2)
        assert s.l == pytest.approx(7 * PI / 4) and s.u == pytest.approx(PI / 4)
        assert s.wraps

    def test_no_wrap(self):
        s = sector(PolarPoint(0.25, PI), z_of(0.5))
        assert s.l == pytest.approx(3 * PI / 4) and s.u == pytest.approx(5 * PI / 4)
        assert not s.wraps

    def test_rim(self):
        s = sector(PolarPoint(1.0, 2.0), z_of(0.5))
        assert s.l == s.u == pytest.approx(2.0)

    def test_arc_measure(self):
        gen = np.random.default_rng(3)
        z = z_of(0.7)
        for _ in range(50):
            s = sector(PolarPoint(gen.random(), 2 * PI * gen.random()), z)
            span = (s.u - s.l) % (2 * PI)
            assert span == pytest.approx(s.theta, abs=1e-12)


class TestEpsilon:
    def test_identical(self):
        s = ShadowSector(0.5, 1.0, 1.5)
        assert epsilon_overlap(s, s) == pytest.approx(0.5)

    def test_disjoint(self):
        s1 = ShadowSector(PI / 6, 0.0, PI / 6)
        s2 = ShadowSector(PI / 6, PI / 2, 2 * PI / 3)
        assert epsilon_overlap(s1, s2) == pytest.approx(PI / 6 - PI / 2)

    def test_both_wrap(self):
        s1 = ShadowSector(PI / 2, 7 * PI / 4, PI / 4)
        s2 = ShadowSector(PI / 4, 15 * PI / 8, PI / 8)
        eps = epsilon_overlap(s1, s2)
        assert eps == pytest.approx(PI / 4)
        assert eps == pytest.approx(arc_overlap_bruteforce(s1.l, s1.u, s2.l, s2.u), abs=2e-5)


class TestAlpha:
    def test_nested(self):
        assert alpha_overlap(PolarPoint(0.3, 1.0), PolarPoint(0.6, 1.0), z_of(0.5)) == 1.0

    def test_antipodal(self):
        assert alpha_overlap(PolarPoint(0.6, 0.0), PolarPoint(0.7, PI), z_of(0.5)) == 0.0

    def test_order_required(self):
        with pytest.raises(ValueError):
            alpha_overlap(PolarPoint(0.7, 0.0), PolarPoint(0.6, 0.0), z_of(0.5))

    def test_bruteforce(self):
        gen = np.random.default_rng(5)
        worst = 0.0
        for _ in range(100):
            lr = gen.uniform(0.05, 1.5)
            z = z_of(lr)
            r = np.sort(gen.random(2))
            p1, p2 = PolarPoint(r[0], 2 * PI * gen.random()), PolarPoint(r[1], 2 * PI * gen.random())
            a = alpha_overlap(p1, p2, z)
            assert 0.0 <= a <= 1.0
            worst = max(worst, abs(a - alpha_bruteforce(p1, p2, z, 200_000)))
        assert worst <= 1e-3


class TestSegment:
    def test_examples(self):
        z = EnvParams(0.1, 2.0, 5.0)
        a, b = obstacle_segment(PolarPoint(1.0, 0.0), z)
        assert np.allclose(sorted([a, b]), [(1.0, -1.0), (1.0, 1.0)], atol=1e-15)
        a, b = obstacle_segment(PolarPoint(1.0, PI / 2), z)
        assert np.allclose(sorted([a, b]), [(-1.0, 1.0), (1.0, 1.0)], atol=1e-15)

    def test_degenerate(self):
        z = EnvParams(0.1, 2.0, 5.0)
        (ax, ay), (bx, by) = obstacle_segment(PolarPoint(0.0, 0.0), z)
        assert (ax + bx, ay + by) == pytest.approx((0.0, 0.0))
        ob = [Obstacle(PolarPoint(0.0, 0.0), 2.0)]
        assert not is_visible(PolarPoint(1.0, 0.2), ob, z)
        assert is_visible(PolarPoint(1.0, PI), ob, z)


class TestVisibility:
    def test_no_obstacles(self):
        assert is_visible(PolarPoint(0.9, 1.0), [], z_of(0.5))

    def test_behind(self):
        z = EnvParams(0.1, 0.5, 3.0)
        assert not is_visible(PolarPoint(2.0, 0.0), [Obstacle(PolarPoint(1.0, 0.0), 0.5)], z)

    def test_in_front(self):
        z = EnvParams(0.1, 0.5, 3.0)
        assert is_visible(PolarPoint(0.5, 0.0), [Obstacle(PolarPoint(1.0, 0.0), 0.5)], z)

    def test_predicates_agree(self):
        gen = np.random.default_rng(8)
        z = z_of(0.6)
        for _ in range(300):
            obs = make_obstacles(gen.random(3), 2 * PI * gen.random(3), z)
            q = PolarPoint(math.sqrt(gen.random()), 2 * PI * gen.random())
            assert is_visible(q, obs, z) == is_visible_sector(q, obs, z)

    def test_batched_predicates_agree(self):
        gen = np.random.default_rng(9)
        n = 100_000
        qr, qp = np.sqrt(gen.random((n, 1))), 2 * PI * gen.random((n, 1))
        orr, op = gen.random((n, 4)), 2 * PI * gen.random((n, 4))
        a = blocked_matrix(qr, qp, orr, op, 0.7)
        b = blocked_matrix_sector(qr, qp, orr, op, 0.7)
        assert np.array_equal(a, b)

    def test_monotone_removal(self):
        gen = np.random.default_rng(10)
        z = z_of(0.8)
        for _ in range(200):
            obs = make_obstacles(gen.random(4), 2 * PI * gen.random(4), z)
            q = PolarPoint(math.sqrt(gen.random()), 2 * PI * gen.random())
            if is_visible(q, obs, z):
                assert all(is_visible(q, obs[:i] + obs[i + 1 :], z) for i in range(4))


class TestVisibleArea:
    def test_empty(self):
        assert exact_visible_area([], z_of(0.5)) == PI

    @pytest.mark.parametrize("r", [0.05, 0.4, 0.8, 0.99])
    def test_single(self, r):
        z = z_of(0.5)
        p = PolarPoint(r, 1.3)
        exp = PI - shadow_area_single(p, z)
        assert exact_visible_area([Obstacle(p, z.L)], z) == pytest.approx(exp, rel=1e-9)

    def test_five_hit_or_miss(self):
        gen = np.random.default_rng(12)
        z = z_of(0.5)
        r, phi = gen.random(5), 2 * PI * gen.random(5)
        exact = exact_visible_area(make_obstacles(r, phi, z), z)
        est, se = hit_or_miss_visible(r, phi, z.L, z.R, 1_000_000, gen)
        assert abs(exact - est) <= 3 * se

    def test_union_bounds(self):
        gen = np.random.default_rng(13)
        z = z_of(0.9)
        for _ in range(200):
            k = int(gen.integers(1, 9))
            r, phi = gen.random(k), 2 * PI * gen.random(k)
            a = exact_visible_area(make_obstacles(r, phi, z), z)
            sh = [shadow_area_single(PolarPoint(x, 0.0), z) for x in r]
            assert max(0.0, PI - sum(sh)) - 1e-12 <= a <= PI - max(sh) + 1e-12

    def test_batch_matches_single(self):
        gen = np.random.default_rng(14)
        z = z_of(0.5)
        r, phi = gen.random((20, 6)), 2 * PI * gen.random((20, 6))
        batch = sweep_visible_area(r, phi, z.L, z.R)
        single = [exact_visible_area(make_obstacles(a, b, z), z) for a, b in zip(r, phi)]
        assert np.allclose(batch, single, rtol=0, atol=1e-14)

    def test_annulus_and_arcs(self):
        # unblocked: annulus outside two arcs has area (2pi - span)/2 * (R^2 - r_in^2)
        z = EnvParams(1.0, 0.0, 1.0)
        out = sweep_visible_area(
            np.zeros((1, 0)), np.zeros((1, 0)), 0.0, 1.0, r_in=0.5,
            arc_centre=np.array([[0.0, 3.0]]), arc_half=np.array([[0.2, 0.1]]), inside_arcs=False,
        )
        assert out[0] == pytest.approx((2 * PI - 0.6) / 2 * 0.75)
        assert z.R == 1.0
