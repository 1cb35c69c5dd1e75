import math

import numpy as np
import pytest

from kfree.errors import EmptyInput, InvalidParam, NonSmoothBoundaryPoint, VerticalPlane
from kfree.geometry import (
    DiskDomain,
    EllipseDomain,
    Hyperplane,
    PLConcaveFunction,
    PolygonDomain,
    clip_polygon,
    lower_envelope,
    polygon_area,
    slope_of,
    support_plane_with_slope,
)

UNIT_SQUARE = PolygonDomain([[0, 0], [1, 0], [1, 1], [0, 1]])


class TestSlopeOf:
    def test_horizontal_plane_has_zero_slope(self):
        h = Hyperplane(np.array([0.0, 0.0, -1.0]), -2.0)
        sv = slope_of(h)
        assert np.allclose(sv.components, 0.0)
        assert sv.magnitude == 0.0

    def test_unit_diagonal_plane(self):
        h = Hyperplane(np.array([1.0, 0.0, -1.0]) / math.sqrt(2.0), 0.0)
        sv = slope_of(h)
        assert np.allclose(sv.components, [1.0, 0.0])
        assert sv.magnitude == pytest.approx(1.0, abs=1e-15)

    def test_requested_magnitude_two_fixes_last_normal_component(self):
        # inverting magnitude = sqrt(1 - nu3^2)/|nu3| at magnitude 2 gives |nu3| = 1/sqrt(5)
        h = support_plane_with_slope(DiskDomain((0, 0), 1.0), np.array([1.0, 0.0]), 1.0, 2.0)
        assert abs(h.normal[-1]) == pytest.approx(1.0 / math.sqrt(5.0), abs=1e-16)
        assert slope_of(h).magnitude == pytest.approx(2.0, abs=1e-12)

    def test_vertical_plane_rejected(self):
        with pytest.raises(VerticalPlane):
            slope_of(Hyperplane(np.array([1.0, 0.0, 0.0]), 0.0))


class TestSupportPlane:
    def test_disk_hand_construction(self):
        # plane through (1,0) at height 1 with slope 2: H(x) = 1 - 2(x1 - 1)
        dom = DiskDomain((0, 0), 1.0)
        h = support_plane_with_slope(dom, np.array([1.0, 0.0]), 1.0, 2.0)
        assert h.height(np.array([1.0, 0.0])) == pytest.approx(1.0, abs=1e-12)
        assert h.height(np.array([0.0, 0.0])) == pytest.approx(3.0, abs=1e-12)
        # graph stays >= h0 on the whole boundary (minimum over dense samples)
        t = np.linspace(0, 1, 512, endpoint=False)
        vals = h.height(dom.boundary_point(t))
        assert float(np.min(vals)) >= 1.0 - 1e-12

    def test_square_facet_midpoint(self):
        h = support_plane_with_slope(UNIT_SQUARE, np.array([1.0, 0.5]), 1.0, 1.0)
        a, b = h.as_affine()
        # H(x) = 1 - (x1 - 1)
        assert np.allclose(a, [-1.0, 0.0], atol=1e-12)
        assert b == pytest.approx(2.0, abs=1e-12)

    def test_polygon_vertex_rejected(self):
        with pytest.raises(NonSmoothBoundaryPoint):
            support_plane_with_slope(UNIT_SQUARE, np.array([1.0, 0.0]), 1.0, 1.0)

    def test_nonpositive_slope_rejected(self):
        with pytest.raises(InvalidParam):
            support_plane_with_slope(UNIT_SQUARE, np.array([1.0, 0.5]), 1.0, -1.0)

    def test_slope_roundtrip_on_random_boundary_points(self, rng):
        doms = [
            DiskDomain((0.3, -0.2), 1.7),
            EllipseDomain((0, 0), (1.0, 0.6), angle=0.3),
        ]
        for dom in doms:
            for t in rng.uniform(0, 1, 40):
                x = dom.boundary_point(np.array([t]))[0]
                h = support_plane_with_slope(dom, x, 0.7, 1.9)
                assert slope_of(h).magnitude == pytest.approx(1.9, abs=1e-12)


class TestLowerEnvelope:
    def test_single_piece_identity(self):
        env = lower_envelope([(np.array([1.0, 2.0]), 3.0)])
        assert env.n_pieces == 1
        assert env(np.array([[1.0, 1.0]]))[0] == pytest.approx(6.0)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            lower_envelope([])

    def test_plateau_tent_active_strip(self):
        # min(x1 + 2, -x1 + 2, 1): the flat piece is lowest exactly on |x1| <= 1
        pieces = [
            (np.array([1.0, 0.0]), 2.0),
            (np.array([-1.0, 0.0]), 2.0),
            (np.array([0.0, 0.0]), 1.0),
        ]
        env = lower_envelope(pieces)
        assert env.n_pieces == 3
        flat = int(np.argmin(np.linalg.norm(env.a, axis=1)))
        region = env.active_region(flat, np.zeros(2), 10.0)
        xs = region[:, 0]
        assert float(np.min(xs)) == pytest.approx(-1.0, abs=1e-9)
        assert float(np.max(xs)) == pytest.approx(1.0, abs=1e-9)

    def test_dominated_piece_pruned_without_changing_values(self, rng):
        # brute-force pointwise min as the oracle
        pieces = [
            (np.array([1.0, 0.0]), 0.0),
            (np.array([-1.0, 0.0]), 0.0),
            (np.array([0.0, 0.0]), 1.0),  # 1 > -|x1| everywhere: never active
        ]
        env = lower_envelope(pieces)
        assert env.n_pieces == 2
        pts = rng.uniform(-3, 3, (1000, 2))
        raw = np.min(np.stack([pts @ a + b for a, b in pieces], axis=1), axis=1)
        assert np.array_equal(env(pts), raw)

    def test_paraboloid_tangents_all_active(self, rng):
        alpha, h0 = 0.4, 1.0
        grid = rng.uniform(-1, 1, (100, 2))
        pieces = [(-2 * alpha * g, h0 + alpha * float(g @ g)) for g in grid]
        env = lower_envelope(pieces)
        assert env.n_pieces == 100

    def test_envelope_matches_raw_min_exactly(self, rng):
        pieces = [(rng.standard_normal(2), float(rng.standard_normal())) for _ in range(40)]
        env = lower_envelope(pieces)
        pts = rng.uniform(-4, 4, (1000, 2))
        raw = np.min(np.stack([pts @ a + b for a, b in pieces], axis=1), axis=1)
        assert np.array_equal(env(pts), raw)

    def test_every_kept_piece_attains_the_min(self, rng):
        pieces = [(rng.standard_normal(2), float(rng.standard_normal())) for _ in range(30)]
        env = lower_envelope(pieces)
        pts = rng.uniform(-30, 30, (40000, 2))
        winners = np.unique(np.argmin(env.values_by_piece(pts), axis=1))
        assert len(winners) == env.n_pieces

    def test_concavity_on_random_triples(self, rng):
        pieces = [(rng.standard_normal(2), float(rng.standard_normal())) for _ in range(25)]
        env = lower_envelope(pieces)
        for _ in range(200):
            x, y = rng.uniform(-3, 3, 2), rng.uniform(-3, 3, 2)
            t = rng.uniform()
            lhs = env((t * x + (1 - t) * y).reshape(1, -1))[0]
            rhs = t * env(x.reshape(1, -1))[0] + (1 - t) * env(y.reshape(1, -1))[0]
            assert lhs >= rhs - 1e-10


class TestClipPolygon:
    SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

    def test_halfplane_cuts_square_in_half(self):
        out = clip_polygon(self.SQUARE, np.array([1.0, 0.0]), 0.5)
        assert polygon_area(out) == pytest.approx(0.5, abs=1e-14)

    def test_containing_halfplane_is_identity(self):
        out = clip_polygon(self.SQUARE, np.array([1.0, 0.0]), 5.0)
        assert polygon_area(out) == pytest.approx(1.0, abs=1e-14)
        assert out.shape == (4, 2)

    def test_empty_result_is_valid(self):
        out = clip_polygon(self.SQUARE, np.array([1.0, 0.0]), -1.0)
        assert out.shape[0] == 0

    def test_hexagon_clips_match_monte_carlo(self, rng):
        ang = np.linspace(0, 2 * math.pi, 6, endpoint=False)
        hexagon = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        cuts = [(rng.standard_normal(2), float(rng.uniform(-0.3, 0.6))) for _ in range(3)]
        cuts = [(n / np.linalg.norm(n), c) for n, c in cuts]
        poly = hexagon
        for n, c in cuts:
            poly = clip_polygon(poly, n, c)
        # Monte-Carlo oracle on the same region
        samples = rng.uniform(-1, 1, (400000, 2))
        inside = np.ones(len(samples), dtype=bool)
        # hexagon membership via its facets
        e = np.roll(hexagon, -1, axis=0) - hexagon
        nrm = np.stack([e[:, 1], -e[:, 0]], axis=1)
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        off = np.einsum("ij,ij->i", nrm, hexagon)
        inside &= np.all(samples @ nrm.T <= off, axis=1)
        for n, c in cuts:
            inside &= samples @ n <= c
        mc = inside.mean() * 4.0
        assert polygon_area(poly) == pytest.approx(mc, abs=1e-2)
        assert abs(polygon_area(poly) - mc) < 1e-2

    def test_clip_area_monotone_and_subadditive(self, rng):
        ang = np.linspace(0, 2 * math.pi, 6, endpoint=False)
        poly = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        area = polygon_area(poly)
        removed = 0.0
        for _ in range(6):
            n = rng.standard_normal(2)
            n /= np.linalg.norm(n)
            c = float(rng.uniform(-0.2, 0.8))
            new = clip_polygon(poly, n, c)
            new_area = polygon_area(new)
            assert new_area <= area + 1e-12
            removed += area - new_area
            poly, area = new, new_area
            if poly.shape[0] == 0:
                break
        assert removed <= polygon_area(np.stack([np.cos(ang), np.sin(ang)], axis=1)) + 1e-12


class TestDomains:
    def test_ellipse_min_curvature(self):
        e = EllipseDomain((0, 0), (2.0, 1.0))
        assert e.min_curvature() == pytest.approx(1.0 / 4.0, rel=1e-12)

    def test_ellipse_arclength_parametrisation_is_uniform(self):
        e = EllipseDomain((0, 0), (1.0, 0.5))
        t = np.linspace(0, 1, 200, endpoint=False)
        pts = e.boundary_point(t)
        seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        assert np.std(seg) / np.mean(seg) < 1e-3

    def test_polygon_rejects_collinear_vertices(self):
        with pytest.raises(InvalidParam):
            PolygonDomain([[0, 0], [1, 0], [2, 0], [1, 1]])

    def test_disk_contains(self):
        d = DiskDomain((1.0, 0.0), 2.0)
        assert bool(d.contains(np.array([[2.9, 0.0]]))[0])
        assert not bool(d.contains(np.array([[3.1, 0.0]]))[0])
