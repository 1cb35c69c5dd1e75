"""Exact ruled solutions of the zero-curvature free boundary problem.

One supporting plane of prescribed slope per facet (or boundary sample),
lower envelope, and exact zero-set extraction.  The envelope's graph is a
ruled surface: every graph point lies on a segment running from the lifted
domain boundary (height ``h0``) down to the free boundary (height 0), and
the gradient image of the positivity set is a finite point set of measure
zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import HalfspaceIntersection

from .errors import (
    DegenerateSolution,
    InvalidParam,
    NotAPolytope,
    TooFewPlanes,
)
from .geometry import (
    ConvexDomain,
    DiskDomain,
    EllipseDomain,
    PLConcaveFunction,
    PolygonDomain,
    PolytopeDomain,
    SampledDomain,
    halfplane_intersection,
    lower_envelope,
    plane_from_contact,
    polygon_area,
)

#: Ridge intersection/stitching tolerance for the zero set.
STITCH_TOL = 1e-9


@dataclass(frozen=True)
class FreeBoundary3D:
    """Zero-level polytope boundary for d=3: vertices plus facet planes."""

    vertices: np.ndarray
    facet_normals: np.ndarray
    facet_offsets: np.ndarray


@dataclass(frozen=True)
class HomogeneousSolution:
    """Ruled envelope solution for vanishing curvature.

    ``surface`` is the piecewise-linear envelope; ``free_boundary`` the
    closed convex polyline (CCW, first vertex not repeated) where it
    vanishes; ``fb_edge_pieces[i]`` is the envelope piece whose zero line
    carries edge i.  ``contacts`` are the boundary points the planes pass
    through (lifted to height ``h0``).
    """

    domain: ConvexDomain
    h0: float
    lambda0: float
    surface: PLConcaveFunction
    free_boundary: np.ndarray
    fb_edge_pieces: np.ndarray
    contacts: np.ndarray
    source: str
    fb3d: FreeBoundary3D | None = None

    @property
    def n_planes(self) -> int:
        return self.surface.n_pieces

    def extended(self, x: np.ndarray) -> np.ndarray:
        """Solution extended as identically ``h0`` over the domain."""
        return np.minimum(self.h0, self.surface(x))


def _polytope_pieces(domain, h0: float, lambda0: float):
    normals = domain.facet_normals
    supports = domain.facet_supports
    a = -lambda0 * normals
    b = h0 + lambda0 * supports
    return a, b


def _zero_set_polygon(a: np.ndarray, b: np.ndarray, center: np.ndarray, radius: float):
    """Zero set of ``min_i(a_i . x + b_i)`` as a convex polygon with piece tags."""
    normals = -a
    offsets = b
    poly, tags = halfplane_intersection(normals, offsets, center, radius)
    if poly.shape[0] == 0:
        raise DegenerateSolution("zero set is empty")
    if np.any(tags < 0):
        raise DegenerateSolution("positivity set is unbounded")
    return poly, tags


def _fb_bbox(domain: ConvexDomain, h0: float, lambda0: float):
    center = domain.interior_point()
    radius = 4.0 * (domain.circumradius() + h0 / lambda0) + 10.0
    return center, radius


def solve_polytope(domain, h0: float, lambda0: float) -> HomogeneousSolution:
    """Envelope solution for a convex polygon (d=2) or polytope (d=3).

    One plane per facet, passing through the facet lifted to height ``h0``
    with slope ``lambda0`` descending outward; the envelope equals ``h0``
    on the whole facet, its gradient has magnitude ``lambda0`` everywhere,
    and the free boundary is the facet-wise outward offset by
    ``h0 / lambda0``.
    """
    if h0 <= 0 or lambda0 <= 0:
        raise InvalidParam("h0 and lambda0 must be positive")
    if not isinstance(domain, (PolygonDomain, PolytopeDomain)):
        raise NotAPolytope("solve_polytope needs a polygon/polytope domain")
    a, b = _polytope_pieces(domain, h0, lambda0)
    surface = lower_envelope(list(zip(a, b)))
    if isinstance(domain, PolygonDomain):
        center, radius = _fb_bbox(domain, h0, lambda0)
        fb, tags = _zero_set_polygon(surface.a, surface.b, center, radius)
        contacts = 0.5 * (domain.vertices + np.roll(domain.vertices, -1, axis=0))
        return HomogeneousSolution(
            domain, h0, lambda0, surface, fb, tags, contacts, "polytope_exact"
        )
    # d = 3: zero set is a polytope, assembled from halfspaces n.x <= s + h0/l
    normals = domain.facet_normals
    supports = domain.facet_supports + h0 / lambda0
    halfspaces = np.column_stack([normals, -supports])
    hs = HalfspaceIntersection(halfspaces, domain.interior_point())
    fb3 = FreeBoundary3D(hs.intersections, normals, supports)
    return HomogeneousSolution(
        domain,
        h0,
        lambda0,
        surface,
        np.zeros((0, 2)),
        np.zeros(0, dtype=int),
        domain.vertices,
        "polytope_exact",
        fb3d=fb3,
    )


def solve_smooth(
    domain: ConvexDomain, h0: float, lambda0: float, n: int
) -> HomogeneousSolution:
    """Envelope of ``n`` supporting planes at equal-arclength boundary points.

    The plane family is anchored at boundary parameter 0, so refining
    ``n -> m*n`` keeps every old plane and the envelopes decrease
    pointwise; the zero sets converge to the smooth free boundary at the
    rate of circumscribed polygons.
    """
    if h0 <= 0 or lambda0 <= 0:
        raise InvalidParam("h0 and lambda0 must be positive")
    if not isinstance(domain, (DiskDomain, EllipseDomain, SampledDomain)):
        raise InvalidParam("solve_smooth needs a C^1 boundary representation")
    if n < 8:
        raise TooFewPlanes("need at least 8 supporting planes")
    t = np.arange(n, dtype=float) / float(n)
    pts = domain.boundary_point(t)
    nrm = domain.outward_normal(t)
    a = -lambda0 * nrm
    b = h0 + lambda0 * np.einsum("ij,ij->i", nrm, pts)
    surface = lower_envelope(list(zip(a, b)))
    center, radius = _fb_bbox(domain, h0, lambda0)
    fb, tags = _zero_set_polygon(surface.a, surface.b, center, radius)
    return HomogeneousSolution(
        domain, h0, lambda0, surface, fb, tags, pts, f"smooth_approx({n})"
    )


def extract_free_boundary(sol: HomogeneousSolution) -> np.ndarray:
    """Exact zero-level set of the envelope as a closed convex polyline.

    Each piece's zero line, clipped to the region where the piece is
    active, contributes one edge; the edges stitch into a CCW polygon.
    For d=3 the polytope boundary is returned instead.
    """
    if sol.fb3d is not None:
        return sol.fb3d
    center, radius = _fb_bbox(sol.domain, sol.h0, sol.lambda0)
    fb, tags = _zero_set_polygon(sol.surface.a, sol.surface.b, center, radius)
    return fb


@dataclass(frozen=True)
class RuledCheckReport:
    """Outcome of the ruled-structure check on sampled graph points."""

    samples: int
    max_deviation: float
    max_endpoint_error: float
    failures: int

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _ruling_segment(sol: HomogeneousSolution, x: np.ndarray):
    """Segment through ``(x, u(x))`` on the graph, from height h0 to 0.

    Within a piece's activity region the graph is a plane; the region's
    top edge (envelope value h0) and bottom edge (value 0) are parallel
    lines, and by the no-interior-vertex property its side walls are
    straight, so a segment through any interior point always exists.
    Returns (top_point, bottom_point) in the base plane.
    """
    surf = sol.surface
    i = surf.argmin_piece(x)
    ai, bi = surf.a[i], surf.b[i]
    lam = float(np.linalg.norm(ai))
    n_dir = -ai / lam  # direction of steepest descent of the piece
    t_dir = np.array([-n_dir[1], n_dir[0]])
    center, radius = _fb_bbox(sol.domain, sol.h0, sol.lambda0)
    # region of the slab where piece i is active and 0 <= u_i <= h0
    others = [j for j in range(surf.n_pieces) if j != i]
    normals = [surf.a[i] - surf.a[j] for j in others]
    offsets = [surf.b[j] - surf.b[i] for j in others]
    normals += [-ai, ai]
    offsets += [bi, sol.h0 - bi]
    poly, _ = halfplane_intersection(
        np.array(normals), np.array(offsets), center, radius
    )
    if poly.shape[0] == 0:
        return None
    # tangential extent of the region on the two level lines
    u_vals = poly @ ai + bi
    tau = poly @ t_dir
    top_mask = np.abs(u_vals - sol.h0) <= 1e-7 * (1 + sol.h0)
    bot_mask = np.abs(u_vals) <= 1e-7 * (1 + sol.h0)
    if not (np.any(top_mask) and np.any(bot_mask)):
        return None
    t_lo, t_hi = float(np.min(tau[top_mask])), float(np.max(tau[top_mask]))
    b_lo, b_hi = float(np.min(tau[bot_mask])), float(np.max(tau[bot_mask]))
    ux = float(surf(x.reshape(1, -1))[0])
    mu = (sol.h0 - ux) / sol.h0  # 0 at the top level, 1 at the free boundary
    tau_x = float(x @ t_dir)
    if mu <= 1e-12:
        # sample sits on the h0 level: it is the top endpoint itself
        tau_top = min(max(tau_x, t_lo), t_hi)
        tau_bot = min(max(tau_x, b_lo), b_hi)
    elif mu >= 1 - 1e-12:
        # sample on the free boundary: bottom endpoint coincides with it
        tau_bot = min(max(tau_x, b_lo), b_hi)
        tau_top = min(max(tau_x, t_lo), t_hi)
    else:
        # tau_x = (1-mu) tau_top + mu tau_bot with each end on its edge
        lo = max(t_lo, (tau_x - mu * b_hi) / (1 - mu))
        hi = min(t_hi, (tau_x - mu * b_lo) / (1 - mu))
        if lo > hi + 1e-9:
            return None
        tau_top = 0.5 * (lo + hi)
        tau_bot = (tau_x - (1 - mu) * tau_top) / mu
    # reconstruct plane points on the two level lines of the piece
    # points satisfy a_i . y + b_i = level and y . t_dir = tau
    def level_point(level, tau_v):
        # y = alpha * n_dir + tau_v * t_dir with a_i.y = level - b_i
        alpha = (level - bi) / float(ai @ n_dir)
        return alpha * n_dir + tau_v * t_dir

    return level_point(sol.h0, tau_top), level_point(0.0, tau_bot)


def check_ruled(
    sol: HomogeneousSolution, samples: int = 100, seed: int = 0, tol: float = 1e-8
) -> RuledCheckReport:
    """Verify the ruled structure of the graph at random sample points.

    For each sampled point of the positivity annulus, a segment through it
    with endpoints at heights ``h0`` and 0 is constructed and the envelope
    is evaluated along it; the report carries the worst deviation from
    linearity and the worst endpoint height error.  Free-boundary samples
    exercise the degenerate case where the sample is itself an endpoint.
    """
    rng = np.random.default_rng(seed)
    fb = sol.free_boundary
    center = sol.domain.interior_point()
    radius = float(np.max(np.linalg.norm(fb - center, axis=1)))
    pts: list[np.ndarray] = []
    while len(pts) < samples:
        p = center + rng.uniform(-radius, radius, size=2)
        inside_fb = float(sol.surface(p.reshape(1, -1))[0]) > 0.0
        if inside_fb and not bool(sol.domain.contains(p.reshape(1, -1))[0]):
            pts.append(p)
    # degenerate samples on the free boundary itself
    k = max(1, len(fb) // 8)
    pts.extend(fb[::k])
    max_dev = 0.0
    max_end = 0.0
    failures = 0
    for p in pts:
        seg = _ruling_segment(sol, np.asarray(p))
        if seg is None:
            failures += 1
            continue
        top, bot = seg
        ts = np.linspace(0.0, 1.0, 33)
        line = top[None, :] + ts[:, None] * (bot - top)[None, :]
        heights = sol.surface(line)
        linear = sol.h0 * (1.0 - ts)
        dev = float(np.max(np.abs(heights - linear)))
        end = max(
            abs(float(sol.surface(top.reshape(1, -1))[0]) - sol.h0),
            abs(float(sol.surface(bot.reshape(1, -1))[0])),
        )
        max_dev = max(max_dev, dev)
        max_end = max(max_end, end)
        if dev > tol or end > tol:
            failures += 1
    return RuledCheckReport(len(pts), max_dev, max_end, failures)


def envelope_vertices_in_strip(
    sol: HomogeneousSolution, tol: float = 1e-9
) -> np.ndarray:
    """Envelope vertices (triple-activity points) with heights strictly
    inside ``(0, h0)``.

    The polytope construction admits none; this returns the offending
    points (empty array when the structural property holds).  Implemented
    by enumerating active triple intersections of the pieces, so it is
    meant for polytope solutions with modest facet counts.
    """
    surf = sol.surface
    n = surf.n_pieces
    if n > 64:
        raise InvalidParam("vertex enumeration is cubic in the piece count; use <= 64 pieces")
    if surf.dim == 2:
        bad: list[np.ndarray] = []
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    A = np.array([surf.a[i] - surf.a[j], surf.a[j] - surf.a[k]])
                    rhs = np.array([surf.b[j] - surf.b[i], surf.b[k] - surf.b[j]])
                    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
                    if abs(det) < 1e-14:
                        continue
                    x = np.linalg.solve(A, rhs)
                    val = float(surf.a[i] @ x + surf.b[i])
                    env = float(surf(x.reshape(1, -1))[0])
                    if abs(val - env) > 1e-9 * (1 + abs(env)):
                        continue  # tie point is not on the envelope
                    if tol < env < sol.h0 - tol:
                        bad.append(x)
        return np.array(bad) if bad else np.zeros((0, 2))
    # d = 3: vertices are active 4-fold intersections
    bad3: list[np.ndarray] = []
    from itertools import combinations

    for quad in combinations(range(n), 4):
        i0 = quad[0]
        A = np.array([surf.a[i0] - surf.a[j] for j in quad[1:]])
        rhs = np.array([surf.b[j] - surf.b[i0] for j in quad[1:]])
        if abs(np.linalg.det(A)) < 1e-14:
            continue
        x = np.linalg.solve(A, rhs)
        val = float(surf.a[i0] @ x + surf.b[i0])
        env = float(surf(x.reshape(1, -1))[0])
        if abs(val - env) > 1e-9 * (1 + abs(env)):
            continue
        if tol < env < sol.h0 - tol:
            bad3.append(x)
    return np.array(bad3) if bad3 else np.zeros((0, 3))
