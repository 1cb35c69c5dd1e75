"""Convex geometry kernel: slopes of hyperplanes, supporting planes of
prescribed slope, lower envelopes of affine pieces, and convex polygon
operations.

Conventions
-----------
Points of the base space live in ``R^d`` (``d`` in {2, 3}); the graph
direction is the extra ``(d+1)``-th coordinate, referred to as the height.
A hyperplane is stored as ``{X in R^{d+1} : X . normal = offset}`` with a
unit normal.  Planes that bound a concave graph from above carry
``normal[-1] < 0``; with that sign convention the slope vector of a plane
of inclination ``lambda0`` is ``-lambda0 * n`` for the outward base normal
``n``, and ``normal[-1] = -(1 + lambda0^2)^(-1/2)`` exactly.

All operations are pure functions on immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial import QhullError

from .errors import (
    DegenerateSolution,
    EmptyInput,
    InvalidParam,
    NonSmoothBoundaryPoint,
    VerticalPlane,
    ZeroCurvature,
)

#: Unit-normal and duplicate-detection tolerance (relative).
UNIT_TOL = 1e-12
#: Collinearity / degeneracy detection, relative to the data scale.
DEGEN_TOL = 1e-10


# ---------------------------------------------------------------------------
# hyperplanes and slopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hyperplane:
    """Affine hyperplane ``{X : X . normal = offset}`` in ``R^{d+1}``.

    ``normal`` is a unit vector; for planes bounding a surface from above
    the last component is negative.
    """

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        nu = np.asarray(self.normal, dtype=float)
        norm = float(np.linalg.norm(nu))
        if abs(norm - 1.0) > UNIT_TOL:
            raise InvalidParam(f"hyperplane normal must be unit (|nu| = {norm!r})")
        object.__setattr__(self, "normal", nu)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self) -> int:
        """Dimension d of the base space."""
        return self.normal.shape[0] - 1

    def height(self, x: np.ndarray) -> np.ndarray:
        """Height of the plane's graph over base points ``x`` (shape (..., d))."""
        nu = self.normal
        if abs(nu[-1]) <= UNIT_TOL:
            raise VerticalPlane("plane is vertical; it is not a graph")
        x = np.asarray(x, dtype=float)
        return (self.offset - x @ nu[:-1]) / nu[-1]

    def as_affine(self) -> tuple[np.ndarray, float]:
        """Coefficients (a, b) of the graph ``h(x) = a . x + b``."""
        nu = self.normal
        if abs(nu[-1]) <= UNIT_TOL:
            raise VerticalPlane("plane is vertical; it is not a graph")
        return -nu[:-1] / nu[-1], float(self.offset / nu[-1])

    @staticmethod
    def from_affine(a: np.ndarray, b: float, upper: bool = True) -> "Hyperplane":
        """Plane whose graph is ``h(x) = a . x + b``.

        With ``upper=True`` the stored normal has negative last component
        (the convention for planes supporting a concave graph from above).
        """
        a = np.asarray(a, dtype=float)
        nu = np.concatenate([a, [-1.0]])
        nu /= np.linalg.norm(nu)
        if not upper:
            nu = -nu
        # every graph point (x, a.x + b) satisfies X . nu = b * nu[-1]
        return Hyperplane(nu, float(b * nu[-1]))


@dataclass(frozen=True)
class SlopeVector:
    """Slope of a non-vertical hyperplane: the vector ``-nu_bar / nu_last``."""

    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float))

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.components))


def slope_of(plane: Hyperplane) -> SlopeVector:
    """Slope vector of a hyperplane.

    For a plane with unit normal ``nu`` this is ``-nu_bar / nu_{d+1}``
    where ``nu_bar`` collects the first d components.  Its magnitude equals
    ``sqrt(1 - nu_{d+1}^2) / |nu_{d+1}|``.

    Raises:
        VerticalPlane: if ``|nu_{d+1}|`` is below tolerance.
    """
    nu = plane.normal
    if abs(nu[-1]) <= UNIT_TOL:
        raise VerticalPlane("slope undefined for a vertical plane")
    return SlopeVector(-nu[:-1] / nu[-1])


# ---------------------------------------------------------------------------
# convex base domains
# ---------------------------------------------------------------------------


class ConvexDomain:
    """Base class for the convex domain the boundary data lives on.

    Subclasses provide a boundary parametrisation by arc-length fraction
    ``t in [0, 1)``, outward unit normals, curvature queries, and point
    membership.  ``kind`` tags the concrete representation.
    """

    kind: str = "abstract"
    dim: int = 2

    # -- boundary parametrisation ------------------------------------------------
    def boundary_point(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def outward_normal(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def curvature(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def min_curvature(self) -> float:
        raise NotImplementedError

    def perimeter(self) -> float:
        raise NotImplementedError

    # -- queries -------------------------------------------------------------
    def contains(self, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Boolean mask: is ``x`` (shape (..., d)) inside the closed domain."""
        raise NotImplementedError

    def interior_point(self) -> np.ndarray:
        raise NotImplementedError

    def circumradius(self) -> float:
        """Radius of a ball around ``interior_point`` containing the domain."""
        raise NotImplementedError

    def normal_at_boundary_point(self, x: np.ndarray) -> np.ndarray:
        """Outward unit normal at a point of the boundary.

        Raises ``NonSmoothBoundaryPoint`` where the normal is not unique
        (polygon vertices) and ``OutOfDomain``-style errors are left to
        callers; the point is trusted to lie on the boundary up to a
        small tolerance.
        """
        raise NotImplementedError


def _as_vertex_array(vertices: Iterable[Sequence[float]]) -> np.ndarray:
    v = np.asarray(list(vertices), dtype=float)
    if v.ndim != 2 or v.shape[0] < 3:
        raise InvalidParam("polygon needs at least 3 vertices")
    return v


class PolygonDomain(ConvexDomain):
    """Convex polygon given by strictly convex-positioned CCW vertices."""

    kind = "polygon"

    def __init__(self, vertices: Iterable[Sequence[float]], strict: bool = True):
        v = _as_vertex_array(vertices)
        if v.shape[1] != 2:
            raise InvalidParam("PolygonDomain is 2-d; use PolytopeDomain for d=3")
        scale = float(np.max(np.abs(v))) + 1.0
        # drop consecutive duplicates
        keep = np.linalg.norm(v - np.roll(v, 1, axis=0), axis=1) > DEGEN_TOL * scale
        v = v[keep]
        if v.shape[0] < 3:
            raise InvalidParam("polygon degenerates after duplicate removal")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.all(cross < 0):
            v = v[::-1]
            e = np.roll(v, -1, axis=0) - v
            cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if strict and not np.all(cross > DEGEN_TOL * scale * scale):
            raise InvalidParam("vertices are not in strictly convex CCW position")
        self.vertices = v
        self._edges = e
        self._lengths = np.linalg.norm(e, axis=1)
        self._cum = np.concatenate([[0.0], np.cumsum(self._lengths)])
        n = np.stack([e[:, 1], -e[:, 0]], axis=1)
        self._normals = n / self._lengths[:, None]
        self._supports = np.einsum("ij,ij->i", self._normals, v)

    # facet data ---------------------------------------------------------------
    @property
    def facet_normals(self) -> np.ndarray:
        return self._normals

    @property
    def facet_supports(self) -> np.ndarray:
        """Support values s_i with facet i on the line {x . n_i = s_i}."""
        return self._supports

    def perimeter(self) -> float:
        return float(self._cum[-1])

    def boundary_point(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float)) % 1.0
        s = t * self.perimeter()
        idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self._lengths) - 1)
        local = (s - self._cum[idx]) / self._lengths[idx]
        return self.vertices[idx] + local[:, None] * self._edges[idx]

    def outward_normal(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float)) % 1.0
        s = t * self.perimeter()
        idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self._lengths) - 1)
        return self._normals[idx]

    def curvature(self, t: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.atleast_1d(np.asarray(t, dtype=float)))

    def min_curvature(self) -> float:
        raise ZeroCurvature("polygon boundaries have zero facet curvature")

    def contains(self, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        vals = x @ self._normals.T - self._supports
        return np.all(vals <= tol, axis=-1)

    def interior_point(self) -> np.ndarray:
        return polygon_centroid(self.vertices)

    def circumradius(self) -> float:
        c = self.interior_point()
        return float(np.max(np.linalg.norm(self.vertices - c, axis=1)))

    def facet_of_point(self, x: np.ndarray, tol: float = 1e-9) -> int:
        """Index of the facet whose relative interior contains ``x``.

        Raises ``NonSmoothBoundaryPoint`` at vertices (no unique normal).
        """
        x = np.asarray(x, dtype=float)
        scale = float(np.max(np.abs(self.vertices))) + 1.0
        d_vert = np.linalg.norm(self.vertices - x, axis=1)
        if np.any(d_vert <= tol * scale):
            raise NonSmoothBoundaryPoint(
                "point coincides with a polygon vertex; use facet interior points"
            )
        for i in range(len(self.vertices)):
            a, e, L = self.vertices[i], self._edges[i], self._lengths[i]
            s = np.dot(x - a, e) / (L * L)
            if -tol <= s <= 1 + tol:
                perp = abs((x - a)[0] * e[1] - (x - a)[1] * e[0]) / L
                if perp <= tol * scale:
                    return i
        raise NonSmoothBoundaryPoint("point is not on the polygon boundary")

    def normal_at_boundary_point(self, x: np.ndarray) -> np.ndarray:
        return self._normals[self.facet_of_point(x)]


class PolytopeDomain(ConvexDomain):
    """Convex polytope in R^3 given by its vertices (for d=3 envelope solves)."""

    kind = "polygon"
    dim = 3

    def __init__(self, vertices: Iterable[Sequence[float]]):
        v = np.asarray(list(vertices), dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 4:
            raise InvalidParam("PolytopeDomain needs >= 4 vertices in R^3")
        hull = ConvexHull(v)
        self.vertices = v[hull.vertices]
        eqs = hull.equations  # n . x + off <= 0 inside
        normals = eqs[:, :3]
        supports = -eqs[:, 3]
        # merge coplanar simplices into distinct facet planes
        uniq: list[tuple[np.ndarray, float]] = []
        for n, s in zip(normals, supports):
            if not any(
                np.linalg.norm(n - n0) < 1e-9 and abs(s - s0) < 1e-9 for n0, s0 in uniq
            ):
                uniq.append((n, s))
        self._normals = np.array([n for n, _ in uniq])
        self._supports = np.array([s for _, s in uniq])
        self._centroid = v.mean(axis=0)

    @property
    def facet_normals(self) -> np.ndarray:
        return self._normals

    @property
    def facet_supports(self) -> np.ndarray:
        return self._supports

    def contains(self, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        vals = x @ self._normals.T - self._supports
        return np.all(vals <= tol, axis=-1)

    def interior_point(self) -> np.ndarray:
        return self._centroid

    def circumradius(self) -> float:
        return float(np.max(np.linalg.norm(self.vertices - self._centroid, axis=1)))

    def min_curvature(self) -> float:
        raise ZeroCurvature("polytope boundaries have zero facet curvature")


class DiskDomain(ConvexDomain):
    """Disk of given center and radius."""

    kind = "disk"

    def __init__(self, center: Sequence[float] = (0.0, 0.0), radius: float = 1.0):
        if radius <= 0:
            raise InvalidParam("disk radius must be positive")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def perimeter(self) -> float:
        return 2.0 * math.pi * self.radius

    def boundary_point(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ang = 2.0 * math.pi * t
        return self.center + self.radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    def outward_normal(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ang = 2.0 * math.pi * t
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    def curvature(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.full(t.shape, 1.0 / self.radius)

    def min_curvature(self) -> float:
        return 1.0 / self.radius

    def contains(self, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.center, axis=-1) <= self.radius + tol

    def interior_point(self) -> np.ndarray:
        return self.center

    def circumradius(self) -> float:
        return self.radius

    def normal_at_boundary_point(self, x: np.ndarray) -> np.ndarray:
        v = np.asarray(x, dtype=float) - self.center
        r = np.linalg.norm(v)
        if r <= UNIT_TOL:
            raise NonSmoothBoundaryPoint("center of the disk is not a boundary point")
        return v / r


class EllipseDomain(ConvexDomain):
    """Ellipse with semi-axes ``(a, b)``, optionally rotated by ``angle``.

    The boundary parametrisation is by arc length, computed from a dense
    cumulative table so that equispaced parameters give equispaced
    boundary points.  Meshes and plane placements are anchored to the
    ellipse's own axes, which keeps every construction equivariant under
    rotations of the domain.
    """

    kind = "ellipse"

    _TABLE = 8192

    def __init__(
        self,
        center: Sequence[float] = (0.0, 0.0),
        semi_axes: Sequence[float] = (1.0, 1.0),
        angle: float = 0.0,
    ):
        a, b = float(semi_axes[0]), float(semi_axes[1])
        if a <= 0 or b <= 0:
            raise InvalidParam("ellipse semi-axes must be positive")
        self.center = np.asarray(center, dtype=float)
        self.a, self.b = a, b
        self.angle = float(angle)
        c, s = math.cos(self.angle), math.sin(self.angle)
        self._rot = np.array([[c, -s], [s, c]])
        phi = np.linspace(0.0, 2.0 * math.pi, self._TABLE + 1)
        speed = np.hypot(a * np.sin(phi), b * np.cos(phi))
        seg = 0.5 * (speed[1:] + speed[:-1]) * (phi[1] - phi[0])
        self._arc = np.concatenate([[0.0], np.cumsum(seg)])
        self._phi = phi

    def perimeter(self) -> float:
        return float(self._arc[-1])

    def _phi_of_t(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float)) % 1.0
        return np.interp(t * self._arc[-1], self._arc, self._phi)

    def _local_point(self, phi: np.ndarray) -> np.ndarray:
        return np.stack([self.a * np.cos(phi), self.b * np.sin(phi)], axis=-1)

    def boundary_point(self, t: np.ndarray) -> np.ndarray:
        phi = self._phi_of_t(t)
        return self.center + self._local_point(phi) @ self._rot.T

    def outward_normal(self, t: np.ndarray) -> np.ndarray:
        phi = self._phi_of_t(t)
        n = np.stack([self.b * np.cos(phi), self.a * np.sin(phi)], axis=-1)
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        return n @ self._rot.T

    def curvature(self, t: np.ndarray) -> np.ndarray:
        phi = self._phi_of_t(t)
        den = (self.a**2 * np.sin(phi) ** 2 + self.b**2 * np.cos(phi) ** 2) ** 1.5
        return self.a * self.b / den

    def min_curvature(self) -> float:
        return self.a * self.b / max(self.a, self.b) ** 3

    def contains(self, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        loc = (x - self.center) @ self._rot
        q = (loc[..., 0] / self.a) ** 2 + (loc[..., 1] / self.b) ** 2
        return q <= 1.0 + tol

    def interior_point(self) -> np.ndarray:
        return self.center

    def circumradius(self) -> float:
        return max(self.a, self.b)

    def normal_at_boundary_point(self, x: np.ndarray) -> np.ndarray:
        loc = (np.asarray(x, dtype=float) - self.center) @ self._rot
        g = np.array([loc[0] / self.a**2, loc[1] / self.b**2])
        n = g / np.linalg.norm(g)
        return self._rot @ n

    @property
    def frame_angle(self) -> float:
        """Angle anchoring ray and plane placement to the ellipse axes."""
        return self.angle


class SampledDomain(ConvexDomain):
    """Smooth convex boundary given by sample points, outward normals
    and curvatures (CCW order)."""

    kind = "sampled"

    def __init__(self, points: np.ndarray, normals: np.ndarray, curvatures: np.ndarray):
        p = np.asarray(points, dtype=float)
        n = np.asarray(normals, dtype=float)
        k = np.asarray(curvatures, dtype=float)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 4:
            raise InvalidParam("sampled boundary needs >= 4 planar points")
        if n.shape != p.shape or k.shape[0] != p.shape[0]:
            raise InvalidParam("normals/curvatures must match the point count")
        if np.any(k < 0):
            raise InvalidParam("curvatures must be nonnegative")
        self.points = p
        self.normals = n / np.linalg.norm(n, axis=1, keepdims=True)
        self.curvatures = k
        seg = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])

    def perimeter(self) -> float:
        return float(self._cum[-1])

    def _locate(self, t: np.ndarray):
        t = np.atleast_1d(np.asarray(t, dtype=float)) % 1.0
        s = t * self.perimeter()
        m = len(self.points)
        idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, m - 1)
        seg = self._cum[idx + 1] - self._cum[idx]
        local = np.where(seg > 0, (s - self._cum[idx]) / np.where(seg > 0, seg, 1.0), 0.0)
        return idx, local

    def boundary_point(self, t: np.ndarray) -> np.ndarray:
        idx, local = self._locate(t)
        nxt = (idx + 1) % len(self.points)
        return (1 - local)[:, None] * self.points[idx] + local[:, None] * self.points[nxt]

    def outward_normal(self, t: np.ndarray) -> np.ndarray:
        idx, local = self._locate(t)
        nxt = (idx + 1) % len(self.points)
        n = (1 - local)[:, None] * self.normals[idx] + local[:, None] * self.normals[nxt]
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def curvature(self, t: np.ndarray) -> np.ndarray:
        idx, local = self._locate(t)
        nxt = (idx + 1) % len(self.points)
        return (1 - local) * self.curvatures[idx] + local * self.curvatures[nxt]

    def min_curvature(self) -> float:
        k0 = float(np.min(self.curvatures))
        if k0 <= 0:
            raise ZeroCurvature("sampled boundary has a flat point")
        return k0

    def contains(self, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        supports = np.einsum("ij,ij->i", self.normals, self.points)
        vals = x @ self.normals.T - supports
        return np.all(vals <= tol, axis=-1)

    def interior_point(self) -> np.ndarray:
        return polygon_centroid(self.points)

    def circumradius(self) -> float:
        c = self.interior_point()
        return float(np.max(np.linalg.norm(self.points - c, axis=1)))

    def normal_at_boundary_point(self, x: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(self.points - np.asarray(x, dtype=float), axis=1)
        return self.normals[int(np.argmin(d))]


# ---------------------------------------------------------------------------
# polygon operations
# ---------------------------------------------------------------------------


def polygon_area(vertices: np.ndarray) -> float:
    """Signed shoelace area (positive for CCW polygons)."""
    v = np.asarray(vertices, dtype=float)
    if v.shape[0] < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_centroid(vertices: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon (mean of vertices as fallback)."""
    v = np.asarray(vertices, dtype=float)
    a = polygon_area(v)
    if abs(a) < 1e-300:
        return v.mean(axis=0)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    cx = np.sum((x + xn) * cross) / (6.0 * a)
    cy = np.sum((y + yn) * cross) / (6.0 * a)
    return np.array([cx, cy])


def is_convex_ccw(vertices: np.ndarray, strict_tol: float = 0.0) -> bool:
    """All consecutive edge cross products positive (CCW convex position)."""
    v = np.asarray(vertices, dtype=float)
    if v.shape[0] < 3:
        return False
    e = np.roll(v, -1, axis=0) - v
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    return bool(np.all(cross > strict_tol))


def clip_polygon(
    vertices: np.ndarray, normal: Sequence[float], offset: float
) -> np.ndarray:
    """Intersect a convex CCW polygon with the halfplane ``{x . n <= c}``.

    Returns the clipped polygon (possibly empty) with CCW orientation.
    """
    poly, _ = clip_polygon_tagged(vertices, None, normal, offset)
    return poly


def clip_polygon_tagged(
    vertices: np.ndarray,
    tags: np.ndarray | None,
    normal: Sequence[float],
    offset: float,
    new_tag: int = -1,
):
    """Sutherland-Hodgman clip keeping a per-edge tag.

    ``tags[i]`` labels the edge from vertex i to vertex i+1; edges created
    by the clip get ``new_tag``.  Returns ``(polygon, tags)``.
    """
    v = np.asarray(vertices, dtype=float)
    n = np.asarray(normal, dtype=float)
    c = float(offset)
    m = v.shape[0]
    if m == 0:
        return v.reshape(0, 2), np.zeros(0, dtype=int)
    if tags is None:
        tags = np.full(m, -1, dtype=int)
    d = v @ n - c
    out_v: list[np.ndarray] = []
    out_t: list[int] = []
    for i in range(m):
        j = (i + 1) % m
        inside_i, inside_j = d[i] <= 0.0, d[j] <= 0.0
        if inside_i:
            out_v.append(v[i])
            out_t.append(int(tags[i]))
        if inside_i != inside_j:
            t = d[i] / (d[i] - d[j])
            out_v.append(v[i] + t * (v[j] - v[i]))
            # edge leaving the halfplane starts the cut edge; edge entering
            # continues the original edge's tag
            out_t.append(new_tag if inside_i else int(tags[i]))
    if len(out_v) < 3:
        return np.zeros((0, 2)), np.zeros(0, dtype=int)
    poly = np.array(out_v)
    tg = np.array(out_t, dtype=int)
    # remove duplicate consecutive vertices produced by touching clips
    scale = float(np.max(np.abs(poly))) + 1.0
    keep = np.linalg.norm(poly - np.roll(poly, 1, axis=0), axis=1) > 1e-13 * scale
    if not np.all(keep):
        poly = poly[keep]
        tg = tg[keep]
    if poly.shape[0] < 3:
        return np.zeros((0, 2)), np.zeros(0, dtype=int)
    return poly, tg


def halfplane_intersection(
    normals: np.ndarray,
    offsets: np.ndarray,
    bbox_center: np.ndarray,
    bbox_radius: float,
    tags: np.ndarray | None = None,
):
    """Intersection polygon of halfplanes ``{x . n_i <= c_i}``.

    Clipping starts from a large square around ``bbox_center``; if any edge
    of that square survives, the true intersection was not bounded by the
    halfplanes and the caller decides what that means.  Returns
    ``(polygon, edge_tags)`` with ``edge_tags[i]`` the index of the
    halfplane cutting edge i (or -1 for a surviving frame edge).
    """
    r = float(bbox_radius)
    c = np.asarray(bbox_center, dtype=float)
    poly = c + r * np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    etags = np.full(4, -1, dtype=int)
    normals = np.asarray(normals, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    order = range(len(offsets)) if tags is None else tags
    for i, tag in zip(range(len(offsets)), order):
        poly, etags = clip_polygon_tagged(poly, etags, normals[i], offsets[i], int(tag))
        if poly.shape[0] == 0:
            return poly, etags
    return poly, etags


# ---------------------------------------------------------------------------
# piecewise-linear concave functions (lower envelopes of affine pieces)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PLConcaveFunction:
    """Finite lower envelope ``u(x) = min_i (a_i . x + b_i)`` over R^d."""

    a: np.ndarray  # (n, d)
    b: np.ndarray  # (n,)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.shape[0] != b.shape[0] or a.shape[0] == 0:
            raise EmptyInput("pieces must be a nonempty matched list")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidParam("piece coefficients must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n_pieces(self) -> int:
        return self.a.shape[0]

    @property
    def dim(self) -> int:
        return self.a.shape[1]

    def values_by_piece(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        # elementwise broadcast instead of matmul: per-piece values are then
        # bitwise independent of which other pieces are stored, so pruning
        # never changes evaluated values
        return np.sum(x[..., None, :] * self.a, axis=-1) + self.b

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Envelope value at points ``x`` of shape (..., d) (or a single point)."""
        vals = self.values_by_piece(x)
        return np.min(vals, axis=-1)

    def active_indices(self, x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Indices of pieces attaining the min at a single point ``x``.

        ``tol`` is absolute on the height scale of the envelope at ``x``.
        """
        vals = self.values_by_piece(np.asarray(x, dtype=float).reshape(1, -1))[0]
        m = float(np.min(vals))
        return np.flatnonzero(vals <= m + tol * (1.0 + abs(m)))

    def argmin_piece(self, x: np.ndarray) -> int:
        """Lowest-index piece attaining the min at a single point (tie break)."""
        vals = self.values_by_piece(np.asarray(x, dtype=float).reshape(1, -1))[0]
        return int(np.argmin(vals))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Gradient at a smoothness point (lowest-index active piece on ties)."""
        return self.a[self.argmin_piece(x)]

    def active_region(
        self, i: int, bbox_center: np.ndarray, bbox_radius: float
    ) -> np.ndarray:
        """Polygon (d=2) where piece ``i`` attains the envelope, clipped to a box."""
        if self.dim != 2:
            raise InvalidParam("active_region is implemented for d=2")
        others = [j for j in range(self.n_pieces) if j != i]
        normals = self.a[i] - self.a[others]
        offsets = self.b[others] - self.b[i]
        poly, _ = halfplane_intersection(normals, offsets, bbox_center, bbox_radius)
        return poly


def _dedupe_pieces(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Indices of pieces after removing duplicates and dominated parallels."""
    n = a.shape[0]
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1.0)
    keep: list[int] = []
    for i in range(n):
        dup = False
        for j in keep:
            if np.linalg.norm(a[i] - a[j]) <= DEGEN_TOL * scale:
                # parallel: only the lower offset can ever be active
                if b[i] < b[j] - DEGEN_TOL * scale:
                    keep.remove(j)
                else:
                    dup = True
                break
        if not dup:
            keep.append(i)
    return np.array(sorted(keep), dtype=int)


def _extreme_point_mask(points: np.ndarray) -> np.ndarray:
    """Mask of extreme points of a point set in any dimension (recursive on rank)."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if n <= 2:
        return np.ones(n, dtype=bool)
    center = pts.mean(axis=0)
    q = pts - center
    u, s, vt = np.linalg.svd(q, full_matrices=False)
    rank = int(np.sum(s > max(s[0], 1e-30) * 1e-10)) if s.size else 0
    if rank == 0:
        mask = np.zeros(n, dtype=bool)
        mask[0] = True
        return mask
    if rank == 1:
        proj = q @ vt[0]
        mask = np.zeros(n, dtype=bool)
        mask[int(np.argmin(proj))] = True
        mask[int(np.argmax(proj))] = True
        return mask
    if rank < pts.shape[1]:
        return _extreme_point_mask(q @ vt[:rank].T)
    hull = ConvexHull(pts)
    mask = np.zeros(n, dtype=bool)
    mask[hull.vertices] = True
    return mask


def _lower_hull_vertex_mask(dual: np.ndarray) -> np.ndarray:
    """Vertices of the lower convex hull (with respect to the last coordinate).

    ``dual`` has shape (n, m); a row is a dual point whose first m-1
    coordinates are slopes and whose last coordinate is the offset.  A
    piece of a min-envelope is active on a set of positive measure exactly
    when its dual point is such a vertex.  Degenerate configurations are
    reduced by rank before calling qhull.
    """
    pts = np.asarray(dual, dtype=float)
    n, m = pts.shape
    if n == 1:
        return np.ones(1, dtype=bool)
    if m == 1:
        mask = np.zeros(n, dtype=bool)
        mask[int(np.argmin(pts[:, 0]))] = True
        return mask
    slopes, offs = pts[:, :-1], pts[:, -1]
    scale = max(float(np.max(np.abs(pts))), 1.0)
    # rank of the slope part decides whether the envelope genuinely varies
    # in all base directions
    qs = slopes - slopes.mean(axis=0)
    us, ss, vts = np.linalg.svd(qs, full_matrices=False)
    rank_a = int(np.sum(ss > max(ss[0] if ss.size else 0.0, 1e-30) * 1e-10))
    if rank_a < m - 1:
        if rank_a == 0:
            mask = np.zeros(n, dtype=bool)
            mask[int(np.argmin(offs))] = True
            return mask
        reduced = np.column_stack([qs @ vts[:rank_a].T, offs])
        return _lower_hull_vertex_mask(reduced)
    # full slope rank; check whether offsets are affinely dependent on slopes
    q = pts - pts.mean(axis=0)
    u, s, vt = np.linalg.svd(q, full_matrices=False)
    rank = int(np.sum(s > max(s[0], 1e-30) * 1e-10))
    if rank < m:
        # offsets affine in slopes: all pieces pass through a common lifted
        # point, so the active ones are the extreme slopes
        return _extreme_point_mask(slopes)
    try:
        hull = ConvexHull(pts)
    except QhullError:
        jitter = pts + 1e-12 * scale * np.random.default_rng(0).standard_normal(pts.shape)
        hull = ConvexHull(jitter)
    lower = hull.equations[:, m - 1] < -1e-12
    idx = np.unique(hull.simplices[lower])
    vert = set(hull.vertices.tolist())
    mask = np.zeros(n, dtype=bool)
    for i in idx:
        if int(i) in vert:
            mask[int(i)] = True
    if not mask.any():
        mask[int(np.argmin(offs))] = True
    return mask


def lower_envelope(pieces: Sequence[tuple[np.ndarray, float]] | PLConcaveFunction) -> PLConcaveFunction:
    """Pointwise min of affine pieces with inactive pieces pruned.

    Accepts a list of ``(a, b)`` pairs or an unpruned ``PLConcaveFunction``.
    A piece is kept when it attains the min on a set of positive measure,
    detected as vertex membership on the lower convex hull of the dual
    points ``(a_i, b_i)``.

    Raises:
        EmptyInput: for an empty piece list.
    """
    if isinstance(pieces, PLConcaveFunction):
        a, b = pieces.a, pieces.b
    else:
        pieces = list(pieces)
        if not pieces:
            raise EmptyInput("lower_envelope of no pieces")
        a = np.array([np.asarray(p[0], dtype=float) for p in pieces])
        b = np.array([float(p[1]) for p in pieces])
    keep = _dedupe_pieces(a, b)
    a, b = a[keep], b[keep]
    dual = np.column_stack([a, b])
    mask = _lower_hull_vertex_mask(dual)
    return PLConcaveFunction(a[mask], b[mask])


def envelope_from_planes(planes: Sequence[Hyperplane]) -> PLConcaveFunction:
    """Lower envelope of hyperplane graphs."""
    if not planes:
        raise EmptyInput("no planes")
    ab = [p.as_affine() for p in planes]
    return lower_envelope(ab)


# ---------------------------------------------------------------------------
# supporting planes of prescribed slope
# ---------------------------------------------------------------------------


def ray_boundary_distance(
    domain: ConvexDomain, center: np.ndarray, dirs: np.ndarray
) -> np.ndarray:
    """Distance from an interior point to the boundary along unit rays."""
    center = np.asarray(center, dtype=float)
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    if isinstance(domain, DiskDomain) and np.allclose(center, domain.center):
        return np.full(dirs.shape[0], domain.radius)
    if isinstance(domain, EllipseDomain) and np.allclose(center, domain.center):
        loc = dirs @ domain._rot  # ray directions in the ellipse frame
        q = (loc[:, 0] / domain.a) ** 2 + (loc[:, 1] / domain.b) ** 2
        return 1.0 / np.sqrt(q)
    out = np.empty(dirs.shape[0])
    for k, u in enumerate(dirs):
        lo, hi = 0.0, 1.0
        while bool(domain.contains((center + hi * u).reshape(1, -1))[0]):
            hi *= 2.0
        for _ in range(120):
            mid = 0.5 * (lo + hi)
            if bool(domain.contains((center + mid * u).reshape(1, -1))[0]):
                lo = mid
            else:
                hi = mid
        out[k] = 0.5 * (lo + hi)
    return out


def support_plane_with_slope(
    domain: ConvexDomain, x: np.ndarray, h0: float, lambda0: float
) -> Hyperplane:
    """Supporting plane through the lifted boundary point ``(x, h0)`` with
    slope magnitude ``lambda0``, descending away from the domain.

    The graph of the returned plane is ``h(y) = h0 - lambda0 (y - x) . n``
    for the outward unit normal ``n`` at ``x``; by convexity it is >= h0 on
    the closure of the domain.

    Raises:
        InvalidParam: for non-positive ``lambda0`` or ``h0``.
        NonSmoothBoundaryPoint: at polygon vertices.
    """
    if lambda0 <= 0:
        raise InvalidParam("lambda0 must be positive")
    if h0 <= 0:
        raise InvalidParam("h0 must be positive")
    x = np.asarray(x, dtype=float)
    n = domain.normal_at_boundary_point(x)
    d = x.shape[0]
    c = 1.0 / math.sqrt(1.0 + lambda0 * lambda0)
    nu = np.empty(d + 1)
    nu[:d] = -lambda0 * c * n
    nu[d] = -c
    offset = float(np.dot(nu[:d], x) + nu[d] * h0)
    return Hyperplane(nu, offset)


def plane_from_contact(x: np.ndarray, n: np.ndarray, h0: float, lambda0: float) -> tuple[np.ndarray, float]:
    """Affine coefficients (a, b) of the slope-``lambda0`` support plane
    through ``(x, h0)`` with outward base normal ``n``."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    a = -lambda0 * n
    b = float(h0 + lambda0 * np.dot(n, x))
    return a, b
