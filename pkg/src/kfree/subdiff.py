"""Gradient images, subdifferential cells, and weighted measures of
piecewise-linear concave functions.

For a concave ``u`` the cell at a point ``x0`` is the subdifferential of
``-u``: the convex hull of ``{-a_i : piece i active at x0}``.  The measure
of a set of sites integrates ``1/psi(|xi|)`` over their cells; with the
unit weight this is plain Euclidean cell area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DuplicateSites, InvalidParam, OutOfDomain, QuadratureFail, WrongPsi
from .geometry import PLConcaveFunction, polygon_area

#: Default relative tolerance for the adaptive cell quadrature.
QUAD_REL_TOL = 1e-9
#: Maximum subdivision depth of the adaptive quadrature.
QUAD_MAX_DEPTH = 20


@dataclass(frozen=True)
class PsiSpec:
    """Radial weight ``psi(|xi|)`` in the measure ``d xi / psi``.

    Kinds:
      * ``zero``  -- degenerate right-hand side (measure checks only),
      * ``one``   -- unit weight, the plain gradient-image area,
      * ``gauss`` -- ``(1 + |xi|^2)^((d+2)/2)`` for dimension ``d``,
      * ``power`` -- ``(1 + |xi|^2)^(p/2)``.

    All non-zero kinds are positive and nondecreasing in ``|xi|``.
    """

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "one", "gauss", "power"):
            raise InvalidParam(f"unknown psi kind {self.kind!r}")
        if self.kind == "gauss" and self.param not in (2.0, 3.0):
            raise InvalidParam("gauss weight takes the dimension d in {2, 3}")

    @staticmethod
    def zero() -> "PsiSpec":
        return PsiSpec("zero")

    @staticmethod
    def one() -> "PsiSpec":
        return PsiSpec("one")

    @staticmethod
    def gauss(d: int) -> "PsiSpec":
        return PsiSpec("gauss", float(d))

    @staticmethod
    def power(p: float) -> "PsiSpec":
        return PsiSpec("power", float(p))

    def value(self, magnitude: np.ndarray) -> np.ndarray:
        """psi evaluated at gradient magnitudes."""
        m = np.asarray(magnitude, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(m)
        if self.kind == "one":
            return np.ones_like(m)
        if self.kind == "gauss":
            return (1.0 + m * m) ** ((self.param + 2.0) / 2.0)
        return (1.0 + m * m) ** (self.param / 2.0)

    def weight(self, xi: np.ndarray) -> np.ndarray:
        """Integrand ``1/psi(|xi|)`` at gradient-space points (..., 2)."""
        if self.kind == "zero":
            raise WrongPsi("1/psi undefined for the zero weight")
        xi = np.asarray(xi, dtype=float)
        m2 = np.sum(xi * xi, axis=-1)
        if self.kind == "one":
            return np.ones_like(m2)
        if self.kind == "gauss":
            return (1.0 + m2) ** (-(self.param + 2.0) / 2.0)
        return (1.0 + m2) ** (-self.param / 2.0)


@dataclass(frozen=True)
class SubdifferentialCell:
    """Subdifferential of ``-u`` at a site: a convex cell in gradient space.

    ``vertices`` holds 1 point (smooth site), 2 (ridge) or a CCW polygon.
    """

    site: np.ndarray
    vertices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "site", np.asarray(self.site, dtype=float))
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))

    @property
    def area(self) -> float:
        return polygon_area(self.vertices) if self.vertices.shape[0] >= 3 else 0.0

    def clipped(self, radius: float) -> "SubdifferentialCell":
        """Cell intersected with the disk ``|xi| <= radius`` (polygonal cut)."""
        v = self.vertices
        if v.shape[0] < 3:
            return self
        from .geometry import clip_polygon

        m = np.linalg.norm(v, axis=1)
        if np.all(m <= radius):
            return self
        # cut with supporting halfplanes of the disk at 64 directions
        ang = np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)
        poly = v
        for a in ang:
            n = np.array([math.cos(a), math.sin(a)])
            poly = clip_polygon(poly, n, radius)
            if poly.shape[0] == 0:
                break
        return SubdifferentialCell(self.site, poly)


@dataclass(frozen=True)
class MAMeasure:
    """Per-site weighted masses of the gradient image and their total."""

    sites: np.ndarray
    masses: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.masses))


def _hull_ccw(points: np.ndarray) -> np.ndarray:
    """CCW hull polygon of a small 2-d point set; passes through degenerate sets."""
    pts = np.asarray(points, dtype=float)
    uniq: list[np.ndarray] = []
    scale = float(np.max(np.abs(pts))) + 1.0
    for p in pts:
        if not any(np.linalg.norm(p - q) <= 1e-12 * scale for q in uniq):
            uniq.append(p)
    pts = np.array(uniq)
    if pts.shape[0] <= 2:
        return pts
    try:
        hull = ConvexHull(pts)
        return pts[hull.vertices]
    except QhullError:
        # collinear: keep the two extreme points
        d = pts - pts.mean(axis=0)
        u, s, vt = np.linalg.svd(d, full_matrices=False)
        proj = d @ vt[0]
        return pts[[int(np.argmin(proj)), int(np.argmax(proj))]]


def gradient_cell(
    u: PLConcaveFunction,
    x0: np.ndarray,
    active_tol: float = 1e-9,
    domain=None,
) -> SubdifferentialCell:
    """Subdifferential cell of ``-u`` at ``x0``.

    Returns the convex hull of the negated active-piece gradients; a
    singleton for a smoothness point, a segment on a ridge.  With a
    ``domain`` given, ``x0`` must lie inside it.
    """
    x0 = np.asarray(x0, dtype=float)
    if domain is not None and not bool(np.all(domain.contains(x0.reshape(1, -1), tol=1e-12))):
        raise OutOfDomain(f"site {x0.tolist()} is outside the given domain")
    act = u.active_indices(x0, tol=active_tol)
    grads = -u.a[act]
    if grads.shape[0] == 1:
        return SubdifferentialCell(x0, grads)
    return SubdifferentialCell(x0, _hull_ccw(grads))


def _tri_quad(v0, v1, v2, f) -> float:
    """Degree-2 midpoint rule on a triangle (exact for quadratics)."""
    area = 0.5 * abs(
        (v1[0] - v0[0]) * (v2[1] - v0[1]) - (v1[1] - v0[1]) * (v2[0] - v0[0])
    )
    mids = np.array([(v0 + v1) / 2.0, (v1 + v2) / 2.0, (v2 + v0) / 2.0])
    return area / 3.0 * float(np.sum(f(mids)))


def _tri_adaptive(v0, v1, v2, f, tol, depth) -> float:
    coarse = _tri_quad(v0, v1, v2, f)
    m01, m12, m20 = (v0 + v1) / 2.0, (v1 + v2) / 2.0, (v2 + v0) / 2.0
    fine = (
        _tri_quad(v0, m01, m20, f)
        + _tri_quad(m01, v1, m12, f)
        + _tri_quad(m20, m12, v2, f)
        + _tri_quad(m01, m12, m20, f)
    )
    if abs(fine - coarse) <= tol or np.allclose(v0, v1) or np.allclose(v1, v2):
        return fine
    if depth >= QUAD_MAX_DEPTH:
        raise QuadratureFail("triangle quadrature hit max refinement depth")
    half = tol / 4.0
    return (
        _tri_adaptive(v0, m01, m20, f, half, depth + 1)
        + _tri_adaptive(m01, v1, m12, f, half, depth + 1)
        + _tri_adaptive(m20, m12, v2, f, half, depth + 1)
        + _tri_adaptive(m01, m12, m20, f, half, depth + 1)
    )


def psi_weighted_mass(
    cell: SubdifferentialCell | np.ndarray,
    psi: PsiSpec,
    rel_tol: float = QUAD_REL_TOL,
) -> float:
    """Integral of ``1/psi(|xi|)`` over a cell polygon.

    The unit weight integrates exactly (shoelace area); other weights use
    adaptive triangle subdivision to relative tolerance ``rel_tol``.
    Degenerate cells (points, segments) carry zero mass.

    Raises:
        QuadratureFail: tolerance unreachable within the depth limit.
        WrongPsi: for the zero weight.
    """
    verts = cell.vertices if isinstance(cell, SubdifferentialCell) else np.asarray(cell)
    if verts.shape[0] < 3:
        return 0.0
    area = polygon_area(verts)
    if abs(area) <= 1e-300:
        return 0.0
    if area < 0:
        verts = verts[::-1]
        area = -area
    if psi.kind == "zero":
        raise WrongPsi("mass undefined for the zero weight")
    if psi.kind == "one":
        return area
    c = verts.mean(axis=0)
    rough = area * float(psi.weight(c.reshape(1, -1))[0])
    tol_abs = max(rel_tol * abs(rough), 1e-300)
    total = 0.0
    m = verts.shape[0]
    for i in range(m):
        total += _tri_adaptive(c, verts[i], verts[(i + 1) % m], psi.weight, tol_abs / m, 0)
    return total


def ma_measure(
    u: PLConcaveFunction,
    sites: np.ndarray,
    psi: PsiSpec,
    active_tol: float = 1e-9,
    clip_radius: float | None = None,
) -> MAMeasure:
    """Per-site weighted masses of the gradient image of ``-u``.

    Sites must be pairwise distinct.  Ridge and smooth sites carry zero
    mass; only envelope vertices (three or more active pieces) contribute.
    Cells sharing a gradient-space facet overlap in measure zero only, so
    per-site masses add.  ``clip_radius`` bounds cells before quadrature.
    """
    pts = np.atleast_2d(np.asarray(sites, dtype=float))
    if pts.shape[0] >= 2:
        scale = float(np.max(np.abs(pts))) + 1.0
        for i in range(pts.shape[0]):
            d = np.linalg.norm(pts[i + 1 :] - pts[i], axis=1)
            if d.size and np.min(d) <= 1e-12 * scale:
                raise DuplicateSites("two measure sites coincide")
    masses = np.zeros(pts.shape[0])
    for i, x in enumerate(pts):
        cell = gradient_cell(u, x, active_tol=active_tol)
        if clip_radius is not None:
            cell = cell.clipped(clip_radius)
        masses[i] = psi_weighted_mass(cell, psi)
    return MAMeasure(pts, masses)
