"""Certification of computed solutions against the structural properties
of the problem: the three weak-solution clauses, domain comparison, and
the transport mass identity.

Certificates are deterministic given the solution and the seed; each
check records its residual and tolerance.  Free-boundary slope checks are
evaluated where the boundary has a well-defined normal: on edge interiors
for piecewise-linear boundaries, and away from detected corners for grid
boundaries (the almost-everywhere formulation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .elliptic import EllipticSolution, _assemble, _fb_gradients
from .errors import DomainsNotNested, WrongPsi
from .geometry import ConvexDomain, polygon_area
from .homogeneous import HomogeneousSolution, envelope_vertices_in_strip
from .subdiff import PsiSpec, ma_measure

#: Default seed recorded in certificates.
DEFAULT_SEED = 20240801


@dataclass(frozen=True)
class CertCheck:
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "residual": float(self.residual),
            "tolerance": float(self.tolerance),
            "detail": self.detail,
        }


@dataclass(frozen=True)
class Certificate:
    checks: tuple[CertCheck, ...]
    seed: int

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "seed": self.seed,
            "checks": [c.to_dict() for c in self.checks],
        }

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"[{mark}] {c.name}: residual {c.residual:.3e} (tol {c.tolerance:.1e})")
        lines.append(f"overall: {'PASS' if self.overall else 'FAIL'}")
        return "\n".join(lines)


def _domain_area(domain: ConvexDomain) -> float:
    kind = domain.kind
    if kind == "disk":
        return math.pi * domain.radius**2
    if kind == "ellipse":
        return math.pi * domain.a * domain.b
    if kind == "polygon":
        return polygon_area(domain.vertices)
    return polygon_area(domain.points)


def _sample_annulus(sol: HomogeneousSolution, n: int, rng) -> np.ndarray:
    fb = sol.free_boundary
    center = sol.domain.interior_point()
    radius = float(np.max(np.linalg.norm(fb - center, axis=1)))
    pts = []
    while len(pts) < n:
        p = center + rng.uniform(-radius, radius, size=2)
        if float(sol.surface(p.reshape(1, -1))[0]) > 0 and not bool(
            sol.domain.contains(p.reshape(1, -1))[0]
        ):
            pts.append(p)
    return np.array(pts)


def certify_weak_solution(
    sol,
    domain: ConvexDomain,
    h0: float,
    lambda0: float,
    K0: float,
    psi: PsiSpec,
    seed: int = DEFAULT_SEED,
    tol_measure: float | None = None,
    tol_boundary: float | None = None,
    tol_slope: float | None = None,
) -> Certificate:
    """Check the three weak-solution clauses on a computed solution.

    Clause (a): the weighted gradient-image measure of the positivity set
    matches ``K0`` times area (vanishes for ``K0 = 0``); clause (b): the
    boundary data is attained; clause (c): the free-boundary slope equals
    ``lambda0`` at regular boundary points.
    """
    rng = np.random.default_rng(seed)
    checks: list[CertCheck] = []
    if isinstance(sol, HomogeneousSolution):
        tol_a = 1e-8 if tol_measure is None else tol_measure
        tol_b = 1e-10 if tol_boundary is None else tol_boundary
        tol_c = 1e-12 if tol_slope is None else tol_slope
        sites = _sample_annulus(sol, 64, rng)
        mm = ma_measure(sol.surface, sites, PsiSpec.one(), clip_radius=2.0 * lambda0)
        checks.append(
            CertCheck(
                "measure_vanishes_on_positivity_set",
                mm.total < tol_a,
                mm.total,
                tol_a,
                "total gradient-image area over sampled interior sites",
            )
        )
        if sol.surface.n_pieces <= 64:
            bad = envelope_vertices_in_strip(sol)
            checks.append(
                CertCheck(
                    "no_envelope_vertex_in_height_strip",
                    bad.shape[0] == 0,
                    float(bad.shape[0]),
                    0.5,
                    "count of envelope vertices with height strictly inside (0, h0)",
                )
            )
        vals = sol.surface(sol.contacts)
        res_b = float(np.max(np.abs(vals - h0)))
        checks.append(
            CertCheck(
                "boundary_value_attained",
                res_b < tol_b,
                res_b,
                tol_b,
                "max |u - h0| at the supporting-plane contact points",
            )
        )
        slopes = np.linalg.norm(sol.surface.a[sol.fb_edge_pieces], axis=1)
        res_c = float(np.max(np.abs(slopes - lambda0)))
        checks.append(
            CertCheck(
                "free_boundary_slope",
                res_c < tol_c,
                res_c,
                tol_c,
                "max ||grad| - lambda0| over free-boundary edge pieces",
            )
        )
    elif isinstance(sol, EllipticSolution):
        tol_a = 1e-3 if tol_measure is None else tol_measure
        tol_b = 1e-12 if tol_boundary is None else tol_boundary
        tol_c = 1e-3 if tol_slope is None else tol_slope
        masses, areas, _, _ = _assemble(sol.grid, psi, need_jacobian=False)
        res_a = float(np.sum(np.abs(masses - K0 * areas)) / (K0 * np.sum(areas)))
        checks.append(
            CertCheck(
                "measure_balance",
                res_a < tol_a,
                res_a,
                tol_a,
                "relative l1 mismatch of cell masses against K0 * dual areas",
            )
        )
        res_b = float(np.max(np.abs(sol.grid.z[0] - h0)))
        checks.append(
            CertCheck(
                "boundary_value_attained",
                res_b < tol_b,
                res_b,
                tol_b,
                "max |u - h0| on the fixed boundary ring",
            )
        )
        g = _fb_gradients(sol.grid)
        turn = _turn_angles(sol.free_boundary)
        regular = turn < max(math.radians(1.0), 3.0 * float(np.median(turn)))
        if not np.any(regular):
            regular = np.ones_like(regular)
        res_c = float(np.max(np.abs(g[regular] - lambda0)) / lambda0)
        checks.append(
            CertCheck(
                "free_boundary_slope",
                res_c < tol_c,
                res_c,
                tol_c,
                "max relative ||grad| - lambda0| at regular free-boundary nodes",
            )
        )
        concave = _hexagon_convexity_margin(sol, psi)
        checks.append(
            CertCheck(
                "strict_concavity_margin",
                concave > 0.0,
                concave,
                0.0,
                "min cell mass (discrete strict-concavity surrogate); must be positive",
            )
        )
    else:
        raise TypeError("unknown solution type")
    return Certificate(tuple(checks), seed)


def _turn_angles(poly: np.ndarray) -> np.ndarray:
    e = np.roll(poly, -1, axis=0) - poly
    e = e / np.linalg.norm(e, axis=1, keepdims=True)
    prev = np.roll(e, 1, axis=0)
    dots = np.clip(np.einsum("ij,ij->i", prev, e), -1.0, 1.0)
    return np.arccos(dots)


def _hexagon_convexity_margin(sol: EllipticSolution, psi: PsiSpec) -> float:
    masses, _, _, _ = _assemble(sol.grid, psi, need_jacobian=False)
    return float(np.min(masses))


def certify_comparison(
    sol_a,
    sol_b,
    n_samples: int = 1000,
    seed: int = DEFAULT_SEED,
    tol_hull: float = 1e-9,
    tol_order: float = 1e-12,
) -> Certificate:
    """Nested-domain comparison: free-boundary hulls nest and the extended
    solutions are ordered.

    Raises:
        DomainsNotNested: when the first domain is not inside the second.
    """
    dom_a, dom_b = sol_a.domain, sol_b.domain
    probe = dom_a.boundary_point(np.linspace(0.0, 1.0, 256, endpoint=False))
    if not bool(np.all(dom_b.contains(probe, tol=1e-9))):
        raise DomainsNotNested("first domain must be contained in the second")
    fb_a, fb_b = np.asarray(sol_a.free_boundary), np.asarray(sol_b.free_boundary)
    # signed distance of A's vertices outside B's hull
    e = np.roll(fb_b, -1, axis=0) - fb_b
    nrm = np.stack([e[:, 1], -e[:, 0]], axis=1)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    off = np.einsum("ij,ij->i", nrm, fb_b)
    dist = fb_a @ nrm.T - off
    res_hull = float(np.max(dist))
    rng = np.random.default_rng(seed)
    center = dom_b.interior_point()
    radius = float(np.max(np.linalg.norm(fb_b - center, axis=1))) * 1.2
    pts = center + rng.uniform(-radius, radius, size=(n_samples, 2))
    ua = _extended_values(sol_a, pts)
    ub = _extended_values(sol_b, pts)
    res_order = float(np.max(ua - ub))
    checks = (
        CertCheck(
            "free_boundary_hulls_nested",
            res_hull <= tol_hull,
            res_hull,
            tol_hull,
            "max signed distance of the inner hull outside the outer hull",
        ),
        CertCheck(
            "extended_solutions_ordered",
            res_order <= tol_order,
            res_order,
            tol_order,
            "max (inner - outer) over sampled points",
        ),
    )
    return Certificate(checks, seed)


def _extended_values(sol, pts: np.ndarray) -> np.ndarray:
    if isinstance(sol, HomogeneousSolution):
        return sol.extended(pts)
    vals = sol.evaluate(pts)
    inside = sol.domain.contains(pts)
    return np.where(inside, sol.h0, vals)


def certify_ot_mass(sol: EllipticSolution, tol: float = 0.01, seed: int = DEFAULT_SEED) -> Certificate:
    """Transport mass identity for the unit weight in the plane.

    The positivity annulus area must equal ``1/K0`` times the area of its
    gradient image; both sides are computed from the discrete solution
    (polygon areas corrected for the inscribed-chord deficit).

    Raises:
        WrongPsi: for non-unit weights.
    """
    if sol.psi.kind != "one":
        raise WrongPsi("the transport identity is stated for the unit weight")
    S = sol.grid.sectors
    q = (2.0 * math.pi / S) / math.sin(2.0 * math.pi / S)
    lhs = q * polygon_area(sol.free_boundary) - _domain_area(sol.domain)
    inner, outer = sol.gradient_image_curves()
    rhs = q * (polygon_area(outer) - polygon_area(inner)) / sol.K0
    res = abs(lhs - rhs) / abs(lhs)
    checks = (
        CertCheck(
            "transport_mass_identity",
            res < tol,
            res,
            tol,
            f"annulus area {lhs:.6f} vs gradient image / K0 = {rhs:.6f}",
        ),
    )
    return Certificate(checks, seed)
