"""Positive-curvature solves on the annulus: paraboloid super-solutions,
discrete curvature-measure Dirichlet solves, and a trial free-boundary
iteration.

Discretisation.  Nodes sit on rays from an interior point of the domain:
ring 0 on the fixed boundary (height ``h0``), ring R+1 on the current
trial free boundary (height 0), graded rings in between.  The heights
induce a piecewise-linear concave interpolant on a fixed triangulation;
the subdifferential cell of an interior node is the hexagon of the
incident triangle gradients, and the discrete equation asks the weighted
cell mass to equal ``K0`` times the node's barycentric dual area.  The
resulting system is solved by a damped Newton iteration whose Jacobian is
an M-matrix assembled from the cell faces; starting from the restricted
super-solution the heights descend monotonically, mirroring the envelope
characterisation of the minimal solution.

The outer loop moves each free-boundary node along its outward normal in
proportion to the mismatch between the inward normal derivative and the
prescribed slope, with damping; for a cone-like profile the undamped step
is exact, which motivates the thickness scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import ConvexHull

from .errors import (
    ConditionViolated,
    FreeBoundaryCollapse,
    InvalidParam,
    NoConvergence,
    NonAdmissibleBoundary,
    WrongPsi,
    ZeroCurvature,
)
from .geometry import ConvexDomain, DiskDomain, EllipseDomain, polygon_area
from .subdiff import PsiSpec

#: Default absolute tolerance on each node's measure residual.
MA_TOL = 1e-8
#: Default relative tolerance on the free-boundary slope mismatch.
FB_TOL = 1e-3
#: Per-step height change cap as a fraction of the local radial spacing.
STEP_CAP_FRACTION = 0.2


# ---------------------------------------------------------------------------
# existence condition and super-solution
# ---------------------------------------------------------------------------


def check_existence_condition(
    domain: ConvexDomain, h0: float, lambda0: float, K0: float, psi: PsiSpec, d: int = 2
) -> tuple[bool, float]:
    """Curvature bound guaranteeing a nonempty super-solution class.

    Evaluates ``K0^(1/d) <= psi(lambda0)^(-1/d) * kappa0 lambda0^2 /
    (h0 kappa0 + sqrt(lambda0^2 + h0^2 kappa0^2))`` with ``kappa0`` the
    smallest boundary curvature, and returns the flag plus the slack
    margin (bound minus ``K0^(1/d)``).

    Raises:
        ZeroCurvature: for polygonal domains (``kappa0 = 0``).
    """
    if h0 <= 0 or lambda0 <= 0 or K0 < 0:
        raise InvalidParam("need h0, lambda0 > 0 and K0 >= 0")
    if psi.kind == "zero":
        raise WrongPsi("the existence bound needs a positive weight")
    kappa0 = domain.min_curvature()
    if kappa0 <= 0:
        raise ZeroCurvature("elliptic solver needs strictly convex boundary")
    bound = float(psi.value(np.array([lambda0]))[0]) ** (-1.0 / d) * (
        kappa0 * lambda0**2 / (h0 * kappa0 + math.sqrt(lambda0**2 + h0**2 * kappa0**2))
    )
    margin = bound - K0 ** (1.0 / d)
    return margin >= 0.0, margin


@dataclass(frozen=True)
class ParaboloidFamily:
    """Per-contact paraboloid caps sharing one coefficient.

    Each boundary sample ``x_k`` gets the cap ``P_k(x) = h0 + alpha r0^2 -
    alpha |x - z_k|^2`` centred at the inner tangent ball centre ``z_k``
    (radius ``r0 = 1/kappa0``); ``alpha`` is the positive root of
    ``(4 r0^2) alpha^2 + 4 h0 alpha - lambda0^2 = 0``, which makes the
    slope at each cap's own zero circle exactly ``lambda0``.
    """

    contacts: np.ndarray
    centers: np.ndarray
    alpha: float
    r0: float
    h0: float
    lambda0: float

    def quadratic_residual(self) -> float:
        a, r0, h0, l0 = self.alpha, self.r0, self.h0, self.lambda0
        return abs((4.0 * r0 * r0) * a * a + 4.0 * h0 * a - l0 * l0)


class SupersolutionEnvelope:
    """Lower envelope of the paraboloid family (a concave super-solution)."""

    def __init__(self, family: ParaboloidFamily):
        self.family = family
        self.peak = family.h0 + family.alpha * family.r0**2

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        diff = x[..., None, :] - self.family.centers
        d2 = np.max(np.sum(diff * diff, axis=-1), axis=-1)
        return self.peak - self.family.alpha * d2

    def gradient_bound(self) -> float:
        """Slope on the envelope's zero set (exactly the prescribed slope)."""
        return self.family.lambda0

    def zero_on_ray(self, origin: np.ndarray, direction: np.ndarray) -> float:
        """Distance along a ray from an interior point to the zero set."""
        lo, hi = 0.0, 1.0
        while self(origin + hi * direction) > 0:
            hi *= 2.0
            if hi > 1e9:
                raise NoConvergence("super-solution zero set unreachable along ray")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self(origin + mid * direction) > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def build_supersolution(
    domain: ConvexDomain,
    h0: float,
    lambda0: float,
    K0: float,
    psi: PsiSpec,
    n: int = 128,
) -> SupersolutionEnvelope:
    """Envelope of paraboloid caps dominating every solution.

    Requires the curvature existence bound; with it, ``(2 alpha)^d`` is at
    least ``K0 psi(lambda0)``, so each cap (and by the gradient-image
    splitting argument, their envelope) carries at least the required
    measure while its free-boundary slopes never exceed ``lambda0``.

    Raises:
        ConditionViolated: when the curvature bound fails.
    """
    ok, margin = check_existence_condition(domain, h0, lambda0, K0, psi, d=2)
    if not ok:
        raise ConditionViolated(f"curvature existence bound fails (margin {margin:.3e})")
    kappa0 = domain.min_curvature()
    r0 = 1.0 / kappa0
    alpha = lambda0**2 * kappa0 / (
        2.0 * (h0 * kappa0 + math.sqrt(lambda0**2 + h0**2 * kappa0**2))
    )
    t = np.arange(n, dtype=float) / float(n)
    contacts = domain.boundary_point(t)
    normals = domain.outward_normal(t)
    centers = contacts - r0 * normals
    fam = ParaboloidFamily(contacts, centers, alpha, r0, h0, lambda0)
    if fam.quadratic_residual() > 1e-9 * (1.0 + lambda0**2):
        raise ConditionViolated("paraboloid coefficient does not solve its quadratic")
    if (2.0 * alpha) ** 2 < K0 * float(psi.value(np.array([lambda0]))[0]) * (1.0 - 1e-12):
        raise ConditionViolated("cap measure falls short of the required curvature")
    return SupersolutionEnvelope(fam)


# ---------------------------------------------------------------------------
# annulus grid
# ---------------------------------------------------------------------------


from .geometry import ray_boundary_distance as _ray_boundary_distance


@dataclass
class AnnulusGridFunction:
    """Heights on the ray-structured ring grid.

    ``rho`` has shape (R+2, S): ring 0 lies on the fixed boundary, ring
    R+1 on the trial free boundary.  ``z`` matches; ring 0 is pinned to
    ``h0`` and ring R+1 to 0.
    """

    center: np.ndarray
    theta: np.ndarray
    rho: np.ndarray
    z: np.ndarray
    h0: float

    def __post_init__(self):
        R2, S = self.rho.shape
        if self.z.shape != (R2, S) or R2 < 4:
            raise NonAdmissibleBoundary("grid needs >= 2 interior rings and matching heights")
        if self.h0 <= 0:
            raise NonAdmissibleBoundary("inner boundary height must be positive")
        if not (np.allclose(self.z[0], self.h0) and np.allclose(self.z[-1], 0.0)):
            raise NonAdmissibleBoundary("boundary rings must carry h0 and 0 exactly")
        if np.any(self.rho[-1] <= self.rho[0]):
            raise NonAdmissibleBoundary("free boundary ring must enclose the fixed ring")
        self.z[0] = self.h0
        self.z[-1] = 0.0

    @property
    def rings(self) -> int:
        return self.rho.shape[0] - 2

    @property
    def sectors(self) -> int:
        return self.rho.shape[1]

    @property
    def dirs(self) -> np.ndarray:
        return np.stack([np.cos(self.theta), np.sin(self.theta)], axis=1)

    def positions(self) -> np.ndarray:
        return self.center + self.rho[:, :, None] * self.dirs[None, :, :]

    def fb_polyline(self) -> np.ndarray:
        return self.center + self.rho[-1][:, None] * self.dirs

    def inner_polyline(self) -> np.ndarray:
        return self.center + self.rho[0][:, None] * self.dirs

    def copy(self) -> "AnnulusGridFunction":
        return AnnulusGridFunction(
            self.center.copy(), self.theta.copy(), self.rho.copy(), self.z.copy(), self.h0
        )

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        """Bilinear evaluation in the structured (ring, angle) coordinates."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        S = self.sectors
        rel = pts - self.center
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        t0 = self.theta[0]
        frac = ((ang - t0) / (2.0 * math.pi) * S) % S
        k0 = np.floor(frac).astype(int) % S
        k1 = (k0 + 1) % S
        w = frac - np.floor(frac)
        r = np.linalg.norm(rel, axis=1)
        out = np.empty(len(pts))
        for m in range(len(pts)):
            rho_line = (1 - w[m]) * self.rho[:, k0[m]] + w[m] * self.rho[:, k1[m]]
            z_line = (1 - w[m]) * self.z[:, k0[m]] + w[m] * self.z[:, k1[m]]
            if r[m] <= rho_line[0]:
                out[m] = self.h0
            elif r[m] >= rho_line[-1]:
                # extend linearly with the last segment's slope
                s = (z_line[-1] - z_line[-2]) / (rho_line[-1] - rho_line[-2])
                out[m] = z_line[-1] + s * (r[m] - rho_line[-1])
            else:
                out[m] = float(np.interp(r[m], rho_line, z_line))
        return out


def build_annulus_grid(
    domain: ConvexDomain,
    center: np.ndarray,
    theta: np.ndarray,
    rho_fb: np.ndarray,
    h0: float,
    rings: int,
) -> AnnulusGridFunction:
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    rho_in = _ray_boundary_distance(domain, center, dirs)
    if np.any(rho_fb <= rho_in):
        raise FreeBoundaryCollapse("trial free boundary touches the fixed boundary")
    t = np.linspace(0.0, 1.0, rings + 2)
    rho = rho_in[None, :] + t[:, None] * (rho_fb - rho_in)[None, :]
    z = np.zeros_like(rho)
    z[0] = h0
    return AnnulusGridFunction(np.asarray(center, dtype=float), theta, rho, z, h0)


# ---------------------------------------------------------------------------
# cell assembly on the fixed triangulation
# ---------------------------------------------------------------------------


def _perp(v: np.ndarray) -> np.ndarray:
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def _triangle_gradients(pos: np.ndarray, w: np.ndarray):
    """Per-triangle gradients of w, areas, and hat-function gradients.

    Quad (i, k) spans rings i, i+1 and sectors k, k+1 with diagonal
    (i, k)-(i+1, k+1); TA = [(i,k),(i+1,k),(i+1,k+1)], TB = [(i,k),
    (i+1,k+1),(i,k+1)].  Returns gA, gB of shape (R+1, S, 2), signed
    areas aA, aB, and hat gradients hA, hB of shape (R+1, S, 3, 2) so that
    the triangle gradient is ``sum_m w_m * h[..., m, :]``.
    """
    p00 = pos[:-1]
    p10 = pos[1:]
    p11 = np.roll(pos[1:], -1, axis=1)
    p01 = np.roll(pos[:-1], -1, axis=1)
    w00 = w[:-1]
    w10 = w[1:]
    w11 = np.roll(w[1:], -1, axis=1)
    w01 = np.roll(w[:-1], -1, axis=1)

    def grad(pa, pb, pc, wa, wb, wc):
        e1 = pb - pa
        e2 = pc - pa
        det = (e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])[..., None]
        ha = _perp(pc - pb) / det
        hb = _perp(pa - pc) / det
        hc = _perp(pb - pa) / det
        g = wa[..., None] * ha + wb[..., None] * hb + wc[..., None] * hc
        hats = np.stack([ha, hb, hc], axis=-2)
        return g, 0.5 * det[..., 0], hats

    gA, aA, hA = grad(p00, p10, p11, w00, w10, w11)
    gB, aB, hB = grad(p00, p11, p01, w00, w11, w01)
    return gA, gB, aA, aB, hA, hB


def _gather_cells(gA: np.ndarray, gB: np.ndarray, rings: int):
    """Ordered hexagon of incident-triangle gradients per interior node."""
    R = rings
    xi1 = gA[1 : R + 1]
    xi2 = gB[1 : R + 1]
    xi3 = gA[0:R]
    xi4 = np.roll(gB[0:R], 1, axis=1)
    xi5 = np.roll(gA[0:R], 1, axis=1)
    xi6 = np.roll(gB[1 : R + 1], 1, axis=1)
    return np.stack([xi1, xi2, xi3, xi4, xi5, xi6], axis=2)  # (R, S, 6, 2)


#: Neighbor offsets (ring, sector) matching the face between hexagon
#: vertices t and t+1 (cyclic).
_FACE_NEIGHBORS = ((1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1), (1, 0))


def _neighbor_vectors(pos: np.ndarray, rings: int):
    """Edge vectors node->neighbor per face, shape (R, S, 6, 2)."""
    R = rings
    pi = pos[1 : R + 1]
    outs = []
    for dr, dk in _FACE_NEIGHBORS:
        block = pos[1 + dr : R + 1 + dr]
        if dk:
            block = np.roll(block, -dk, axis=1)
        outs.append(block - pi)
    return np.stack(outs, axis=2)


def _dual_areas(aA: np.ndarray, aB: np.ndarray, rings: int, sectors: int) -> np.ndarray:
    """True dual areas of interior nodes.

    Barycentric dual areas on the fixed triangulation, scaled by
    ``dtheta / sin(dtheta)`` so each node's dual region carries the area
    of the curved wedge it represents rather than of its chord polygon
    (the chord deficit otherwise biases the free boundary inward by
    O(dtheta^2)).
    """
    R = rings
    total = (
        aA[1 : R + 1]
        + aB[1 : R + 1]
        + aA[0:R]
        + np.roll(aB[0:R], 1, axis=1)
        + np.roll(aA[0:R], 1, axis=1)
        + np.roll(aB[1 : R + 1], 1, axis=1)
    )
    dtheta = 2.0 * math.pi / sectors
    return (dtheta / math.sin(dtheta)) * total / 3.0


def _cell_masses(cells: np.ndarray, psi: PsiSpec) -> np.ndarray:
    """Weighted mass of each hexagonal cell (signed; positive when admissible)."""
    nxt = np.roll(cells, -1, axis=2)
    cross = cells[..., 0] * nxt[..., 1] - cells[..., 1] * nxt[..., 0]
    if psi.kind == "one":
        return 0.5 * np.sum(cross, axis=2)
    # fan from the vertex mean, degree-2 midpoint rule per fan triangle
    c = cells.mean(axis=2, keepdims=True)
    v0 = np.broadcast_to(c, cells.shape)
    v1, v2 = cells, nxt
    e1 = v1 - v0
    e2 = v2 - v0
    tri_area = 0.5 * (e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])
    m01 = 0.5 * (v0 + v1)
    m12 = 0.5 * (v1 + v2)
    m20 = 0.5 * (v2 + v0)
    wsum = psi.weight(m01) + psi.weight(m12) + psi.weight(m20)
    return np.sum(tri_area * wsum / 3.0, axis=2)


def _assemble(grid: AnnulusGridFunction, psi: PsiSpec, need_jacobian: bool = True):
    """Masses, dual areas and (optionally) the Newton Jacobian.

    The Jacobian is the exact derivative of the hexagon shoelace mass
    (a smooth quadratic form of the heights): the area gradient with
    respect to each hexagon vertex, chained through the triangle hat
    gradients.  For non-unit weights each vertex contribution is scaled by
    the integrand at that vertex, which is the swept-area first-order
    term.
    """
    pos = grid.positions()
    w = -grid.z
    R, S = grid.rings, grid.sectors
    gA, gB, aA, aB, hA, hB = _triangle_gradients(pos, w)
    cells = _gather_cells(gA, gB, R)
    areas = _dual_areas(aA, aB, R, S)
    masses = _cell_masses(cells, psi)
    if not need_jacobian:
        return masses, areas, cells, None
    # dA/dxi_t = perp(xi_{t-1} - xi_{t+1}) / 2, weighted by 1/psi at xi_t
    damat = 0.5 * _perp(np.roll(cells, 1, axis=2) - np.roll(cells, -1, axis=2))
    if psi.kind != "one":
        damat = damat * psi.weight(cells)[..., None]
    # hexagon slots -> (triangle block, row offset, sector shift, local node ids)
    # local ids: position of the centre node and of each slot triangle's nodes
    hA1 = hA[1 : R + 1]
    hB1 = hB[1 : R + 1]
    hA0 = hA[0:R]
    hB0 = hB[0:R]
    hB0m = np.roll(hB0, 1, axis=1)
    hA0m = np.roll(hA0, 1, axis=1)
    hB1m = np.roll(hB1, 1, axis=1)
    # dxi/dz = -hat (since w = -z); accumulate dot(damat_t, hat) per column
    def dot(t, hats, m):
        return -np.einsum("rsx,rsx->rs", damat[:, :, t, :], hats[:, :, m, :])

    n = R * S
    idx = np.arange(n).reshape(R, S)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    def add(dk: int, val: np.ndarray, ring_off: int):
        # rows whose neighbour ring (row + ring_off) is interior
        lo = max(0, -ring_off)
        hi = min(R, R - ring_off)
        if lo >= hi:
            return
        rows.append(idx[lo:hi].ravel())
        colgrid = np.roll(idx, -dk, axis=1)
        cols.append(colgrid[lo + ring_off : hi + ring_off].ravel())
        vals.append(val[lo:hi].ravel())

    # diagonal: the centre node appears in all six slot triangles
    diag = (
        dot(0, hA1, 0)
        + dot(1, hB1, 0)
        + dot(2, hA0, 1)
        + dot(3, hB0m, 1)
        + dot(4, hA0m, 2)
        + dot(5, hB1m, 2)
    )
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    # neighbour (i+1, k): slots 0 (TA(i,k) local 1) and 5 (TB(i,k-1) local 1)
    add(0, dot(0, hA1, 1) + dot(5, hB1m, 1), 1)
    # neighbour (i+1, k+1): slots 0 (local 2) and 1 (TB(i,k) local 1)
    add(1, dot(0, hA1, 2) + dot(1, hB1, 1), 1)
    # neighbour (i, k+1): slots 1 (local 2) and 2 (TA(i-1,k) local 2)
    add(1, dot(1, hB1, 2) + dot(2, hA0, 2), 0)
    # neighbour (i-1, k): slots 2 (local 0) and 3 (TB(i-1,k-1) local 2)
    add(0, dot(2, hA0, 0) + dot(3, hB0m, 2), -1)
    # neighbour (i-1, k-1): slots 3 (local 0) and 4 (TA(i-1,k-1) local 0)
    add(-1, dot(3, hB0m, 0) + dot(4, hA0m, 0), -1)
    # neighbour (i, k-1): slots 4 (local 1) and 5 (TB(i,k-1) local 0)
    add(-1, dot(4, hA0m, 1) + dot(5, hB1m, 0), 0)
    J = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    return masses, areas, cells, J


def _concave_repair(grid: AnnulusGridFunction, margin: float = 1e-4):
    """Per-ray strict concavity repair of the heights (raises sagging nodes).

    The upper concave envelope of (radius, height) along each ray is
    computed with the ends pinned, then a strictly concave bump of size
    ``margin * h0`` at mid-ray is added so every interior node is a strict
    vertex of its local hull.
    """
    R2, S = grid.rho.shape
    t = np.linspace(0.0, 1.0, R2)
    bump = margin * grid.h0 * t * (1.0 - t)
    for k in range(S):
        x = grid.rho[:, k]
        y = grid.z[:, k].copy()
        # upper concave envelope by a monotone stack over the ray points
        hull: list[int] = [0]
        for i in range(1, R2):
            while len(hull) >= 2:
                i0, i1 = hull[-2], hull[-1]
                cross = (x[i1] - x[i0]) * (y[i] - y[i0]) - (y[i1] - y[i0]) * (x[i] - x[i0])
                if cross >= 0:  # middle point below the chord: drop it
                    hull.pop()
                else:
                    break
            hull.append(i)
        env = np.interp(x, x[hull], y[hull])
        grid.z[:, k] = np.maximum(y, env) + bump
    grid.z[0] = grid.h0
    grid.z[-1] = 0.0


def ma_dirichlet_solve(
    grid: AnnulusGridFunction,
    K0: float,
    psi: PsiSpec,
    tol: float = MA_TOL,
    max_iters: int = 80,
) -> AnnulusGridFunction:
    """Solve the discrete curvature-measure equation at fixed boundaries.

    Damped Newton on the node heights: every interior node's weighted cell
    mass is driven to ``K0`` times its dual area.  Steps are capped at a
    fraction of the local radial spacing and backtracked until all cells
    stay positively oriented; starting from a super-solution the heights
    decrease monotonically toward the minimal admissible profile.

    Raises:
        NoConvergence: iteration budget exhausted.
        NonAdmissibleBoundary: malformed boundary data (via the grid).
    """
    if K0 <= 0:
        raise InvalidParam("the elliptic Dirichlet solve needs K0 > 0")
    R, S = grid.rings, grid.sectors
    masses, areas, _, _ = _assemble(grid, psi, need_jacobian=False)
    if np.any(masses <= 0):
        _concave_repair(grid)
    # local mesh size: element diameter combining radial and angular edges
    spacing_r = grid.rho[1:-1] - grid.rho[:-2]
    spacing_t = grid.rho[1:-1] * (2.0 * math.pi / S)
    cap = STEP_CAP_FRACTION * np.hypot(spacing_r, spacing_t)
    for _ in range(max_iters):
        masses, areas, _, J = _assemble(grid, psi)
        res = masses - K0 * areas
        if float(np.max(np.abs(res))) < tol:
            if np.any(masses <= 0):
                raise NoConvergence("converged to an inadmissible height configuration")
            return grid
        nrm = float(np.linalg.norm(res))
        dz = spla.spsolve(J, -res.ravel()).reshape(R, S)
        # scale the whole step so no node exceeds its cap (direction preserved)
        over = float(np.max(np.abs(dz) / cap))
        tau = min(1.0, 1.0 / over) if over > 0 else 1.0
        accepted = None
        for _bt in range(40):
            trial = grid.copy()
            trial.z[1:-1] += tau * dz
            m_try, a_try, _, _ = _assemble(trial, psi, need_jacobian=False)
            if float(np.linalg.norm(m_try - K0 * a_try)) < nrm:
                accepted = trial
                break
            tau *= 0.5
        if accepted is None:
            raise NoConvergence("Newton step cannot reduce the measure residual")
        grid.z = accepted.z
    raise NoConvergence(f"curvature-measure solve: {max_iters} iterations exhausted")


# ---------------------------------------------------------------------------
# free-boundary iteration
# ---------------------------------------------------------------------------


def _fb_outward_normals(fb: np.ndarray) -> np.ndarray:
    e = np.roll(fb, -1, axis=0) - fb
    en = np.stack([e[:, 1], -e[:, 0]], axis=1)
    en /= np.linalg.norm(en, axis=1, keepdims=True)
    n = en + np.roll(en, 1, axis=0)
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def _fb_gradients(grid: AnnulusGridFunction) -> np.ndarray:
    """|grad u| at each free-boundary node by one-sided second-order
    differences along the ray, corrected for the ray/normal angle."""
    rho, z = grid.rho, grid.z
    d1 = rho[-1] - rho[-2]
    dd = rho[-1] - rho[-3]
    z1, z2 = z[-2], z[-3]
    # derivative at the free boundary of the quadratic through
    # (0,0), (-d1,z1), (-dd,z2) in the outward ray coordinate
    c1 = (z2 * d1 * d1 - z1 * dd * dd) / (d1 * dd * (dd - d1))
    normals = _fb_outward_normals(grid.fb_polyline())
    cosang = np.einsum("ij,ij->i", grid.dirs, normals)
    cosang = np.clip(cosang, 0.2, 1.0)
    return np.abs(c1) / cosang


def _inner_gradients(grid: AnnulusGridFunction) -> np.ndarray:
    """|grad u| at each fixed-boundary node (same stencil, inner side)."""
    rho, z = grid.rho, grid.z
    d1 = rho[1] - rho[0]
    dd = rho[2] - rho[0]
    z1 = z[1] - grid.h0
    z2 = z[2] - grid.h0
    c1 = (z1 * dd * dd - z2 * d1 * d1) / (d1 * dd * (dd - d1))
    return np.abs(c1)


def _convexify_rays(center: np.ndarray, dirs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Radii of the convex hull of ``points`` along the rays from ``center``."""
    hull = ConvexHull(points)
    poly = points[hull.vertices]
    m = len(poly)
    rho = np.empty(dirs.shape[0])
    for k, u in enumerate(dirs):
        best = None
        for i in range(m):
            a, b = poly[i], poly[(i + 1) % m]
            e = b - a
            det = u[0] * (-e[1]) - u[1] * (-e[0])
            if abs(det) < 1e-14:
                continue
            rel = a - center
            tpar = (rel[0] * (-e[1]) - rel[1] * (-e[0])) / det
            spar = (u[0] * rel[1] - u[1] * rel[0]) / det
            if tpar > 0 and -1e-9 <= spar <= 1 + 1e-9:
                best = tpar if best is None else max(best, tpar)
        if best is None:
            raise FreeBoundaryCollapse("ray misses the convexified free boundary")
        rho[k] = best
    return rho


@dataclass
class EllipticSolution:
    """Converged (or flagged) positive-curvature solve."""

    domain: ConvexDomain
    h0: float
    lambda0: float
    K0: float
    psi: PsiSpec
    grid: AnnulusGridFunction
    free_boundary: np.ndarray
    residuals: dict
    existence: dict
    iterations: int
    masses: np.ndarray
    areas: np.ndarray

    @property
    def converged(self) -> bool:
        return bool(self.existence.get("converged", False))

    @property
    def fb_radii(self) -> np.ndarray:
        return np.linalg.norm(self.free_boundary - self.grid.center, axis=1)

    def fb_radius(self) -> float:
        return float(np.mean(self.fb_radii))

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        return self.grid.evaluate(pts)

    def gradient_image_curves(self) -> tuple[np.ndarray, np.ndarray]:
        """Inner and outer boundary curves of the annulus gradient image.

        Points are subdifferential values ``-grad u`` along the fixed and
        free boundaries: magnitudes from the one-sided stencils, directions
        along the respective outward normals.
        """
        g_in = _inner_gradients(self.grid)
        n_in = np.stack(
            [
                self.domain.normal_at_boundary_point(p)
                for p in self.grid.inner_polyline()
            ]
        )
        cos_in = np.clip(np.einsum("ij,ij->i", self.grid.dirs, n_in), 0.2, 1.0)
        inner = (g_in / cos_in)[:, None] * n_in
        g_fb = _fb_gradients(self.grid)
        n_fb = _fb_outward_normals(self.free_boundary)
        outer = g_fb[:, None] * n_fb
        return inner, outer


def solve_free_boundary(
    domain: ConvexDomain,
    h0: float,
    lambda0: float,
    K0: float,
    psi: PsiSpec,
    rings: int = 64,
    sectors: int = 32,
    damping: float = 0.5,
    fb_tol: float = FB_TOL,
    ma_tol: float = MA_TOL,
    max_outer: int = 120,
    max_newton: int = 80,
) -> EllipticSolution:
    """Trial free-boundary solve of the positive-curvature problem.

    Alternates Dirichlet curvature-measure solves on the current annulus
    with normal moves of the free-boundary nodes by ``damping * thickness
    * (|g| - lambda0)/lambda0`` (slope too steep grows the annulus), until
    the worst relative slope mismatch drops below ``fb_tol``.  The initial
    trial curve is the super-solution's zero set, so the iterates inherit
    the monotone envelope structure.

    Raises:
        ConditionViolated: the curvature existence bound fails.
        FreeBoundaryCollapse: the trial curve touched the fixed boundary.
        NoConvergence: the inner Newton solve stalled.
    """
    ok, margin = check_existence_condition(domain, h0, lambda0, K0, psi, d=2)
    if not ok:
        raise ConditionViolated(f"curvature existence bound fails (margin {margin:.3e})")
    sup = build_supersolution(domain, h0, lambda0, K0, psi, n=max(64, 2 * sectors))
    center = domain.interior_point()
    frame = getattr(domain, "frame_angle", 0.0)
    theta = frame + 2.0 * math.pi * np.arange(sectors) / sectors
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    rho_in = _ray_boundary_distance(domain, center, dirs)
    rho_fb = np.array([sup.zero_on_ray(center, u) for u in dirs])
    drift_bound = 3.0 * float(np.max(rho_in)) + 2.0 * lambda0 / math.sqrt(K0)

    grid = build_annulus_grid(domain, center, theta, rho_fb, h0, rings)
    grid.z = np.clip(sup(grid.positions()), 0.0, h0)
    grid.z[0] = h0
    grid.z[-1] = 0.0
    _concave_repair(grid)

    history: list[float] = []
    suspected = False
    it = 0
    c_eff = 1.0
    prev_rho: np.ndarray | None = None
    prev_g: np.ndarray | None = None
    for it in range(1, max_outer + 1):
        grid = ma_dirichlet_solve(grid, K0, psi, tol=ma_tol, max_iters=max_newton)
        g = _fb_gradients(grid)
        res_fb = float(np.max(np.abs(g - lambda0)) / lambda0)
        history.append(res_fb)
        if res_fb < fb_tol:
            break
        if len(history) >= 2:
            c_eff = max(0.05, 0.5 * c_eff) if history[-1] >= history[-2] else min(1.0, 1.4 * c_eff)
        thickness = grid.rho[-1] - grid.rho[0]
        # cone-model step; from the second iterate a per-node secant on the
        # boundary-to-slope map replaces the model gain
        step = damping * thickness * (g - lambda0) / lambda0
        if prev_rho is not None:
            drho = grid.rho[-1] - prev_rho
            dg = g - prev_g
            usable = (np.abs(drho) > 1e-12) & (dg / np.where(drho == 0, 1, drho) < -1e-12)
            slope = np.where(usable, dg / np.where(drho == 0, 1, drho), -g / thickness)
            step = -c_eff * (g - lambda0) / slope
        step = np.clip(step, -0.3 * thickness, 0.3 * thickness)
        prev_rho = grid.rho[-1].copy()
        prev_g = g.copy()
        normals = _fb_outward_normals(grid.fb_polyline())
        moved = grid.fb_polyline() + step[:, None] * normals
        rho_new = _convexify_rays(center, dirs, moved)
        if np.any(rho_new <= rho_in + 0.02 * np.mean(thickness)):
            raise FreeBoundaryCollapse("trial free boundary touched the fixed boundary")
        if np.any(rho_new > drift_bound):
            suspected = True
            break
        old = grid
        grid = build_annulus_grid(domain, center, theta, rho_new, h0, rings)
        # warm start: re-sample the previous heights along each ray
        for k in range(sectors):
            grid.z[1:-1, k] = np.interp(grid.rho[1:-1, k], old.rho[:, k], old.z[:, k])
        grid.z[0] = h0
        grid.z[-1] = 0.0
        m, _, _, _ = _assemble(grid, psi, need_jacobian=False)
        if np.any(m <= 0):
            _concave_repair(grid)
    else:
        suspected = True

    masses, areas, _, _ = _assemble(grid, psi, need_jacobian=False)
    ma_rel = float(np.sum(np.abs(masses - K0 * areas)) / (K0 * np.sum(areas)))
    g = _fb_gradients(grid)
    res_fb = float(np.max(np.abs(g - lambda0)) / lambda0)
    converged = res_fb < fb_tol and not suspected
    existence = {
        "condition_curvature_bound_holds": True,
        "condition_margin": margin,
        "converged": converged,
        "nonexistence_suspected": suspected,
    }
    residuals = {
        "ma_residual": ma_rel,
        "fb_gradient_residual": res_fb,
        "fb_history": history,
    }
    return EllipticSolution(
        domain,
        h0,
        lambda0,
        K0,
        psi,
        grid,
        grid.fb_polyline(),
        residuals,
        existence,
        it,
        masses,
        areas,
    )
