"""Solver orchestration: run a configured solve, certify it, export
artifacts, and sweep parameter grids.

Exit codes: 0 converged and certified, 2 nonexistence suspected, 1 error.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from pathlib import Path

import numpy as np

from . import io as kio
from .config import RunConfig
from .elliptic import (
    EllipticSolution,
    check_existence_condition,
    solve_free_boundary,
)
from .errors import (
    ConditionViolated,
    FreeBoundaryCollapse,
    KfreeError,
    NoSolution,
    ZeroCurvature,
)
from .geometry import (
    ConvexDomain,
    DiskDomain,
    EllipseDomain,
    PolygonDomain,
    PolytopeDomain,
    ray_boundary_distance,
)
from .homogeneous import HomogeneousSolution, solve_polytope, solve_smooth
from .oracles import RadialProfile, cone, radial_case1, radial_case2_d2, radial_shoot
from .subdiff import PsiSpec
from .verify import certify_ot_mass, certify_weak_solution

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NONEXISTENCE = 2


def build_domain(cfg: RunConfig) -> ConvexDomain:
    om = cfg.omega
    if om.kind == "disk":
        return DiskDomain(om.center, om.radius)
    if om.kind == "ellipse":
        return EllipseDomain(om.center, om.semi_axes, om.angle)
    if om.kind == "polygon":
        if cfg.dimension == 3:
            return PolytopeDomain(om.vertices)
        return PolygonDomain(om.vertices)
    # sampled: estimate normals/curvatures from the closed polyline
    pts = np.asarray(om.vertices, dtype=float)
    nxt = np.roll(pts, -1, axis=0) - pts
    prv = pts - np.roll(pts, 1, axis=0)
    tan = nxt / np.linalg.norm(nxt, axis=1, keepdims=True) + prv / np.linalg.norm(
        prv, axis=1, keepdims=True
    )
    tan /= np.linalg.norm(tan, axis=1, keepdims=True)
    normals = np.stack([tan[:, 1], -tan[:, 0]], axis=1)
    ang = np.arctan2(tan[:, 1], tan[:, 0])
    dang = np.abs((np.diff(np.concatenate([ang, ang[:1]])) + math.pi) % (2 * math.pi) - math.pi)
    ds = np.linalg.norm(nxt, axis=1)
    curv = dang / np.where(ds > 0, ds, 1.0)
    from .geometry import SampledDomain

    return SampledDomain(pts, normals, curv)


def psi_from_config(cfg: RunConfig) -> PsiSpec:
    if cfg.psi == "zero":
        return PsiSpec.zero()
    if cfg.psi == "one":
        return PsiSpec.one()
    if cfg.psi == "gauss":
        return PsiSpec.gauss(cfg.dimension)
    return PsiSpec.power(cfg.psi_power)


# ---------------------------------------------------------------------------
# surface meshing for export
# ---------------------------------------------------------------------------


def _annulus_mesh(center, theta, rho, z, h0):
    """Vertices/faces of the graph over the ring grid plus the plateau fan."""
    S = theta.shape[1] if theta.ndim == 2 else theta.shape[0]
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    pos = center + rho[:, :, None] * dirs[None, :, :]
    R2 = rho.shape[0]
    verts = [np.concatenate([pos.reshape(-1, 2), z.reshape(-1, 1)], axis=1)]
    nv = R2 * S

    def vid(i, k):
        return i * S + (k % S)

    faces = []
    for i in range(R2 - 1):
        for k in range(S):
            faces.append([vid(i, k), vid(i + 1, k), vid(i + 1, k + 1)])
            faces.append([vid(i, k), vid(i + 1, k + 1), vid(i, k + 1)])
    # plateau fan over the domain at height h0
    verts.append(np.array([[center[0], center[1], h0]]))
    cidx = nv
    for k in range(S):
        faces.append([cidx, vid(0, k), vid(0, k + 1)])
    return np.concatenate(verts, axis=0), np.array(faces, dtype=int)


def _surface_mesh_homogeneous(sol: HomogeneousSolution, rings: int = 16):
    center = sol.domain.interior_point()
    fb = sol.free_boundary
    rel = fb - center
    theta = np.arctan2(rel[:, 1], rel[:, 0])
    order = np.argsort(theta)
    theta = theta[order]
    rho_fb = np.linalg.norm(rel, axis=1)[order]
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    rho_in = ray_boundary_distance(sol.domain, center, dirs)
    t = np.linspace(0.0, 1.0, rings + 2)
    rho = rho_in[None, :] + t[:, None] * (rho_fb - rho_in)[None, :]
    pos = center + rho[:, :, None] * dirs[None, :, :]
    z = sol.surface(pos)
    z[0] = np.minimum(z[0], sol.h0)
    z[-1] = 0.0
    return _annulus_mesh(center, theta, rho, z, sol.h0)


def _surface_mesh_elliptic(sol: EllipticSolution):
    g = sol.grid
    return _annulus_mesh(g.center, g.theta, g.rho, g.z, g.h0)


def _surface_mesh_oracle(prof: RadialProfile, center, sectors: int = 64, rings: int = 32):
    theta = 2.0 * math.pi * np.arange(sectors) / sectors
    t = np.linspace(0.0, 1.0, rings + 2)
    radii = prof.R0 + t * (prof.r_fb - prof.R0)
    rho = np.tile(radii[:, None], (1, sectors))
    z = np.tile(prof.v(radii)[:, None], (1, sectors))
    z[-1] = 0.0
    return _annulus_mesh(np.asarray(center, dtype=float), theta, rho, z, prof.h0)


# ---------------------------------------------------------------------------
# radial existence screening (disk domains)
# ---------------------------------------------------------------------------


def radial_flags(cfg: RunConfig) -> dict | None:
    """Closed-form radial existence data for centred-disk runs (unit weight)."""
    if cfg.omega.kind != "disk" or cfg.K0 <= 0 or cfg.psi != "one":
        return None
    R0, h0, l0, K0 = cfg.omega.radius, cfg.h0, cfg.lambda0, cfg.K0
    p1 = radial_case1(2, R0, h0, K0)
    if abs(p1.lambda0 - l0) <= 1e-9 * (1 + l0):
        return {
            "case": "paraboloid",
            "exists_closed_form": True,
            "margin_closed_form": 0.0,
            "margin_consistent": 0.0,
            "profile_found": True,
            "fb_radius": p1.r_fb,
        }
    c2 = radial_case2_d2(R0, h0, l0, K0)
    return {
        "case": "nonzero_constant",
        "exists_closed_form": bool(c2.exists),
        "margin_closed_form": c2.margin,
        "margin_consistent": c2.margin_consistent,
        "profile_found": bool(c2.has_profile),
        "fb_radius": c2.r_fb,
    }


def _fb_stats(fb: np.ndarray, center) -> dict:
    r = np.linalg.norm(fb - np.asarray(center, dtype=float), axis=1)
    return {
        "radius_mean": float(np.mean(r)),
        "radius_rel_std": float(np.std(r) / np.mean(r)),
        "n_vertices": int(fb.shape[0]),
    }


def run(cfg: RunConfig, out_dir: str | Path, quiet: bool = False, artifacts: bool = True):
    """Execute the configured solver and write report plus artifacts.

    Returns ``(report, exit_code)``; the report is also written to the
    configured JSON path inside ``out_dir``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    report: dict = {"config": cfg.to_dict(), "solver": cfg.solver}
    code = EXIT_OK
    timings: dict = {}
    try:
        domain = build_domain(cfg)
        psi = psi_from_config(cfg)
        if cfg.solver == "homogeneous":
            code = _run_homogeneous(cfg, domain, out, report, timings, artifacts)
        elif cfg.solver == "elliptic":
            code = _run_elliptic(cfg, domain, psi, out, report, timings, artifacts)
        else:
            code = _run_oracle(cfg, domain, psi, out, report, timings, artifacts)
    except KfreeError as exc:
        report["status"] = "error"
        report["error"] = f"{type(exc).__name__}: {exc}"
        code = EXIT_ERROR
    timings["total_s"] = time.perf_counter() - t_start
    report["timings"] = timings
    report["exit_code"] = code
    report_path = out / cfg.out_report
    kio.write_report(report_path, report)
    report.setdefault("artifacts", {})["report"] = str(report_path)
    if not quiet:
        print(f"status: {report.get('status')} (exit {code}); report: {report_path}")
    return report, code


def _run_homogeneous(cfg, domain, out, report, timings, artifacts):
    t0 = time.perf_counter()
    if cfg.omega.kind == "polygon":
        sol = solve_polytope(domain, cfg.h0, cfg.lambda0)
    else:
        sol = solve_smooth(domain, cfg.h0, cfg.lambda0, cfg.n_planes)
    timings["solve_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    cert = certify_weak_solution(
        sol, domain, cfg.h0, cfg.lambda0, 0.0, PsiSpec.zero(), seed=cfg.seed or 20240801
    )
    timings["certify_s"] = time.perf_counter() - t0
    report["certificates"] = {"weak_solution": cert.to_dict()}
    report["existence"] = {"exists": True, "converged": True}
    report["residuals"] = {
        "measure_total": cert.checks[0].residual,
        "boundary": next(c.residual for c in cert.checks if c.name == "boundary_value_attained"),
        "fb_slope": next(c.residual for c in cert.checks if c.name == "free_boundary_slope"),
    }
    if sol.fb3d is None:
        report["free_boundary"] = _fb_stats(sol.free_boundary, domain.interior_point())
        if artifacts:
            kio.write_free_boundary_csv(out / cfg.out_free_boundary, sol.free_boundary)
            verts, faces = _surface_mesh_homogeneous(sol)
            kio.write_obj(out / cfg.out_surface, verts, faces)
            report["artifacts"] = {
                "surface": str(out / cfg.out_surface),
                "free_boundary": str(out / cfg.out_free_boundary),
            }
    else:
        report["free_boundary"] = {"n_vertices": int(sol.fb3d.vertices.shape[0])}
        report["free_boundary_vertices"] = sol.fb3d.vertices.tolist()
    report["status"] = "converged" if cert.overall else "certification_failed"
    return EXIT_OK if cert.overall else EXIT_ERROR


def _run_elliptic(cfg, domain, psi, out, report, timings, artifacts):
    ok, margin = True, float("nan")
    try:
        ok, margin = check_existence_condition(domain, cfg.h0, cfg.lambda0, cfg.K0, psi, d=2)
    except ZeroCurvature:
        raise
    radial = radial_flags(cfg)
    existence = {
        "condition_curvature_bound_holds": bool(ok),
        "condition_margin": margin,
    }
    if radial is not None:
        existence["radial"] = radial
    if not ok:
        existence["converged"] = False
        existence["nonexistence_suspected"] = True
        reasons = ["curvature_bound_exceeded"]
        if radial is not None and not radial["profile_found"]:
            reasons.append("radial_zero_level_unreachable")
        existence["reasons"] = reasons
        report["existence"] = existence
        report["status"] = "nonexistence_suspected"
        return EXIT_NONEXISTENCE
    t0 = time.perf_counter()
    try:
        sol = solve_free_boundary(
            domain,
            cfg.h0,
            cfg.lambda0,
            cfg.K0,
            psi,
            rings=cfg.rings,
            sectors=cfg.sectors,
            damping=cfg.damping,
            fb_tol=cfg.tol_fb,
            ma_tol=cfg.tol_ma,
        )
    except (FreeBoundaryCollapse, ConditionViolated) as exc:
        timings["solve_s"] = time.perf_counter() - t0
        existence["converged"] = False
        existence["nonexistence_suspected"] = True
        existence["reasons"] = [type(exc).__name__]
        if radial is not None and not radial["profile_found"]:
            existence["reasons"].append("radial_zero_level_unreachable")
        report["existence"] = existence
        report["status"] = "nonexistence_suspected"
        return EXIT_NONEXISTENCE
    timings["solve_s"] = time.perf_counter() - t0
    existence.update(sol.existence)
    report["existence"] = existence
    report["residuals"] = {
        k: v for k, v in sol.residuals.items() if isinstance(v, float)
    }
    report["free_boundary"] = _fb_stats(sol.free_boundary, sol.grid.center)
    if sol.existence.get("nonexistence_suspected"):
        report["status"] = "nonexistence_suspected"
        return EXIT_NONEXISTENCE
    t0 = time.perf_counter()
    cert = certify_weak_solution(
        sol, domain, cfg.h0, cfg.lambda0, cfg.K0, psi, seed=cfg.seed or 20240801
    )
    certs = {"weak_solution": cert.to_dict()}
    overall = cert.overall
    if psi.kind == "one":
        ot = certify_ot_mass(sol)
        certs["transport_mass"] = ot.to_dict()
        overall = overall and ot.overall
    timings["certify_s"] = time.perf_counter() - t0
    report["certificates"] = certs
    if artifacts:
        kio.write_free_boundary_csv(out / cfg.out_free_boundary, sol.free_boundary)
        verts, faces = _surface_mesh_elliptic(sol)
        kio.write_obj(out / cfg.out_surface, verts, faces)
        report["artifacts"] = {
            "surface": str(out / cfg.out_surface),
            "free_boundary": str(out / cfg.out_free_boundary),
        }
    report["status"] = "converged" if overall else "certification_failed"
    return EXIT_OK if overall else EXIT_ERROR


def _run_oracle(cfg, domain, psi, out, report, timings, artifacts):
    if cfg.omega.kind != "disk":
        from .errors import InvalidParam

        raise InvalidParam("the oracle solver needs a disk domain")
    R0 = cfg.omega.radius
    t0 = time.perf_counter()
    existence: dict = {}
    prof = None
    if cfg.K0 == 0:
        prof = cone(R0, cfg.h0, cfg.lambda0)
        existence["exists"] = True
    elif cfg.psi == "one":
        radial = radial_flags(cfg)
        existence["radial"] = radial
        existence["exists"] = radial["profile_found"]
        if radial["profile_found"]:
            if radial["case"] == "paraboloid":
                prof = radial_case1(2, R0, cfg.h0, cfg.K0)
            else:
                prof = radial_case2_d2(R0, cfg.h0, cfg.lambda0, cfg.K0).profile
        if radial is not None and not radial["exists_closed_form"]:
            existence.setdefault("reasons", []).append("radial_zero_level_unreachable")
    else:
        try:
            prof = radial_shoot(2, R0, cfg.h0, cfg.lambda0, cfg.K0, psi)
            existence["exists"] = True
        except NoSolution:
            existence["exists"] = False
            existence["reasons"] = ["shooting_found_no_matching_slope"]
    timings["solve_s"] = time.perf_counter() - t0
    report["existence"] = existence
    if prof is None:
        report["status"] = "nonexistence_suspected"
        return EXIT_NONEXISTENCE
    res0, res_fb, res_slope = prof.check_endpoints()
    report["residuals"] = {
        "boundary": res0,
        "fb_height": res_fb,
        "fb_slope": res_slope,
    }
    report["free_boundary"] = {
        "radius_mean": prof.r_fb,
        "radius_rel_std": 0.0,
        "n_vertices": cfg.sectors,
    }
    report["profile"] = {"case": prof.case, "A": prof.A, "r_fb": prof.r_fb}
    center = np.asarray(cfg.omega.center, dtype=float)
    if artifacts:
        theta = 2.0 * math.pi * np.arange(cfg.sectors) / cfg.sectors
        fb = center + prof.r_fb * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        kio.write_free_boundary_csv(out / cfg.out_free_boundary, fb)
        verts, faces = _surface_mesh_oracle(prof, center, sectors=cfg.sectors)
        kio.write_obj(out / cfg.out_surface, verts, faces)
        report["artifacts"] = {
            "surface": str(out / cfg.out_surface),
            "free_boundary": str(out / cfg.out_free_boundary),
        }
    report["status"] = "converged"
    return EXIT_OK


# ---------------------------------------------------------------------------
# parameter sweeps
# ---------------------------------------------------------------------------

SWEEP_HEADER = [
    "k0",
    "lambda0",
    "h0",
    "cond_bound_holds",
    "cond_bound_margin",
    "radial_exists_closed_form",
    "radial_profile_found",
    "fb_radius",
    "ma_residual",
    "fb_residual",
    "status",
    "error",
]


def _sweep_row(cfg: RunConfig, k0: float, lambda0: float, h0: float) -> list:
    row_cfg = RunConfig(
        solver=cfg.solver,
        h0=h0,
        lambda0=lambda0,
        K0=k0,
        psi="zero" if k0 == 0 else ("one" if cfg.psi == "zero" else cfg.psi),
        omega=cfg.omega,
        dimension=cfg.dimension,
        psi_power=cfg.psi_power,
        n_planes=cfg.n_planes,
        rings=cfg.rings,
        sectors=cfg.sectors,
        tol_ma=cfg.tol_ma,
        tol_fb=cfg.tol_fb,
        damping=cfg.damping,
        seed=cfg.seed,
    )
    out: list = [k0, lambda0, h0, None, None, None, None, None, None, None, "", ""]
    try:
        domain = build_domain(row_cfg)
        psi = psi_from_config(row_cfg)
        if k0 > 0:
            ok, margin = check_existence_condition(domain, h0, lambda0, k0, psi, d=2)
            out[3], out[4] = bool(ok), float(margin)
        radial = radial_flags(row_cfg)
        if radial is not None:
            out[5] = radial["exists_closed_form"]
            out[6] = radial["profile_found"]
            if radial["fb_radius"] is not None:
                out[7] = float(radial["fb_radius"])
        if k0 == 0 and row_cfg.omega.kind == "disk":
            out[7] = row_cfg.omega.radius + h0 / lambda0
            out[5] = True
            out[6] = True
        if cfg.solver == "elliptic" and k0 > 0 and out[3]:
            sol = solve_free_boundary(
                domain,
                h0,
                lambda0,
                k0,
                psi,
                rings=cfg.rings,
                sectors=cfg.sectors,
                damping=cfg.damping,
                fb_tol=cfg.tol_fb,
                ma_tol=cfg.tol_ma,
            )
            out[7] = sol.fb_radius()
            out[8] = sol.residuals["ma_residual"]
            out[9] = sol.residuals["fb_gradient_residual"]
            out[10] = "converged" if sol.converged else "nonexistence_suspected"
        else:
            out[10] = "evaluated"
    except KfreeError as exc:
        out[10] = "error"
        out[11] = f"{type(exc).__name__}: {exc}"
    return out


def sweep(cfg: RunConfig, out_dir: str | Path, quiet: bool = False):
    """Evaluate existence flags and radial data over a parameter grid.

    The grid axes come from the config's ``[sweep]`` table (lists under
    ``K0``, ``lambda0``, ``h0``); missing axes stay at the template value.
    Rows are emitted in deterministic grid order; per-row failures are
    recorded in the row and the sweep continues.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    k0s = [float(v) for v in cfg.sweep.get("K0", [cfg.K0])]
    l0s = [float(v) for v in cfg.sweep.get("lambda0", [cfg.lambda0])]
    h0s = [float(v) for v in cfg.sweep.get("h0", [cfg.h0])]
    tuples = list(product(k0s, l0s, h0s))
    cap = os.environ.get("KFREE_MAX_THREADS")
    workers = max(1, min(int(cap) if cap else (os.cpu_count() or 1), 16, max(1, len(tuples))))
    rows: list[list] = [None] * len(tuples)  # type: ignore[list-item]
    if tuples:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = {
                pool.submit(_sweep_row, cfg, *tup): i for i, tup in enumerate(tuples)
            }
            for fut, i in futs.items():
                rows[i] = fut.result()
    path = out / "sweep.csv"
    kio.write_csv_table(path, SWEEP_HEADER, rows)
    if not quiet:
        print(f"sweep: {len(rows)} rows -> {path}")
    return rows, path
