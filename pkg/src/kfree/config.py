"""Run configuration: parsing, validation, and canonical serialization.

Configs are TOML or JSON (by file extension).  Validation collects every
violation with its field path rather than stopping at the first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ParseError, ValidationError

SOLVERS = ("homogeneous", "elliptic", "oracle")
PSI_KINDS = ("zero", "one", "gauss", "power")
OMEGA_KINDS = ("disk", "ellipse", "polygon", "sampled")

DEFAULTS = {
    "n_planes": 256,
    "rings": 64,
    "sectors": 32,
    "tol_ma": 1e-8,
    "tol_fb": 1e-3,
    "damping": 0.5,
    "seed": 0,
}


@dataclass(frozen=True)
class OmegaSpec:
    kind: str
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    semi_axes: tuple = (1.0, 1.0)
    angle: float = 0.0
    vertices: tuple = ()

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "center": list(self.center)}
        if self.kind == "disk":
            d["radius"] = self.radius
        elif self.kind == "ellipse":
            d["semi_axes"] = list(self.semi_axes)
            d["angle"] = self.angle
        elif self.kind in ("polygon", "sampled"):
            d["vertices"] = [list(v) for v in self.vertices]
        return d


@dataclass(frozen=True)
class RunConfig:
    """Validated solver run description (defaults resolved)."""

    solver: str
    h0: float
    lambda0: float
    K0: float
    psi: str
    omega: OmegaSpec
    dimension: int = 2
    psi_power: float = 4.0
    n_planes: int = DEFAULTS["n_planes"]
    rings: int = DEFAULTS["rings"]
    sectors: int = DEFAULTS["sectors"]
    tol_ma: float = DEFAULTS["tol_ma"]
    tol_fb: float = DEFAULTS["tol_fb"]
    damping: float = DEFAULTS["damping"]
    seed: int = DEFAULTS["seed"]
    out_surface: str = "surface.obj"
    out_free_boundary: str = "free_boundary.csv"
    out_report: str = "report.json"
    sweep: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "dimension": self.dimension,
            "solver": self.solver,
            "h0": self.h0,
            "lambda0": self.lambda0,
            "K0": self.K0,
            "psi": self.psi,
            "omega": self.omega.to_dict(),
            "mesh": {
                "n_planes": self.n_planes,
                "rings": self.rings,
                "sectors": self.sectors,
            },
            "tolerances": {"ma": self.tol_ma, "fb": self.tol_fb},
            "damping": self.damping,
            "seed": self.seed,
            "output": {
                "surface": self.out_surface,
                "free_boundary": self.out_free_boundary,
                "report": self.out_report,
            },
        }
        if self.psi == "power":
            d["psi_power"] = self.psi_power
        if self.sweep:
            d["sweep"] = dict(self.sweep)
        return d


def _get(d: dict, key: str, default):
    return d[key] if key in d else default


def config_from_dict(raw: dict) -> RunConfig:
    """Build and validate a RunConfig from a parsed mapping.

    Raises:
        ValidationError: listing every violated invariant.
    """
    errors: list[str] = []

    def bad(path: str, msg: str):
        errors.append(f"{path}: {msg}")

    solver = _get(raw, "solver", "homogeneous")
    if solver not in SOLVERS:
        bad("solver", f"must be one of {SOLVERS}")
    dimension = int(_get(raw, "dimension", 2))
    if dimension not in (2, 3):
        bad("dimension", "must be 2 or 3")
    h0 = float(_get(raw, "h0", 1.0))
    if not h0 > 0:
        bad("h0", "must be > 0")
    lambda0 = float(_get(raw, "lambda0", 1.0))
    if not lambda0 > 0:
        bad("lambda0", "must be > 0")
    K0 = float(_get(raw, "K0", 0.0))
    if K0 < 0:
        bad("K0", "must be >= 0")
    psi = _get(raw, "psi", "zero" if K0 == 0 else "one")
    if psi not in PSI_KINDS:
        bad("psi", f"must be one of {PSI_KINDS}")
    if (psi == "zero") != (K0 == 0.0):
        bad("psi", "the zero weight is used exactly when K0 = 0")
    if K0 > 0 and solver == "homogeneous":
        bad("K0", "positive curvature requires solver=elliptic or oracle")
    if K0 == 0 and solver == "elliptic":
        bad("solver", "the elliptic solver needs K0 > 0 (use homogeneous)")
    psi_power = float(_get(raw, "psi_power", 4.0))

    om = _get(raw, "omega", {"kind": "disk"})
    kind = _get(om, "kind", "disk")
    omega = OmegaSpec(kind="disk")
    if kind not in OMEGA_KINDS:
        bad("omega.kind", f"must be one of {OMEGA_KINDS}")
    else:
        center = tuple(float(c) for c in _get(om, "center", (0.0, 0.0)))
        if kind == "disk":
            radius = float(_get(om, "radius", 1.0))
            if not radius > 0:
                bad("omega.radius", "must be > 0")
            omega = OmegaSpec("disk", center=center, radius=radius)
        elif kind == "ellipse":
            axes = tuple(float(a) for a in _get(om, "semi_axes", (1.0, 1.0)))
            if len(axes) != 2 or min(axes) <= 0:
                bad("omega.semi_axes", "needs two positive semi-axes")
            omega = OmegaSpec(
                "ellipse", center=center, semi_axes=axes, angle=float(_get(om, "angle", 0.0))
            )
        else:
            verts = tuple(tuple(float(x) for x in v) for v in _get(om, "vertices", ()))
            if len(verts) < 3:
                bad("omega.vertices", "needs at least 3 vertices")
            omega = OmegaSpec(kind, center=center, vertices=verts)
        if kind in ("disk", "ellipse", "sampled") and dimension != 2:
            bad("dimension", f"omega kind {kind!r} is 2-d only")
    if solver == "elliptic":
        if dimension != 2:
            bad("solver", "the elliptic solver is 2-d only")
        if kind == "polygon":
            bad("omega.kind", "the elliptic solver needs strictly convex boundary (no polygons)")

    mesh = _get(raw, "mesh", {})
    n_planes = int(_get(mesh, "n_planes", DEFAULTS["n_planes"]))
    if n_planes < 8:
        bad("mesh.n_planes", "must be >= 8")
    rings = int(_get(mesh, "rings", DEFAULTS["rings"]))
    sectors = int(_get(mesh, "sectors", DEFAULTS["sectors"]))
    if rings < 2:
        bad("mesh.rings", "must be >= 2")
    if sectors < 8:
        bad("mesh.sectors", "must be >= 8")

    tols = _get(raw, "tolerances", {})
    tol_ma = float(_get(tols, "ma", DEFAULTS["tol_ma"]))
    tol_fb = float(_get(tols, "fb", DEFAULTS["tol_fb"]))
    if not tol_ma > 0:
        bad("tolerances.ma", "must be > 0")
    if not tol_fb > 0:
        bad("tolerances.fb", "must be > 0")
    damping = float(_get(raw, "damping", DEFAULTS["damping"]))
    if not (0 < damping <= 1):
        bad("damping", "must lie in (0, 1]")
    seed = int(_get(raw, "seed", DEFAULTS["seed"]))

    out = _get(raw, "output", {})
    sweep = dict(_get(raw, "sweep", {}))
    for key in sweep:
        if key not in ("K0", "lambda0", "h0"):
            bad(f"sweep.{key}", "sweep axes are K0, lambda0, h0")

    if errors:
        raise ValidationError(errors)
    return RunConfig(
        solver=solver,
        h0=h0,
        lambda0=lambda0,
        K0=K0,
        psi=psi,
        omega=omega,
        dimension=dimension,
        psi_power=psi_power,
        n_planes=n_planes,
        rings=rings,
        sectors=sectors,
        tol_ma=tol_ma,
        tol_fb=tol_fb,
        damping=damping,
        seed=seed,
        out_surface=_get(out, "surface", "surface.obj"),
        out_free_boundary=_get(out, "free_boundary", "free_boundary.csv"),
        out_report=_get(out, "report", "report.json"),
        sweep=sweep,
    )


def parse_config(path: str | Path) -> RunConfig:
    """Load and validate a TOML or JSON config file.

    Raises:
        ParseError: unreadable or syntactically invalid file.
        ValidationError: every invariant violation, with field paths.
    """
    p = Path(path)
    if not p.exists():
        raise ParseError(f"config file not found: {p}")
    try:
        if p.suffix.lower() == ".toml":
            with open(p, "rb") as fh:
                raw = tomllib.load(fh)
        elif p.suffix.lower() == ".json":
            raw = json.loads(p.read_text())
        else:
            raise ParseError(f"unknown config extension {p.suffix!r} (use .toml or .json)")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot parse {p}: {exc}") from exc
    return config_from_dict(raw)
