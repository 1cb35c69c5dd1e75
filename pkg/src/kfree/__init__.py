"""Concave constant-curvature surfaces with free boundaries.

Exact ruled-envelope solutions for the zero-curvature problem, discrete
curvature-measure solves with a trial free boundary for positive
curvature, radial reference solutions, and certification utilities.
"""

from .config import RunConfig, parse_config
from .elliptic import (
    AnnulusGridFunction,
    EllipticSolution,
    ParaboloidFamily,
    build_supersolution,
    check_existence_condition,
    ma_dirichlet_solve,
    solve_free_boundary,
)
from .geometry import (
    ConvexDomain,
    DiskDomain,
    EllipseDomain,
    Hyperplane,
    PLConcaveFunction,
    PolygonDomain,
    PolytopeDomain,
    SampledDomain,
    SlopeVector,
    clip_polygon,
    lower_envelope,
    slope_of,
    support_plane_with_slope,
)
from .homogeneous import (
    HomogeneousSolution,
    check_ruled,
    extract_free_boundary,
    solve_polytope,
    solve_smooth,
)
from .oracles import RadialProfile, cone, radial_case1, radial_case2_d2, radial_shoot
from .runner import run, sweep
from .subdiff import (
    MAMeasure,
    PsiSpec,
    SubdifferentialCell,
    gradient_cell,
    ma_measure,
    psi_weighted_mass,
)
from .verify import Certificate, certify_comparison, certify_ot_mass, certify_weak_solution

__version__ = "0.1.0"

__all__ = [
    "AnnulusGridFunction",
    "Certificate",
    "ConvexDomain",
    "DiskDomain",
    "EllipseDomain",
    "EllipticSolution",
    "HomogeneousSolution",
    "Hyperplane",
    "MAMeasure",
    "PLConcaveFunction",
    "ParaboloidFamily",
    "PolygonDomain",
    "PolytopeDomain",
    "PsiSpec",
    "RadialProfile",
    "RunConfig",
    "SampledDomain",
    "SlopeVector",
    "SubdifferentialCell",
    "build_supersolution",
    "check_existence_condition",
    "check_ruled",
    "certify_comparison",
    "certify_ot_mass",
    "certify_weak_solution",
    "clip_polygon",
    "cone",
    "extract_free_boundary",
    "gradient_cell",
    "lower_envelope",
    "ma_dirichlet_solve",
    "ma_measure",
    "parse_config",
    "psi_weighted_mass",
    "radial_case1",
    "radial_case2_d2",
    "radial_shoot",
    "run",
    "slope_of",
    "solve_free_boundary",
    "solve_polytope",
    "solve_smooth",
    "support_plane_with_slope",
    "sweep",
]
