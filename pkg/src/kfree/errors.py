"""Exception types raised by the solvers and geometry kernel."""


class KfreeError(Exception):
    """Base class for all library errors."""


class VerticalPlane(KfreeError):
    """The hyperplane is (numerically) vertical, so its slope is undefined."""


class NonSmoothBoundaryPoint(KfreeError):
    """A supporting plane was requested at a point without a unique normal."""


class InvalidParam(KfreeError):
    """A solver parameter is outside its admissible range."""


class EmptyInput(KfreeError):
    """An operation received an empty collection where data is required."""


class OutOfDomain(KfreeError):
    """A query point lies outside the region the function is defined on."""


class QuadratureFail(KfreeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class DuplicateSites(KfreeError):
    """Two measure sites coincide."""


class NotAPolytope(KfreeError):
    """The polytope solver was handed a non-polytopal domain."""


class TooFewPlanes(KfreeError):
    """The smooth-domain envelope needs more supporting planes."""


class DegenerateSolution(KfreeError):
    """The positivity set is unbounded or the zero set cannot be stitched."""


class ZeroCurvature(KfreeError):
    """The boundary has vanishing minimal curvature; the elliptic solver needs kappa_0 > 0."""


class ConditionViolated(KfreeError):
    """The curvature existence bound fails, so no super-solution can be built."""


class NoConvergence(KfreeError):
    """An iteration exhausted its budget without meeting its tolerance."""


class NonAdmissibleBoundary(KfreeError):
    """Grid boundary data is not concave-admissible."""


class FreeBoundaryCollapse(KfreeError):
    """The trial free boundary touched the fixed boundary (nonexistence regime)."""


class NoRoot(KfreeError):
    """No free-boundary radius satisfies the radial matching conditions."""


class NoSolution(KfreeError):
    """Shooting found no initial slope meeting the free-boundary condition."""


class DomainsNotNested(KfreeError):
    """A comparison check requires one domain to contain the other."""


class WrongPsi(KfreeError):
    """The check is only defined for a specific weight kind."""


class ParseError(KfreeError):
    """A configuration file could not be parsed."""


class ValidationError(KfreeError):
    """A configuration violates one or more invariants.

    Carries every violation, not just the first, as ``.violations``
    (a list of ``"field.path: message"`` strings).
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
