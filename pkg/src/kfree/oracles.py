"""Closed-form and ODE-based radial reference solutions.

On a centred disk of radius ``R0`` a radial solution ``v(r)`` of the
curvature-measure problem satisfies

    (-v'')(-v'/r)^(d-1) = K0 * psi(|v'|),   v(R0) = h0,

with the free boundary where ``v`` first vanishes and ``|v'| = lambda0``
there.  Integrating once (unit weight) gives ``(-v')^d = K0 r^d + A`` for
a constant ``A``; ``A = 0`` is an explicit paraboloid, ``A != 0`` in d=2
integrates in elementary functions, and general weights are handled by
shooting on the initial slope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidParam, NoRoot, NoSolution
from .subdiff import PsiSpec

#: Shooting bracket for the initial slope s = v'(R0) (relative to -lambda0).
SHOOT_BRACKET_PAD = 10.0
#: Bisection tolerance on the shooting parameter.
SHOOT_S_TOL = 1e-12


@dataclass(frozen=True)
class RadialProfile:
    """A radial solution candidate: height profile and free boundary data."""

    d: int
    R0: float
    h0: float
    lambda0: float
    K0: float
    case: str  # cone | paraboloid | logcase | shot
    A: float | None
    r_fb: float
    v: Callable[[np.ndarray], np.ndarray]
    vp: Callable[[np.ndarray], np.ndarray]
    meta: dict = field(default_factory=dict)

    def check_endpoints(self) -> tuple[float, float, float]:
        """Residuals (|v(R0)-h0|, |v(r_fb)|, ||v'(r_fb)|-lambda0|)."""
        vr0 = float(self.v(np.array([self.R0]))[0])
        vfb = float(self.v(np.array([self.r_fb]))[0])
        sfb = float(self.vp(np.array([self.r_fb]))[0])
        return abs(vr0 - self.h0), abs(vfb), abs(abs(sfb) - self.lambda0)


def cone(R0: float, h0: float, lambda0: float) -> RadialProfile:
    """Truncated-cone profile for vanishing curvature.

    ``v(r) = h0 - lambda0 (r - R0)`` with slope exactly ``lambda0``
    everywhere and zero set at ``R0 + h0 / lambda0``.
    """
    if R0 <= 0 or h0 <= 0 or lambda0 <= 0:
        raise InvalidParam("cone needs positive R0, h0, lambda0")
    r_fb = R0 + h0 / lambda0

    def v(r):
        return h0 - lambda0 * (np.asarray(r, dtype=float) - R0)

    def vp(r):
        return np.full_like(np.asarray(r, dtype=float), -lambda0)

    return RadialProfile(2, R0, h0, lambda0, 0.0, "cone", None, r_fb, v, vp)


def radial_case1(d: int, R0: float, h0: float, K0: float) -> RadialProfile:
    """Paraboloid profile (integration constant zero) and its matching slope.

    ``v(r) = h0 + (K0^(1/d)/2)(R0^2 - r^2)``; the free-boundary condition
    pins ``lambda0 = K0^(1/d) sqrt(R0^2 + 2 h0 K0^(-1/d))``.  Derived for
    the unit weight.
    """
    if d not in (2, 3):
        raise InvalidParam("dimension must be 2 or 3")
    if R0 <= 0 or h0 <= 0 or K0 <= 0:
        raise InvalidParam("radial_case1 needs positive R0, h0, K0")
    k = K0 ** (1.0 / d)
    r_fb = math.sqrt(R0 * R0 + 2.0 * h0 / k)
    lambda0 = k * r_fb

    def v(r):
        r = np.asarray(r, dtype=float)
        return h0 + 0.5 * k * (R0 * R0 - r * r)

    def vp(r):
        return -k * np.asarray(r, dtype=float)

    return RadialProfile(d, R0, h0, lambda0, K0, "paraboloid", 0.0, r_fb, v, vp)


def _phi_A(r: np.ndarray, A: float, K0: float) -> np.ndarray:
    """Antiderivative of sqrt(K0 r^2 + A) (d=2 slope integral)."""
    r = np.asarray(r, dtype=float)
    root = np.sqrt(np.maximum(K0 * r * r + A, 0.0))
    return 0.5 * r * root + (A / (2.0 * math.sqrt(K0))) * np.log(
        r + root / math.sqrt(K0)
    )


def _phi_substituted(r: np.ndarray, lambda0: float, K0: float) -> np.ndarray:
    """The slope integral with the free-boundary relation substituted into
    the constant; mixes the running radius into ``A`` and is the closed
    form the solvability test below is stated with."""
    r = np.asarray(r, dtype=float)
    sk = math.sqrt(K0)
    return 0.5 * r * lambda0 + ((lambda0**2 - K0 * r * r) / (2.0 * sk)) * np.log(
        r + lambda0 / sk
    )


@dataclass(frozen=True)
class Case2Solution:
    """Result of the d=2 radial construction with nonzero constant.

    ``exists`` evaluates the closed-form solvability criterion
    ``h0 + phi(R0) - phi(R_max) <= 0`` (substituted form); ``margin`` is
    that expression's value.  ``margin_consistent`` is the same threshold
    computed with the constant held fixed at its extreme value, recorded
    because the two forms differ away from the threshold.  ``profile``
    raises ``NoRoot`` when no free-boundary radius satisfies both matching
    conditions.
    """

    R0: float
    h0: float
    lambda0: float
    K0: float
    R_max: float
    exists: bool
    margin: float
    margin_consistent: float
    r_fb: float | None
    A: float | None
    _profile: RadialProfile | None

    @property
    def has_profile(self) -> bool:
        return self._profile is not None

    @property
    def profile(self) -> RadialProfile:
        if self._profile is None:
            raise NoRoot(
                "no free-boundary radius in (R0, R_max] satisfies the matching conditions"
            )
        return self._profile


def radial_case2_d2(
    R0: float, h0: float, lambda0: float, K0: float, scan: int = 4096
) -> Case2Solution:
    """d=2 radial profile with nonzero integration constant.

    The constant ``A = lambda0^2 - K0 r_fb^2`` is solved jointly with
    ``v(r_fb) = 0`` by scanning the candidate zero radius over
    ``(R0, R_max]``, ``R_max = sqrt(R0^2 + lambda0^2/K0)``; the admissible
    range enforces ``A >= -R0^2 K0``.  The solvability flag uses the
    substituted closed form; both threshold values are reported.
    """
    if R0 <= 0 or h0 <= 0 or lambda0 <= 0 or K0 <= 0:
        raise InvalidParam("radial_case2_d2 needs positive parameters")
    R_max = math.sqrt(R0 * R0 + lambda0 * lambda0 / K0)
    margin = float(
        h0
        + _phi_substituted(np.array([R0]), lambda0, K0)[0]
        - _phi_substituted(np.array([R_max]), lambda0, K0)[0]
    )
    A_star = -K0 * R0 * R0
    margin_consistent = float(
        h0 + _phi_A(np.array([R0]), A_star, K0)[0] - _phi_A(np.array([R_max]), A_star, K0)[0]
    )
    exists = margin <= 0.0

    def gap(rho: float) -> float:
        A = lambda0 * lambda0 - K0 * rho * rho
        return float(h0 + _phi_A(np.array([R0]), A, K0)[0] - _phi_A(np.array([rho]), A, K0)[0])

    rhos = np.linspace(R0, R_max, scan + 1)[1:]
    vals = np.array([gap(x) for x in rhos])
    r_fb = None
    sign = np.sign(vals)
    flips = np.flatnonzero(sign[:-1] * sign[1:] < 0)
    if vals[0] == 0.0:
        r_fb = float(rhos[0])
    elif flips.size:
        i = int(flips[0])
        r_fb = float(brentq(gap, rhos[i], rhos[i + 1], xtol=1e-13, rtol=1e-15))
    elif np.any(vals == 0.0):
        r_fb = float(rhos[int(np.argmax(vals == 0.0))])
    if r_fb is None:
        return Case2Solution(
            R0, h0, lambda0, K0, R_max, exists, margin, margin_consistent, None, None, None
        )
    A = lambda0 * lambda0 - K0 * r_fb * r_fb

    def v(r):
        return h0 + _phi_A(np.array([R0]), A, K0)[0] - _phi_A(r, A, K0)

    def vp(r):
        r = np.asarray(r, dtype=float)
        return -np.sqrt(np.maximum(K0 * r * r + A, 0.0))

    case = "paraboloid" if abs(A) < 1e-12 * lambda0**2 else "logcase"
    prof = RadialProfile(
        2,
        R0,
        h0,
        lambda0,
        K0,
        case,
        A,
        r_fb,
        v,
        vp,
        meta={"margin": margin, "margin_consistent": margin_consistent},
    )
    return Case2Solution(
        R0, h0, lambda0, K0, R_max, exists, margin, margin_consistent, r_fb, A, prof
    )


# ---------------------------------------------------------------------------
# shooting
# ---------------------------------------------------------------------------


def _crossing_bound(R0: float, h0: float, lambda0: float, K0: float) -> float:
    """Radius past which any admissible shot must have hit zero."""
    r_max = math.sqrt(R0 * R0 + lambda0 * lambda0 / max(K0, 1e-300))
    slow = R0 + math.sqrt(2.0 * h0) * max(K0, 1e-300) ** -0.25
    hard = 10.0 * (R0 + lambda0 / max(K0, 1e-12))
    return min(max(r_max, slow) * 1.5 + R0, hard)


def _shoot_unit_weight(
    d: int, R0: float, h0: float, K0: float, s: float, r_bound: float, step: float
):
    """Crossing radius and slope magnitude of one shot, unit weight.

    The slope equation integrates exactly to ``(-v')^d = w0 + K0 (r^d -
    R0^d)``; the height is accumulated by composite Simpson on the fixed
    grid.  Returns (r_cross, |v'(r_cross)|) or None when the height stays
    positive inside the bound.
    """
    w0 = (-s) ** d

    def wfun(r):
        return w0 + K0 * (r**d - R0**d)

    n = max(16, int(math.ceil((r_bound - R0) / step)))
    r = np.linspace(R0, r_bound, n + 1)
    mid = 0.5 * (r[:-1] + r[1:])
    f0 = wfun(r) ** (1.0 / d)
    fm = wfun(mid) ** (1.0 / d)
    seg = (r[1] - r[0]) / 6.0 * (f0[:-1] + 4.0 * fm + f0[1:])
    v = h0 - np.concatenate([[0.0], np.cumsum(seg)])
    below = np.flatnonzero(v <= 0.0)
    if below.size == 0:
        return None
    i = int(below[0])
    if i == 0:
        return R0, wfun(R0) ** (1.0 / d)
    lo, hi = r[i - 1], r[i]
    v_lo = v[i - 1]

    def height(x):
        # Simpson over [lo, x]
        m = 0.5 * (lo + x)
        return v_lo - (x - lo) / 6.0 * (
            wfun(lo) ** (1.0 / d) + 4.0 * wfun(m) ** (1.0 / d) + wfun(x) ** (1.0 / d)
        )

    if height(hi) > 0:
        return hi, wfun(hi) ** (1.0 / d)
    rc = brentq(height, lo, hi, xtol=1e-15, rtol=1e-15)
    return float(rc), float(wfun(rc) ** (1.0 / d))


def _shoot_general(
    d: int,
    R0: float,
    h0: float,
    K0: float,
    psi: PsiSpec,
    s: float,
    r_bound: float,
    step: float,
):
    """One RK4 shot of (v, w) for a general nondecreasing weight."""
    inv_d = 1.0 / d

    def rhs(r, v, w):
        g = w**inv_d if w > 0 else 0.0
        return -g, d * K0 * float(psi.value(np.array([g]))[0]) * r ** (d - 1)

    r = R0
    v = h0
    w = (-s) ** d
    h = step
    prev = (r, v, w)
    while r < r_bound:
        k1v, k1w = rhs(r, v, w)
        k2v, k2w = rhs(r + h / 2, v + h / 2 * k1v, w + h / 2 * k1w)
        k3v, k3w = rhs(r + h / 2, v + h / 2 * k2v, w + h / 2 * k2w)
        k4v, k4w = rhs(r + h, v + h * k3v, w + h * k3w)
        prev = (r, v, w)
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        w = w + h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
        r = r + h
        if v <= 0.0:
            r0_, v0_, w0_ = prev
            # bisect the last step
            lo_f, hi_f = 0.0, 1.0
            for _ in range(60):
                mf = 0.5 * (lo_f + hi_f)
                hh = h * mf
                k1v, k1w = rhs(r0_, v0_, w0_)
                k2v, k2w = rhs(r0_ + hh / 2, v0_ + hh / 2 * k1v, w0_ + hh / 2 * k1w)
                k3v, k3w = rhs(r0_ + hh / 2, v0_ + hh / 2 * k2v, w0_ + hh / 2 * k2w)
                k4v, k4w = rhs(r0_ + hh, v0_ + hh * k3v, w0_ + hh * k3w)
                vm = v0_ + hh / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
                wm = w0_ + hh / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
                if vm <= 0.0:
                    hi_f = mf
                else:
                    lo_f = mf
            return r0_ + h * hi_f, wm ** inv_d
    return None


def radial_shoot(
    d: int,
    R0: float,
    h0: float,
    lambda0: float,
    K0: float,
    psi: PsiSpec | None = None,
    step_factor: float = 1e-4,
) -> RadialProfile:
    """Shooting solution of the radial problem for a nondecreasing weight.

    Integrates outward from ``v(R0) = h0`` with trial initial slope
    ``s < 0`` until the height first vanishes, then adjusts ``s`` by
    bisection until the slope there matches ``lambda0``.  When several
    initial slopes satisfy the matching condition the steepest one is
    returned: it is the pointwise-smallest profile, matching the minimal
    (Perron) solution the elliptic solver converges to.

    Raises:
        NoSolution: no bracket in the generous slope range meets the
            free-boundary condition before the height stalls.
    """
    if d not in (2, 3):
        raise InvalidParam("dimension must be 2 or 3")
    if R0 <= 0 or h0 <= 0 or lambda0 <= 0 or K0 < 0:
        raise InvalidParam("radial_shoot needs positive R0, h0, lambda0 and K0 >= 0")
    psi = psi or PsiSpec.one()
    if K0 == 0.0:
        return cone(R0, h0, lambda0)
    step = step_factor * R0
    r_bound = _crossing_bound(R0, h0, lambda0, K0)
    unit = psi.kind == "one"

    def endpoint(s: float):
        if unit:
            return _shoot_unit_weight(d, R0, h0, K0, s, r_bound, step)
        return _shoot_general(d, R0, h0, K0, psi, s, r_bound, step)

    def fval(s: float):
        out = endpoint(s)
        if out is None:
            return None
        return out[1] - lambda0

    s_lo, s_hi = -(lambda0 + SHOOT_BRACKET_PAD), -1e-6
    grid = np.linspace(s_lo, s_hi, 97)
    vals = [fval(s) for s in grid]
    brackets = []
    for i in range(len(grid) - 1):
        a, b = vals[i], vals[i + 1]
        if a is None or b is None:
            continue
        if a == 0.0:
            brackets.append((grid[i], grid[i]))
        elif a * b < 0:
            brackets.append((grid[i], grid[i + 1]))
    if vals[-1] == 0.0:
        brackets.append((grid[-1], grid[-1]))
    if not brackets:
        raise NoSolution("no initial slope in the bracket meets the free-boundary condition")
    roots = []
    for a, b in brackets:
        if a == b:
            roots.append(a)
            continue
        lo, hi = a, b
        flo = fval(lo)
        while hi - lo > SHOOT_S_TOL:
            mid = 0.5 * (lo + hi)
            fm = fval(mid)
            if fm is None:
                break
            if fm == 0.0:
                lo = hi = mid
                break
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    s_root = min(roots)  # steepest slope = minimal profile
    r_fb, slope = endpoint(s_root)

    # dense trajectory of the selected shot for the evaluators
    if unit:
        w0 = (-s_root) ** d

        def v(r):
            r = np.asarray(r, dtype=float)
            out = np.empty_like(r)
            for i, x in enumerate(np.atleast_1d(r)):
                n = max(8, int(math.ceil(abs(x - R0) / step)))
                g = np.linspace(R0, x, n + 1)
                f = (w0 + K0 * (g**d - R0**d)) ** (1.0 / d)
                mid = 0.5 * (g[:-1] + g[1:])
                fm = (w0 + K0 * (mid**d - R0**d)) ** (1.0 / d)
                seg = (g[1] - g[0]) / 6.0 * (f[:-1] + 4 * fm + f[1:])
                out.flat[i] = h0 - np.sum(seg)
            return out

        def vp(r):
            r = np.asarray(r, dtype=float)
            return -((w0 + K0 * (r**d - R0**d)) ** (1.0 / d))

    else:
        rs = [R0]
        vs = [h0]
        ws = [(-s_root) ** d]
        inv_d = 1.0 / d

        def rhs(r_, v_, w_):
            g = w_**inv_d if w_ > 0 else 0.0
            return -g, d * K0 * float(psi.value(np.array([g]))[0]) * r_ ** (d - 1)

        r_, v_, w_ = R0, h0, (-s_root) ** d
        while r_ < r_fb + 2 * step:
            h = step
            k1v, k1w = rhs(r_, v_, w_)
            k2v, k2w = rhs(r_ + h / 2, v_ + h / 2 * k1v, w_ + h / 2 * k1w)
            k3v, k3w = rhs(r_ + h / 2, v_ + h / 2 * k2v, w_ + h / 2 * k2w)
            k4v, k4w = rhs(r_ + h, v_ + h * k3v, w_ + h * k3w)
            v_ = v_ + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
            w_ = w_ + h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
            r_ = r_ + h
            rs.append(r_)
            vs.append(v_)
            ws.append(w_)
        rs_a, vs_a, ws_a = np.array(rs), np.array(vs), np.array(ws)

        def v(r):
            return np.interp(np.asarray(r, dtype=float), rs_a, vs_a)

        def vp(r):
            return -(np.interp(np.asarray(r, dtype=float), rs_a, ws_a) ** (1.0 / d))

    A_val = ((-s_root) ** d - K0 * R0**d) * ((-1.0) ** d) if unit else None
    return RadialProfile(
        d,
        R0,
        h0,
        lambda0,
        K0,
        "shot",
        A_val,
        float(r_fb),
        v,
        vp,
        meta={"s0": float(s_root), "end_slope": float(slope)},
    )
