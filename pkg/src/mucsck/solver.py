"""Boundary-value solver for the constant-curvature profile equation.

In momentum coordinates the constant-curvature condition on the line reads

    -(d/dtau - chi)^2 phi + lam*chi*tau = c,

and on a ruled surface, with psi = (1 - k tau) phi,

    (d/dtau - chi)^2 psi = -chi*lam*k*tau^2 + (chi*lam + k*c)*tau + (l_g - c).

For chi != 0 the general solution is (a + b tau) e^{chi tau} plus an explicit
particular polynomial; three of the four boundary targets (both endpoint
values and the derivative at tau = 0) are imposed as a linear system in
(a, b, c), and the remaining derivative is the shooting residual.  The
coefficients always come from the numerically solved system; explicit
closed forms for them exist but serve only as test oracles.

Arithmetic: the exponential basis degenerates against {1, tau} as chi -> 0
and overflows conditioning for large |chi|*width, so the solve and profile
evaluations switch to extended precision outside a comfortable float window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from mpmath import mp, mpf
from scipy.optimize import brentq

from .dh import TorusWeight
from .errors import BracketError, ChiZeroBranchError, DegenerateParameterError, DomainError
from .profiles import ClosedFormProfile
from .surfaces import CP1, SurfaceSpec

CHI_ZERO_THRESHOLD = 1e-6
CHI_MP_SMALL = 1e-2
CHI_WIDTH_MP = 10.0
MP_DPS = 60

RESIDUAL_TOL = 1e-10
ODE_RESIDUAL_TOL = 1e-8
SCAN_POINTS = 10001
ODE_GRID = 401


def _needs_mp(spec: SurfaceSpec, chi: float) -> bool:
    width = spec.tau_hi - spec.tau_lo
    return abs(chi) < CHI_MP_SMALL or abs(chi) * width > CHI_WIDTH_MP


def _psi_parts(spec: SurfaceSpec, lam, chi, one):
    """Particular-part polynomials of psi, affine in c: psi_p = c*P3 + P4.

    `one` fixes the arithmetic (1.0 for floats, mpf(1) for extended).
    Coefficients are low-order first.
    """
    k = one * spec.k
    lg = one * spec.l_g
    lam = one * lam
    chi = one * chi
    if spec.kind == CP1:
        p3 = [-1 / chi ** 2]
        p4 = [2 * lam / chi ** 2, lam / chi]
    else:
        p3 = [(2 * k - chi) / chi ** 3, k / chi ** 2]
        p4 = [((2 * lam + lg) * chi - 6 * lam * k) / chi ** 3,
              lam * (chi - 4 * k) / chi ** 2,
              -lam * k / chi]
    return p3, p4


class SolutionBasis:
    """Four functions f1..f4 of tau with phi = a f1 + b f2 + c f3 + f4.

    f1 = e^{chi tau}/(1-k tau), f2 = tau e^{chi tau}/(1-k tau); f3 carries
    the c-dependence of the particular part and f4 the remainder, so that
    the assembled phi solves the constant-curvature equation with constant c.
    """

    def __init__(self, spec: SurfaceSpec, lam: float, w: TorusWeight):
        if abs(w.chi) < CHI_ZERO_THRESHOLD:
            raise ChiZeroBranchError(
                f"|chi|={abs(w.chi):g} is below {CHI_ZERO_THRESHOLD:g}; use chi_zero_branch"
            )
        self.spec = spec
        self.lam = float(lam)
        self.chi = float(w.chi)
        self.p3, self.p4 = _psi_parts(spec, lam, w.chi, 1.0)

    def _den(self, t):
        return 1.0 - self.spec.k * np.asarray(t, dtype=float)

    def f1(self, t):
        return np.exp(self.chi * np.asarray(t, dtype=float)) / self._den(t)

    def f2(self, t):
        t = np.asarray(t, dtype=float)
        return t * np.exp(self.chi * t) / self._den(t)

    def f3(self, t):
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), self.p3) / self._den(t)

    def f4(self, t):
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), self.p4) / self._den(t)

    def functions(self):
        return self.f1, self.f2, self.f3, self.f4


@dataclass(frozen=True)
class PositivityCertificate:
    min_phi: float
    argmin: float
    inflection_points: tuple
    tau0: float | None
    verdict: bool
    method: str
    flagged: bool = False

    def to_dict(self):
        return {
            "min_phi": self.min_phi,
            "argmin": self.argmin,
            "inflection_points": list(self.inflection_points),
            "tau0": self.tau0,
            "verdict": self.verdict,
            "method": self.method,
            "flagged": self.flagged,
        }


@dataclass(frozen=True)
class SolveResult:
    lam: float
    chi: float
    a: float
    b: float
    c: float
    residual: float
    ode_sup_residual: float
    positivity: PositivityCertificate
    profile: ClosedFormProfile

    @property
    def certified(self) -> bool:
        return (
            abs(self.residual) <= RESIDUAL_TOL
            and self.ode_sup_residual <= ODE_RESIDUAL_TOL
            and self.positivity.verdict
        )

    def to_dict(self):
        return {
            "lambda": self.lam,
            "chi": self.chi,
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "residual": self.residual,
            "ode_sup_residual": self.ode_sup_residual,
            "positivity": self.positivity.to_dict(),
            "certified": self.certified,
        }


# -- linear solve --------------------------------------------------------------


def _imposed_rows(spec: SurfaceSpec, lam, chi, one):
    """Rows of the 3x3 system in psi-space for unknowns (a, b, c).

    Conditions: phi(lo) = bc.value_lo, phi(hi) = bc.value_hi, phi'(0) = the
    imposed derivative.  In psi-space: psi(t) = v (1 - k t) for values, and
    phi'(0) = psi'(0) + k psi(0).
    """
    exp = math.exp if isinstance(one, float) else mp.exp
    k = one * spec.k
    chi = one * chi
    p3, p4 = _psi_parts(spec, lam, chi, one)

    def poly(coeffs, t):
        return sum(c * t ** j for j, c in enumerate(coeffs))

    def dpoly(coeffs, t):
        return sum(j * c * t ** (j - 1) for j, c in enumerate(coeffs) if j >= 1)

    lo = one * spec.tau_lo
    hi = one * spec.tau_hi
    bc = spec.bc
    deriv0 = bc.deriv_lo if spec.tau_lo == 0.0 else bc.deriv_hi

    rows = []
    rhs = []
    for t, v in ((lo, bc.value_lo), (hi, bc.value_hi)):
        e = exp(chi * t)
        rows.append([e, t * e, poly(p3, t)])
        rhs.append(v * (1 - k * t) - poly(p4, t))
    # derivative row at tau = 0: psi'(0) + k psi(0)
    rows.append([chi + k, one * 1, dpoly(p3, one * 0) + k * poly(p3, one * 0)])
    rhs.append(one * deriv0 - dpoly(p4, one * 0) - k * poly(p4, one * 0))
    return rows, rhs, p3, p4


def _solve_float(spec: SurfaceSpec, lam: float, chi: float):
    rows, rhs, p3, p4 = _imposed_rows(spec, lam, chi, 1.0)
    A = np.array(rows, dtype=float)
    r = np.array(rhs, dtype=float)
    # column scaling maps exponentially small/large unknowns to O(1)
    dc = 1.0 / np.abs(A).max(axis=0)
    try:
        y = np.linalg.solve(A * dc[None, :], r)
    except np.linalg.LinAlgError as exc:
        raise DegenerateParameterError(f"singular boundary system: {exc}", lam=lam, chi=chi)
    x = y * dc
    if not np.all(np.isfinite(x)):
        raise DegenerateParameterError("non-finite solve output", lam=lam, chi=chi)
    # verify the imposed conditions actually hold for the computed profile
    back = np.abs(A @ x - r)
    tol = 1e-9 * (np.abs(A) @ np.abs(x) + np.abs(r) + 1.0)
    if np.any(back > tol):
        raise DegenerateParameterError(
            f"boundary system too ill-conditioned at (lam={lam}, chi={chi})", lam=lam, chi=chi
        )
    a, b, c = (float(v) for v in x)
    poly = np.polynomial.polynomial.polyadd(np.asarray(p4), c * np.asarray(p3))
    profile = ClosedFormProfile(a, b, chi, tuple(poly), spec.k, (spec.tau_lo, spec.tau_hi), lam)
    return a, b, c, profile


def _solve_mp(spec: SurfaceSpec, lam: float, chi: float):
    with mp.workdps(MP_DPS):
        rows, rhs, p3, p4 = _imposed_rows(spec, lam, chi, mpf(1))
        # column scaling maps exponentially small/large unknowns to O(1) and
        # keeps mpmath's pivot tolerance honest
        dc = [1 / max(abs(rows[i][j]) for i in range(3)) for j in range(3)]
        A = mp.matrix([[rows[i][j] * dc[j] for j in range(3)] for i in range(3)])
        r = mp.matrix(rhs)
        try:
            sol = mp.lu_solve(A, r)
        except ZeroDivisionError as exc:
            raise DegenerateParameterError(f"singular boundary system: {exc}", lam=lam, chi=chi)
        a, b, c = sol[0] * dc[0], sol[1] * dc[1], sol[2] * dc[2]
        n = max(len(p3), len(p4))
        poly = [
            (p4[j] if j < len(p4) else 0) + c * (p3[j] if j < len(p3) else 0)
            for j in range(n)
        ]
        base = ClosedFormProfile(
            float(a), float(b), chi, tuple(float(v) for v in poly),
            spec.k, (spec.tau_lo, spec.tau_hi), float(lam),
        )
        return float(a), float(b), float(c), base.with_mp_coeffs(a, b, poly)


def solution_basis(spec: SurfaceSpec, lam: float, w: TorusWeight) -> SolutionBasis:
    return SolutionBasis(spec, lam, w)


def solve_coefficients(spec: SurfaceSpec, lam: float, w: TorusWeight):
    """Impose the three boundary conditions; returns (a, b, c)."""
    a, b, c, _ = _solve_with_profile(spec, lam, w)
    return a, b, c


def _solve_with_profile(spec: SurfaceSpec, lam: float, w: TorusWeight):
    chi = float(w.chi)
    if abs(chi) < CHI_ZERO_THRESHOLD:
        raise ChiZeroBranchError(
            f"|chi|={abs(chi):g} is below {CHI_ZERO_THRESHOLD:g}; use chi_zero_branch"
        )
    if _needs_mp(spec, chi):
        return _solve_mp(spec, lam, chi)
    return _solve_float(spec, lam, chi)


# -- the chi = 0 polynomial branch ----------------------------------------------


def chi_zero_branch(spec: SurfaceSpec, lam: float) -> SolveResult:
    """Direct polynomial integration of the degenerate (chi = 0) equation."""
    m = spec.m
    if spec.kind == CP1:
        c = 2.0 / m
        poly = (0.0, 2.0, -1.0 / m)  # Fubini-Study profile
    else:
        k, lg = spec.k, spec.l_g
        c = (6.0 + 3.0 * m * lg) / (3.0 * m + m * m * k)
        poly = (0.0, -1.0, (lg - c) / 2.0, k * c / 6.0)
    profile = ClosedFormProfile(0.0, 0.0, 0.0, poly, spec.k, (spec.tau_lo, spec.tau_hi), lam)
    return build_result(spec, lam, TorusWeight(0.0), 0.0, 0.0, c, profile)


# -- residual and root finding ---------------------------------------------------


def _free_deriv(spec: SurfaceSpec, profile: ClosedFormProfile) -> float:
    t = spec.free_endpoint
    den = 1.0 - spec.k * t
    psi = profile.psi_value(t)
    dpsi = profile.psi_deriv(t)
    return float((dpsi * den + spec.k * psi) / den ** 2)


def residual(spec: SurfaceSpec, lam: float, w: TorusWeight) -> float:
    """phi' at the free endpoint minus its target; continuous across chi=0."""
    if abs(w.chi) < CHI_ZERO_THRESHOLD:
        return chi_zero_branch(spec, lam).residual
    _, _, _, profile = _solve_with_profile(spec, lam, w)
    return _free_deriv(spec, profile) - spec.free_deriv_target


def mu_scalar_curvature(spec: SurfaceSpec, profile, w: TorusWeight, lam: float, tau):
    """Pointwise weighted scalar curvature of the profile's metric.

    Line: -(d/dtau - chi)^2 phi + lam chi tau.
    Ruled: -(1-k tau)^{-1} (d/dtau - chi)^2 ((1-k tau) phi) + chi lam tau
           + l_g/(1-k tau).
    """
    t = np.asarray(tau, dtype=float)
    lo, hi = spec.tau_lo, spec.tau_hi
    if np.any(t <= lo) or np.any(t >= hi):
        raise DomainError(f"tau must lie in the open interval ({lo}, {hi})")
    chi = w.chi
    if spec.kind == CP1:
        phi, dphi, d2phi = profile.value(t), profile.deriv(t), profile.deriv2(t)
        out = -(d2phi - 2.0 * chi * dphi + chi ** 2 * phi) + lam * chi * t
    else:
        den = 1.0 - spec.k * t
        if np.any(den <= 0.0):
            raise DomainError("1 - k tau must stay positive")
        if isinstance(profile, ClosedFormProfile) and profile.k == spec.k:
            psi, dpsi, d2psi = profile.psi_value(t), profile.psi_deriv(t), profile.psi_deriv2(t)
        else:
            phi, dphi, d2phi = profile.value(t), profile.deriv(t), profile.deriv2(t)
            psi = den * phi
            dpsi = den * dphi - spec.k * phi
            d2psi = den * d2phi - 2.0 * spec.k * dphi
        out = -(d2psi - 2.0 * chi * dpsi + chi ** 2 * psi) / den + chi * lam * t + spec.l_g / den
    return out if np.asarray(tau).shape else float(out)


def ode_sup_residual(spec: SurfaceSpec, profile, w: TorusWeight, lam: float, c: float) -> float:
    lo, hi = spec.tau_lo, spec.tau_hi
    ts = np.linspace(lo, hi, ODE_GRID + 2)[1:-1]
    vals = mu_scalar_curvature(spec, profile, w, lam, ts)
    return float(np.max(np.abs(vals - c)))


def positivity_certificate(profile, spec: SurfaceSpec) -> PositivityCertificate:
    """Dense interior minimum scan combined with the analytic psi''' root.

    psi''' = (b chi^3 tau + a chi^3 + 3 b chi^2) e^{chi tau} has at most one
    root tau0; together with the inflection structure this bounds the shape,
    but the verdict itself is the scanned interior minimum.
    """
    lo, hi = spec.tau_lo, spec.tau_hi
    ts = np.linspace(lo, hi, SCAN_POINTS)[1:-1]
    vals = np.asarray(profile.value(ts), dtype=float)
    i = int(np.argmin(vals))
    min_phi, argmin = float(vals[i]), float(ts[i])

    tau0 = None
    method = "scan"
    flagged = False
    if isinstance(profile, ClosedFormProfile) and profile.chi != 0.0:
        if profile.b != 0.0:
            tau0 = -profile.a / profile.b - 3.0 / profile.chi
            method = "analytic+scan"
        else:
            flagged = True

    inflections = []
    if isinstance(profile, ClosedFormProfile):
        d2 = np.asarray(profile.psi_deriv2(ts), dtype=float)
        sign_change = np.nonzero(np.sign(d2[:-1]) * np.sign(d2[1:]) < 0)[0]
        for j in sign_change:
            try:
                root = brentq(lambda t: float(profile.psi_deriv2(t)), ts[j], ts[j + 1])
                inflections.append(float(root))
            except ValueError:
                flagged = True
    return PositivityCertificate(
        min_phi=min_phi,
        argmin=argmin,
        inflection_points=tuple(inflections),
        tau0=tau0,
        verdict=bool(min_phi > 0.0),
        method=method,
        flagged=flagged,
    )


def build_result(spec, lam, w, a, b, c, profile) -> SolveResult:
    res = _free_deriv(spec, profile) - spec.free_deriv_target
    sup = ode_sup_residual(spec, profile, w, lam, c)
    cert = positivity_certificate(profile, spec)
    return SolveResult(float(lam), float(w.chi), float(a), float(b), float(c),
                       float(res), sup, cert, profile)


def solve_at(spec: SurfaceSpec, lam: float, chi: float) -> SolveResult:
    """Assemble a full SolveResult at fixed (lam, chi) without root-finding."""
    w = TorusWeight(chi)
    if abs(chi) < CHI_ZERO_THRESHOLD:
        return chi_zero_branch(spec, lam)
    a, b, c, profile = _solve_with_profile(spec, lam, w)
    return build_result(spec, lam, w, a, b, c, profile)


def solve_chi(spec: SurfaceSpec, lam: float, bracket) -> SolveResult:
    """Brent root of the residual in chi over the given bracket."""
    lo, hi = float(bracket[0]), float(bracket[1])
    f = lambda chi: residual(spec, lam, TorusWeight(chi))  # noqa: E731
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        root = lo
    elif fhi == 0.0:
        root = hi
    elif np.sign(flo) * np.sign(fhi) > 0:
        raise BracketError(
            f"residual has no sign change on [{lo}, {hi}] "
            f"(r({lo})={flo:.3g}, r({hi})={fhi:.3g})"
        )
    else:
        root = brentq(f, lo, hi, xtol=1e-13, rtol=8.9e-16)
    return solve_at(spec, lam, float(root))


def scan_chi_roots(spec: SurfaceSpec, lam: float, chi_abs_range=(1e-3, 30.0),
                   per_decade: int = 40):
    """All residual roots found on a log-spaced grid over both signs of chi."""
    lo, hi = chi_abs_range
    decades = math.log10(hi / lo)
    n = max(2, int(round(per_decade * decades)) + 1)
    mags = np.logspace(math.log10(lo), math.log10(hi), n)
    roots = []
    for sign in (-1.0, 1.0):
        grid = sign * mags
        vals = np.array([residual(spec, lam, TorusWeight(c)) for c in grid])
        for i in range(len(grid) - 1):
            if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]):
                if vals[i] == 0.0:
                    roots.append(float(grid[i]))
                elif np.sign(vals[i]) * np.sign(vals[i + 1]) < 0:
                    a, b = sorted((grid[i], grid[i + 1]))
                    roots.append(float(brentq(
                        lambda c: residual(spec, lam, TorusWeight(c)), a, b,
                        xtol=1e-13, rtol=8.9e-16)))
    return sorted(roots)


def _free_deriv_mp(spec: SurfaceSpec, profile: ClosedFormProfile):
    a, b, poly = profile._mp_abc
    chi = mpf(profile.chi)
    t = mpf(spec.free_endpoint)
    e = mp.exp(chi * t)
    psi = (a + b * t) * e + sum(c * t ** j for j, c in enumerate(poly))
    dpsi = (b + chi * (a + b * t)) * e + sum(
        j * c * t ** (j - 1) for j, c in enumerate(poly) if j >= 1
    )
    den = 1 - spec.k * t
    return (dpsi * den + spec.k * psi) / den ** 2


def flat_disk_limit_gap(spec: SurfaceSpec, chi: float, tau_hi: float = 1.8) -> float:
    """sup over [0, tau_hi] of |phi^{lam(chi)}_chi - 2 tau| on the unit line.

    lam(chi) solves the shooting residual; the residual is affine in lam for
    fixed chi, so one secant step is exact.  The whole determination runs in
    extended precision: lam - 2 chi decays like chi^2 e^{-2 chi}, and the
    exponential coefficients of the profile are hypersensitive to lam there.
    """
    if spec.kind != CP1 or spec.m != 1.0:
        raise ValueError("flat-disk limit is stated for the line with m = 1")
    if chi < 10.0:
        raise ValueError(f"need chi >= 10, got {chi}")
    with mp.workdps(MP_DPS):
        target = mpf(spec.free_deriv_target)
        profiles = [_solve_mp(spec, mpf(l), chi)[3] for l in (0, 1)]
        r0, r1 = (_free_deriv_mp(spec, p) - target for p in profiles)
        lam = -r0 / (r1 - r0)
        profile = _solve_mp(spec, lam, chi)[3]
    ts = np.linspace(0.0, tau_hi, 1001)
    return float(np.max(np.abs(profile.value(ts) - 2.0 * ts)))
