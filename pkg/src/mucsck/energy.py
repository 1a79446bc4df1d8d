"""Weighted Mabuchi-type energy on the line via symplectic potentials.

A circle-invariant metric on the line is encoded by its symplectic potential
U(tau) = (canonical boundary-singular part) + (smooth Chebyshev part), with
momentum profile phi = 1/U''.  Linear paths of symplectic potentials realize
geodesics; the energy functional is evaluated two independent ways:

* the path definition: minus the t-integral of the centered weighted
  curvature paired with the potential velocity;
* the endpoint-entropy expression: a relative-entropy term between the two
  weighted volume measures compared at the same base point (through the
  composed moment maps) plus the remaining t-integral terms built from the
  reference metric only.

Both are normalized per weighted volume, so the slope of the flow-generated
geodesic equals minus the obstruction functional exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.chebyshev import Chebyshev
from scipy.optimize import brentq

from .dh import TorusWeight
from .errors import DomainError, PathDegeneracyError
from .surfaces import CP1, SurfaceSpec

T_GAUSS_NODES = 32
TAU_PANELS = 64
EDGE_REFINE = 4
GAUSS_PER_PANEL = 16
DEFAULT_DEG = 96

_TX, _TW = np.polynomial.legendre.leggauss(T_GAUSS_NODES)
_T_NODES = 0.5 * (_TX + 1.0)
_T_WEIGHTS = 0.5 * _TW
_GX, _GW = np.polynomial.legendre.leggauss(GAUSS_PER_PANEL)


def _zero_cheb(m):
    return Chebyshev([0.0], domain=[0.0, 2.0 * m])


@dataclass(frozen=True)
class SymplecticPotential:
    """U = (1/2)[tau log tau + (2m - tau) log(2m - tau)] + smooth part.

    The canonical part absorbs the full boundary log-singularity under the
    profile-slope convention phi'(0) = 2, phi'(2m) = -2, so the smooth part
    and its first two derivatives are bounded.
    """

    m: float
    smooth: Chebyshev

    @classmethod
    def canonical(cls, m: float) -> "SymplecticPotential":
        return cls(float(m), _zero_cheb(m))

    @classmethod
    def from_profile(cls, profile, m: float, deg: int = DEFAULT_DEG) -> "SymplecticPotential":
        """Legendre-side potential of a positive, boundary-compatible profile."""
        m = float(m)
        width = 2.0 * m

        def h(t):
            t = np.asarray(t, dtype=float)
            phi = np.asarray(profile.value(t), dtype=float)
            if np.any(phi[(t > 0) & (t < width)] <= 0.0):
                raise DomainError("profile must be positive on the open interval")
            return 1.0 / phi - 0.5 * (1.0 / t + 1.0 / (width - t))

        # interpolation nodes stay interior, so the cancelled singularity is
        # never evaluated at the endpoints
        smooth2 = Chebyshev.interpolate(h, deg, domain=[0.0, width])
        return cls(m, smooth2.integ(2, lbnd=m))

    def _parts(self, t, order):
        t = np.asarray(t, dtype=float)
        w = 2.0 * self.m
        if order == 0:
            tlog = np.where(t > 0.0, t * np.log(np.where(t > 0, t, 1.0)), 0.0)
            wlog = np.where(t < w, (w - t) * np.log(np.where(t < w, w - t, 1.0)), 0.0)
            return 0.5 * (tlog + wlog)
        if order == 1:
            return 0.5 * (np.log(t) - np.log(w - t))
        if order == 2:
            return 0.5 * (1.0 / t + 1.0 / (w - t))
        if order == 3:
            return 0.5 * (-1.0 / t ** 2 + 1.0 / (w - t) ** 2)
        if order == 4:
            return 0.5 * (2.0 / t ** 3 + 2.0 / (w - t) ** 3)
        raise ValueError(order)

    def value(self, t):
        return self._parts(t, 0) + self.smooth(np.asarray(t, dtype=float))

    def d1(self, t):
        return self._parts(t, 1) + self.smooth.deriv(1)(np.asarray(t, dtype=float))

    def d2(self, t):
        return self._parts(t, 2) + self.smooth.deriv(2)(np.asarray(t, dtype=float))

    def d3(self, t):
        return self._parts(t, 3) + self.smooth.deriv(3)(np.asarray(t, dtype=float))

    def d4(self, t):
        return self._parts(t, 4) + self.smooth.deriv(4)(np.asarray(t, dtype=float))

    def plus_smooth(self, extra: Chebyshev) -> "SymplecticPotential":
        return SymplecticPotential(self.m, self.smooth + extra)

    def smooth_max_dslope(self, n: int = 257) -> float:
        ts = np.linspace(0.0, 2.0 * self.m, n)
        return float(np.max(np.abs(self.smooth.deriv(1)(ts))))


class PotentialProfile:
    """Momentum profile phi = 1/U'' of a symplectic potential."""

    def __init__(self, potential: SymplecticPotential):
        self.potential = potential
        self.domain = (0.0, 2.0 * potential.m)

    def value(self, t):
        return 1.0 / self.potential.d2(t)

    def deriv(self, t):
        u2, u3 = self.potential.d2(t), self.potential.d3(t)
        return -u3 / u2 ** 2

    def deriv2(self, t):
        u2, u3, u4 = self.potential.d2(t), self.potential.d3(t), self.potential.d4(t)
        return -u4 / u2 ** 2 + 2.0 * u3 ** 2 / u2 ** 3


def potential_from_profile(profile, spec: SurfaceSpec, deg: int = DEFAULT_DEG) -> SymplecticPotential:
    if spec.kind != CP1:
        raise ValueError("symplectic-potential machinery is implemented on the line")
    return SymplecticPotential.from_profile(profile, spec.m, deg)


def profile_from_potential(potential: SymplecticPotential) -> PotentialProfile:
    return PotentialProfile(potential)


# -- paths -----------------------------------------------------------------------------


@dataclass(frozen=True)
class GeodesicPath:
    """Linear path of symplectic potentials: U_t = (1-t) U_0 + t U_1."""

    u0: SymplecticPotential
    u1: SymplecticPotential

    def __post_init__(self):
        if self.u0.m != self.u1.m:
            raise ValueError("endpoints live on different momentum intervals")

    def at(self, t: float) -> SymplecticPotential:
        return SymplecticPotential(self.u0.m, (1.0 - t) * self.u0.smooth + t * self.u1.smooth)

    def velocity(self, t: float) -> Chebyshev:
        return self.u1.smooth - self.u0.smooth


@dataclass(frozen=True)
class ReparametrizedPath:
    """The same trace run with a different clock: t -> base.at(gamma(t))."""

    base: GeodesicPath
    gamma: object
    dgamma: object

    def at(self, t: float) -> SymplecticPotential:
        return self.base.at(self.gamma(t))

    def velocity(self, t: float) -> Chebyshev:
        return self.dgamma(t) * self.base.velocity(self.gamma(t))


def vector_field_path(u0: SymplecticPotential, chi_dir: float) -> GeodesicPath:
    """Geodesic generated by the holomorphic flow of the weight-chi_dir field."""
    # chi_dir * tau in the Chebyshev basis on [0, 2m]
    affine = Chebyshev([chi_dir * u0.m, chi_dir * u0.m], domain=[0.0, 2.0 * u0.m])
    return GeodesicPath(u0, u0.plus_smooth(affine))


# -- quadrature grid --------------------------------------------------------------------


def _tau_nodes(m: float):
    """Composite Gauss nodes with 4x-refined endpoint panels."""
    width = 2.0 * m
    edges = [0.0]
    base = width / TAU_PANELS
    fine = base / EDGE_REFINE
    for i in range(EDGE_REFINE):
        edges.append(edges[-1] + fine)
    for i in range(TAU_PANELS - 2):
        edges.append(edges[-1] + base)
    for i in range(EDGE_REFINE):
        edges.append(edges[-1] + fine)
    edges = np.array(edges)
    edges[-1] = width
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GX[None, :]).ravel()
    weights = (half[:, None] * _GW[None, :]).ravel()
    return nodes, weights


def _weight_data(spec: SurfaceSpec, w: TorusWeight):
    nodes, wts = _tau_nodes(spec.m)
    meas = spec.measure
    dens = meas.density(nodes) * meas.scale
    expw = np.exp(-w.chi * nodes)
    mass_w = float(np.sum(dens * expw * wts))
    return nodes, wts, dens, expw, mass_w


# -- pointwise curvature from a potential --------------------------------------------------


def _curvature_terms(pot: SymplecticPotential, nodes, chi: float, lam: float):
    u2 = pot.d2(nodes)
    if np.any(u2 <= 0.0):
        raise PathDegeneracyError("potential lost convexity", t=None)
    u3, u4 = pot.d3(nodes), pot.d4(nodes)
    f = 1.0 / u2
    fp = -u3 / u2 ** 2
    fpp = -u4 / u2 ** 2 + 2.0 * u3 ** 2 / u2 ** 3
    s_lam = -(fpp - 2.0 * chi * fp + chi ** 2 * f) + lam * chi * nodes
    s_box = -fpp + chi * fp
    return f, fp, fpp, s_lam, s_box


def _inner_product(spec, w, lam, pot, vel_vals, grid):
    """<shat^lam(g_t), U-dot>_w / V_w at one path time."""
    nodes, wts, dens, expw, mass_w = grid
    f, fp, fpp, s_lam, s_box = _curvature_terms(pot, nodes, w.chi, lam)
    bary = float(np.sum(nodes * dens * expw * wts)) / mass_w
    sbar_lam = float(np.sum(s_box * dens * expw * wts)) / mass_w + lam * w.chi * bary
    shat = s_lam - sbar_lam
    return float(np.sum(shat * vel_vals * dens * expw * wts)) / mass_w


def muk_energy_path(spec: SurfaceSpec, w: TorusWeight, lam: float, path) -> float:
    """Path-integral energy along t in [0, 1] (Gauss, 32 nodes)."""
    if spec.kind != CP1:
        raise ValueError("energy functional is implemented on the line")
    grid = _weight_data(spec, w)
    nodes = grid[0]
    total = 0.0
    for t, tw in zip(_T_NODES, _T_WEIGHTS):
        pot = path.at(t)
        try:
            inner = _inner_product(spec, w, lam, pot, path.velocity(t)(nodes), grid)
        except PathDegeneracyError:
            raise PathDegeneracyError("potential lost convexity along the path", t=float(t))
        total += tw * inner
    return total


def muk_energy_endpoint_derivative(
    spec: SurfaceSpec, w: TorusWeight, lam: float, u_end: SymplecticPotential, direction: Chebyshev
) -> float:
    """d/ds of the energy when the endpoint moves by s * direction."""
    grid = _weight_data(spec, w)
    return _inner_product(spec, w, lam, u_end, direction(grid[0]), grid)


# -- moment-map composition -----------------------------------------------------------------


def invert_uprime(pot: SymplecticPotential, targets):
    """Solve U'(tau) = target for tau, vectorized.

    Parametrize tau = 2m sigmoid(y); then U'(tau(y)) = y/2 + smooth'(tau(y))
    is strictly increasing in y, Newton converges from y = 2 target, and the
    iterate stays inside the open interval by construction.
    """
    targets = np.asarray(targets, dtype=float)
    width = 2.0 * pot.m
    sp1 = pot.smooth.deriv(1)
    sp2 = pot.smooth.deriv(2)

    def tau_of(y):
        return width / (1.0 + np.exp(-y))

    y = 2.0 * targets
    ok = np.zeros(targets.shape, dtype=bool)
    for _ in range(60):
        tau = tau_of(y)
        F = 0.5 * y + sp1(tau) - targets
        ok = np.abs(F) <= 1e-13 * np.maximum(1.0, np.abs(targets))
        if np.all(ok):
            break
        dtau_dy = tau * (1.0 - tau / width)
        dF = 0.5 + sp2(tau) * dtau_dy
        step = np.where(ok, 0.0, F / np.maximum(dF, 1e-3))
        y = y - np.clip(step, -5.0, 5.0)
    if not np.all(ok):
        M = pot.smooth_max_dslope() + 1.0
        for i in np.nonzero(~ok)[0]:
            g = lambda yy: 0.5 * yy + float(sp1(tau_of(yy))) - targets[i]  # noqa: E731
            y[i] = brentq(g, 2.0 * (targets[i] - M), 2.0 * (targets[i] + M), xtol=1e-14)
    return tau_of(y)


def compose_moment_maps(u_from: SymplecticPotential, u_to: SymplecticPotential, taus):
    """tau_to(tau_from): the to-side momentum of the point with from-side
    momentum tau, i.e. (U_to')^{-1} (U_from')."""
    return invert_uprime(u_to, u_from.d1(taus))


# -- the endpoint-entropy route ----------------------------------------------------------------


def _require_convex(pot: SymplecticPotential, nodes, t=None):
    vals = pot.d2(nodes)
    if np.any(vals <= 0.0):
        raise PathDegeneracyError("potential lost convexity", t=t)
    return vals


def relative_entropy(spec: SurfaceSpec, w: TorusWeight, u0, u1) -> float:
    """int log(d nu / d mu) d nu / V for the two weighted volume measures.

    The density ratio at a common base point, written in the u1-momentum
    coordinate, is e^{-chi (tau - tau_0(tau))} phi_1(tau) / phi_0(tau_0(tau))
    with tau_0 the composed moment map.
    """
    nodes, wts, dens, expw, mass_w = _weight_data(spec, w)
    f1 = 1.0 / _require_convex(u1, nodes)
    tau0 = compose_moment_maps(u1, u0, nodes)
    f0 = 1.0 / _require_convex(u0, tau0)
    log_ratio = -w.chi * (nodes - tau0) + np.log(f1 / f0)
    return float(np.sum(log_ratio * dens * expw * wts)) / mass_w


def muk_energy_chen_tian(spec: SurfaceSpec, w: TorusWeight, lam: float, u0, u1) -> float:
    """Endpoint-entropy expression of the energy.

    The curvature integral is traded for the relative entropy of the two
    weighted measures; the remaining terms stay as t-integrals but involve
    only reference-metric data composed through the moment maps.
    """
    if spec.kind != CP1:
        raise ValueError("energy functional is implemented on the line")
    chi = w.chi
    grid = _weight_data(spec, w)
    nodes, wts, dens, expw, mass_w = grid

    f0_prof = PotentialProfile(u0)
    f0 = np.asarray(f0_prof.value(nodes))
    f0p = np.asarray(f0_prof.deriv(nodes))
    f0pp = np.asarray(f0_prof.deriv2(nodes))
    sbar0 = float(np.sum((-f0pp + chi * f0p) * dens * expw * wts)) / mass_w
    theta_bar = -chi * (float(np.sum(nodes * dens * expw * wts)) / mass_w)

    path = GeodesicPath(u0, u1)
    entropy = relative_entropy(spec, w, u0, u1)

    total = entropy
    for t, tw in zip(_T_NODES, _T_WEIGHTS):
        pot = path.at(t)
        vel = path.velocity(t)
        # two-form piece: base-momentum integral against the weight of g_t
        tau_t = compose_moment_maps(u0, pot, nodes)
        phidot_on_base = -vel(tau_t)
        two_form = float(np.sum(
            phidot_on_base * np.exp(-chi * tau_t) * (-f0pp + chi * f0p)
            * spec.measure.scale * wts
        ))
        # zero-form piece and the sbar/lam terms: g_t-momentum integrals
        tau0_of = compose_moment_maps(pot, u0, nodes)
        phidot = -vel(nodes)
        f0_at = np.asarray(f0_prof.value(tau0_of))
        f0p_at = np.asarray(f0_prof.deriv(tau0_of))
        zero_form = float(np.sum(
            phidot * (chi * f0p_at - chi ** 2 * f0_at) * dens * expw * wts
        ))
        base_int = float(np.sum(phidot * dens * expw * wts))
        theta_int = float(np.sum((-chi * nodes) * phidot * dens * expw * wts))
        term = (
            -(two_form + zero_form) / mass_w
            + sbar0 * base_int / mass_w
            + lam * (theta_int - theta_bar * base_int) / mass_w
        )
        total += tw * term
    return total


# -- convexity and the geodesic equation ---------------------------------------------------------


def muk_energy_partial(spec: SurfaceSpec, w: TorusWeight, lam: float, path, t_end: float) -> float:
    """Energy accumulated along the path restricted to [0, t_end]."""
    if t_end < 0.0:
        raise ValueError("t_end must be nonnegative")
    grid = _weight_data(spec, w)
    nodes = grid[0]
    total = 0.0
    for x, xw in zip(_TX, _TW):
        t = 0.5 * t_end * (x + 1.0)
        tw = 0.5 * t_end * xw
        pot = path.at(t)
        total += tw * _inner_product(spec, w, lam, pot, path.velocity(t)(nodes), grid)
    return total


def geodesic_convexity(spec: SurfaceSpec, w: TorusWeight, lam: float, path, t_grid):
    """Second differences of the energy along the path; all must be >= -1e-8."""
    ts = np.asarray(list(t_grid), dtype=float)
    if ts.ndim != 1 or len(ts) < 3:
        raise ValueError("need at least three path times")
    vals = np.array([muk_energy_partial(spec, w, lam, path, t) for t in ts])
    return list(np.diff(vals, 2))


def geodesic_equation_residual(path, t: float, rho_grid, ht: float = 1e-3, hr: float = 1e-4):
    """max |phi-double-dot - |dbar phi-dot|^2| over the rho grid, by finite
    differences of the Legendre-transformed Kahler potentials."""

    def kahler_potential(s, rho):
        pot = path.at(s)
        tau = invert_uprime(pot, rho)
        return rho * tau - pot.value(tau)

    rho_grid = np.asarray(rho_grid, dtype=float)
    worst = 0.0
    pot_t = path.at(t)
    for rho in rho_grid:
        u_mm = kahler_potential(t - ht, np.array([rho]))[0]
        u_0 = kahler_potential(t, np.array([rho]))[0]
        u_pp = kahler_potential(t + ht, np.array([rho]))[0]
        phi_ddot = (u_pp - 2.0 * u_0 + u_mm) / ht ** 2

        def phi_dot(rr):
            a = kahler_potential(t + ht, np.array([rr]))[0]
            b = kahler_potential(t - ht, np.array([rr]))[0]
            return (a - b) / (2.0 * ht)

        drho = (phi_dot(rho + hr) - phi_dot(rho - hr)) / (2.0 * hr)
        tau_star = invert_uprime(pot_t, np.array([rho]))[0]
        # |dbar phi-dot|^2 = (d_rho phi-dot)^2 / u''(rho) and u''(rho) = 1/U''(tau)
        grad_sq = drho ** 2 * float(pot_t.d2(tau_star))
        worst = max(worst, abs(phi_ddot - grad_sq))
    return worst
