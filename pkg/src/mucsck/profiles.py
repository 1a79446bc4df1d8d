"""Momentum-profile representations.

A profile is the function phi(tau) = u''(rho(tau)) on the moment interval;
metric positivity is phi > 0 on the open interval.  Three representations:

* PolynomialProfile -- explicit polynomial coefficients (references, the
  chi=0 branch on the line).
* ClosedFormProfile -- psi(tau) = (a + b tau) e^{chi tau} + poly(tau) with
  phi = psi / (1 - k tau); covers both solver branches (chi=0 stores
  a = b = 0 and a cubic).  For small |chi| or large |chi|*width the float
  representation cancels catastrophically, so evaluation switches to mpmath.
* SampledProfile -- values and derivatives on a grid, spline-interpolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from mpmath import mp, mpf

MP_DPS = 40


def _as_array(tau):
    return np.asarray(tau, dtype=float)


@dataclass(frozen=True)
class PolynomialProfile:
    coeffs: tuple
    domain: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))

    def value(self, tau):
        return np.polynomial.polynomial.polyval(_as_array(tau), self.coeffs)

    def deriv(self, tau):
        d = np.polynomial.polynomial.polyder(self.coeffs)
        return np.polynomial.polynomial.polyval(_as_array(tau), d)

    def deriv2(self, tau):
        d2 = np.polynomial.polynomial.polyder(self.coeffs, 2)
        return np.polynomial.polynomial.polyval(_as_array(tau), d2)


@dataclass(frozen=True)
class ClosedFormProfile:
    """phi = [(a + b tau) e^{chi tau} + poly(tau)] / (1 - k tau)."""

    a: float
    b: float
    chi: float
    poly_coeffs: tuple
    k: int
    domain: tuple
    lam: float = 0.0
    use_mp: bool = False
    _mp_abc: tuple = field(default=None, repr=False, compare=False)

    def with_mp_coeffs(self, a_mp, b_mp, poly_mp) -> "ClosedFormProfile":
        return ClosedFormProfile(
            float(a_mp), float(b_mp), self.chi, tuple(float(c) for c in poly_mp),
            self.k, self.domain, self.lam, use_mp=True,
            _mp_abc=(a_mp, b_mp, tuple(poly_mp)),
        )

    # -- psi = (1 - k tau) phi ------------------------------------------------

    def psi_value(self, tau):
        if self.use_mp:
            return self._psi_mp(tau, 0)
        t = _as_array(tau)
        return (self.a + self.b * t) * np.exp(self.chi * t) + np.polynomial.polynomial.polyval(
            t, self.poly_coeffs
        )

    def psi_deriv(self, tau):
        if self.use_mp:
            return self._psi_mp(tau, 1)
        t = _as_array(tau)
        e = np.exp(self.chi * t)
        d = np.polynomial.polynomial.polyder(self.poly_coeffs)
        return (self.b + self.chi * (self.a + self.b * t)) * e + np.polynomial.polynomial.polyval(t, d)

    def psi_deriv2(self, tau):
        if self.use_mp:
            return self._psi_mp(tau, 2)
        t = _as_array(tau)
        e = np.exp(self.chi * t)
        d2 = np.polynomial.polynomial.polyder(self.poly_coeffs, 2)
        expo = (2.0 * self.b * self.chi + self.chi ** 2 * (self.a + self.b * t)) * e
        return expo + np.polynomial.polynomial.polyval(t, d2)

    def _psi_mp(self, tau, order):
        a, b, poly = self._mp_abc
        chi = mpf(self.chi)
        t_arr = np.atleast_1d(_as_array(tau))
        out = np.empty(t_arr.shape, dtype=float)
        with mp.workdps(MP_DPS):
            for i, tv in enumerate(t_arr.ravel()):
                t = mpf(tv)
                e = mp.e ** (chi * t)
                if order == 0:
                    val = (a + b * t) * e + sum(c * t ** j for j, c in enumerate(poly))
                elif order == 1:
                    val = (b + chi * (a + b * t)) * e + sum(
                        j * c * t ** (j - 1) for j, c in enumerate(poly) if j >= 1
                    )
                else:
                    val = (2 * b * chi + chi ** 2 * (a + b * t)) * e + sum(
                        j * (j - 1) * c * t ** (j - 2) for j, c in enumerate(poly) if j >= 2
                    )
                out.ravel()[i] = float(val)
        return out if np.asarray(tau).shape else float(out.ravel()[0])

    # -- phi ------------------------------------------------------------------

    def _den(self, t):
        return 1.0 - self.k * t

    def value(self, tau):
        t = _as_array(tau)
        return self.psi_value(t) / self._den(t)

    def deriv(self, tau):
        t = _as_array(tau)
        den = self._den(t)
        return (self.psi_deriv(t) * den + self.k * self.psi_value(t)) / den ** 2

    def deriv2(self, tau):
        t = _as_array(tau)
        den = self._den(t)
        psi, dpsi, d2psi = self.psi_value(t), self.psi_deriv(t), self.psi_deriv2(t)
        return (d2psi * den ** 2 + 2.0 * self.k * dpsi * den + 2.0 * self.k ** 2 * psi) / den ** 3


@dataclass(frozen=True)
class SampledProfile:
    grid: tuple
    values: tuple
    deriv_values: tuple
    domain: tuple

    def __post_init__(self):
        from scipy.interpolate import CubicHermiteSpline

        spline = CubicHermiteSpline(
            np.asarray(self.grid, dtype=float),
            np.asarray(self.values, dtype=float),
            np.asarray(self.deriv_values, dtype=float),
        )
        object.__setattr__(self, "_spline", spline)

    def value(self, tau):
        return self._spline(_as_array(tau))

    def deriv(self, tau):
        return self._spline.derivative(1)(_as_array(tau))

    def deriv2(self, tau):
        return self._spline.derivative(2)(_as_array(tau))


def sample_profile(profile, n: int = 257) -> SampledProfile:
    lo, hi = profile.domain
    ts = np.linspace(lo, hi, n)
    return SampledProfile(tuple(ts), tuple(profile.value(ts)), tuple(profile.deriv(ts)), (lo, hi))
