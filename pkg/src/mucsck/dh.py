"""Quadrature against Duistermaat-Heckman measures with exponential weights.

A measure is an interval [tau_min, tau_max] carrying a polynomial density
p(tau) and a global scale.  Every functional in the toolkit reduces to
integrals of the form

    scale * int f(tau) p(tau) exp(-chi tau) dtau,

so this module is the single integration backend.  Averages and log-masses
are computed with max-subtraction in the exponent so that weights spanning
hundreds of orders of magnitude (continuity-path endpoints, properness
scans) stay finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError

GAUSS_NODES = 16
BASE_PANELS = 64
MAX_PANELS = 4096
PANEL_TOL = 1e-12

_GL_X, _GL_W = np.polynomial.legendre.leggauss(GAUSS_NODES)


@dataclass(frozen=True)
class TorusWeight:
    """Exponential weight e^{-chi tau}; chi = 0 is the unweighted case."""

    chi: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.chi):
            raise ValueError(f"chi must be finite, got {self.chi}")

    def scaled(self, t: float) -> "TorusWeight":
        return TorusWeight(self.chi * t)


@dataclass(frozen=True)
class DHMeasure:
    """Interval with polynomial density and scale: scale * p(tau) dtau.

    Parameters
    ----------
    tau_min, tau_max : float
        Support interval, tau_min < tau_max.
    density_coeffs : tuple of float
        Coefficients of p(tau) = sum c_i tau^i, low order first.
    scale : float
        Positive global factor (absorbs the 2*pi powers of fibre/base
        integration once, at construction).
    """

    tau_min: float
    tau_max: float
    density_coeffs: tuple = (1.0,)
    scale: float = 1.0

    def __post_init__(self):
        if not (self.tau_min < self.tau_max):
            raise ValueError(f"need tau_min < tau_max, got [{self.tau_min}, {self.tau_max}]")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        object.__setattr__(self, "density_coeffs", tuple(float(c) for c in self.density_coeffs))
        # densities in scope have degree <= 1, so 1001 samples plus endpoint
        # signs decide positivity
        ts = np.linspace(self.tau_min, self.tau_max, 1001)
        vals = self.density(ts)
        interior = vals[1:-1]
        if np.any(interior <= 0.0):
            bad = ts[1:-1][interior <= 0.0][0]
            raise ValueError(f"density is not positive on the open interval (p({bad}) <= 0)")
        if vals[0] < 0.0 or vals[-1] < 0.0:
            raise ValueError("density is negative at an interval endpoint")

    def density(self, tau):
        return np.polynomial.polynomial.polyval(np.asarray(tau, dtype=float), self.density_coeffs)

    @property
    def width(self) -> float:
        return self.tau_max - self.tau_min

    def shifted(self, c: float) -> "DHMeasure":
        """The measure of tau' = tau + c (density transported accordingly)."""
        poly = np.polynomial.polynomial.Polynomial(self.density_coeffs)
        moved = poly(np.polynomial.polynomial.Polynomial([-c, 1.0]))
        return DHMeasure(self.tau_min + c, self.tau_max + c, tuple(moved.coef), self.scale)

    def with_scale(self, scale: float) -> "DHMeasure":
        return DHMeasure(self.tau_min, self.tau_max, self.density_coeffs, scale)


def _panel_nodes(measure: DHMeasure, panels: int):
    edges = np.linspace(measure.tau_min, measure.tau_max, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    weights = half[:, None] * _GL_W[None, :]
    return nodes.ravel(), weights.ravel()


def _raw_integral(measure: DHMeasure, f, chi: float, panels: int, shift: float) -> float:
    nodes, weights = _panel_nodes(measure, panels)
    fv = np.asarray(f(nodes), dtype=float)
    if fv.shape != nodes.shape:
        fv = np.broadcast_to(fv, nodes.shape)
    if not np.all(np.isfinite(fv)):
        bad = nodes[~np.isfinite(fv)][0]
        raise EvaluationError(f"integrand is not finite at tau={bad}", node=bad)
    vals = fv * measure.density(nodes) * np.exp(-chi * nodes - shift)
    return float(np.sum(vals * weights))


def _integrate_shifted(measure: DHMeasure, f, chi: float, shift: float) -> float:
    """scale * int f p e^{-chi tau - shift} dtau by panel-doubling Gauss-Legendre."""
    panels = BASE_PANELS
    prev = _raw_integral(measure, f, chi, panels, shift)
    while panels < MAX_PANELS:
        panels *= 2
        cur = _raw_integral(measure, f, chi, panels, shift)
        if abs(cur - prev) <= PANEL_TOL * max(1.0, abs(cur)):
            return measure.scale * cur
        prev = cur
    return measure.scale * prev


def _exponent_shift(measure: DHMeasure, chi: float) -> float:
    """max of -chi*tau over the interval; subtracting it keeps exponents <= 0."""
    return max(-chi * measure.tau_min, -chi * measure.tau_max)


def integrate_weighted(measure: DHMeasure, f, w: TorusWeight) -> float:
    """scale * int f(tau) p(tau) e^{-chi tau} dtau.

    Deterministic for a fixed node count; raises EvaluationError naming the
    node if f is non-finite there.
    """
    return _integrate_shifted(measure, f, w.chi, 0.0)


def log_mass(measure: DHMeasure, w: TorusWeight) -> float:
    """log of integrate_weighted(measure, 1, w), stable for any chi."""
    shift = _exponent_shift(measure, w.chi)
    val = _integrate_shifted(measure, lambda t: np.ones_like(t), w.chi, shift)
    return math.log(val) + shift


def weighted_average(measure: DHMeasure, f, w: TorusWeight) -> float:
    """int f p e^{-chi tau} / int p e^{-chi tau}; overflow-safe in chi."""
    shift = _exponent_shift(measure, w.chi)
    num = _integrate_shifted(measure, f, w.chi, shift)
    den = _integrate_shifted(measure, lambda t: np.ones_like(t), w.chi, shift)
    return num / den


def moment(measure: DHMeasure, w: TorusWeight, order: int) -> float:
    """integrate_weighted with f = tau^order, order <= 4."""
    if not (isinstance(order, (int, np.integer)) and 0 <= order <= 4):
        raise ValueError(f"order must be an integer in [0, 4], got {order!r}")
    return integrate_weighted(measure, lambda t: t ** order, w)


def barycenter(measure: DHMeasure, w: TorusWeight) -> float:
    """Weighted mean of tau: moment 1 over moment 0 (computed shift-safely)."""
    return weighted_average(measure, lambda t: t, w)


def variance(measure: DHMeasure, w: TorusWeight) -> float:
    """Weighted variance of tau; the nu-kernel for unit directions."""
    mean = barycenter(measure, w)
    return weighted_average(measure, lambda t: (t - mean) ** 2, w)


def unit_density_mass(tau_min: float, tau_max: float, chi: float) -> float:
    """Closed form of int_a^b e^{-chi tau} dtau with a Taylor branch near chi=0.

    The /chi formula cancels catastrophically for small chi; below 1e-6 a
    6-term expansion in chi is exact to double precision.
    """
    if abs(chi) < 1e-6:
        total = 0.0
        for j in range(6):
            total += (-chi) ** j * (tau_max ** (j + 1) - tau_min ** (j + 1)) / math.factorial(j + 1)
        return total
    return (math.exp(-chi * tau_min) - math.exp(-chi * tau_max)) / chi
