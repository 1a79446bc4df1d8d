"""Numerical laboratory for constant weighted-scalar-curvature metrics on
circle-symmetric surfaces: quadrature against pushforward measures, the
momentum-profile boundary-value solver, the weighted volume functional and
its variations, continuity-path tracing, and the weighted Mabuchi energy.
"""

from .dh import DHMeasure, TorusWeight, barycenter, integrate_weighted, moment
from .functionals import FunctionalContext, VolReport
from .path import PathPoint, PhaseDiagram
from .profiles import ClosedFormProfile, PolynomialProfile, SampledProfile
from .solver import SolveResult, solve_chi
from .surfaces import SurfaceSpec

__all__ = [
    "DHMeasure",
    "TorusWeight",
    "integrate_weighted",
    "moment",
    "barycenter",
    "SurfaceSpec",
    "SolveResult",
    "solve_chi",
    "FunctionalContext",
    "VolReport",
    "PathPoint",
    "PhaseDiagram",
    "ClosedFormProfile",
    "PolynomialProfile",
    "SampledProfile",
]

__version__ = "0.1.0"
