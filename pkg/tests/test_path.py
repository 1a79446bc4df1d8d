import numpy as np
import pytest
from scipy.optimize import brentq

from mucsck.dh import TorusWeight
from mucsck.functionals import FunctionalContext, find_critical
from mucsck.path import (
    PhaseDiagram,
    WindowExhaustedError,
    extremal_limit_check,
    lambda_freeze_estimate,
    lambda_of_chi_p2blowup,
    phase_diagram,
    tau0_positivity,
    tau0_sign_polynomials,
    trace,
)
from mucsck.solver import scan_chi_roots, solve_coefficients
from mucsck.surfaces import SurfaceSpec

P2 = SurfaceSpec.p2_blowup()
CP1 = SurfaceSpec.cp1(1.0)

# frozen regression: uniqueness threshold on the ruled surface 2 pi (F + 2B)
RULED_LAMBDA_FREEZE = 2.9701


# -- the closed form ---------------------------------------------------------------


def test_lambda_at_minus_one_positive():
    assert lambda_of_chi_p2blowup(-1.0) > 0.0


def test_lambda_diverges_at_origin():
    assert lambda_of_chi_p2blowup(-1e-3) < -500.0
    assert lambda_of_chi_p2blowup(-1e-4) < lambda_of_chi_p2blowup(-1e-3) * 9


def test_lambda_monotone_decreasing():
    grid = np.linspace(-5.0, -1e-3, 400)
    vals = [lambda_of_chi_p2blowup(c) for c in grid]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_lambda_rejects_nonnegative_chi():
    with pytest.raises(ValueError):
        lambda_of_chi_p2blowup(0.5)


# -- tracing -----------------------------------------------------------------------


def test_soliton_point():
    pts = trace(P2, [1.0], (-1.0, -0.1))
    root = brentq(lambda c: lambda_of_chi_p2blowup(c) - 1.0, -1.5, -0.3, xtol=1e-14)
    assert pts[0].ok
    assert pts[0].chi == pytest.approx(root, abs=1e-8)
    # the soliton instance: weighted curvature constant on the whole grid
    assert pts[0].result.ode_sup_residual <= 1e-8


def test_path_negative_lambda_window_and_closed_form():
    grid = [1.0, 0.5, 0.0, -1.0, -3.0, -10.0]
    pts = trace(P2, grid, (-1.0, -0.1))
    for p in pts:
        assert p.ok and p.result.certified
        assert abs(lambda_of_chi_p2blowup(p.chi) - p.lam) <= 1e-7
        if p.lam < 0.0:
            assert -0.2649 < p.chi < 0.0


def test_trace_grid_refinement_stable():
    coarse = trace(P2, [1.0, 0.0, -1.0], (-1.0, -0.1))
    fine = trace(P2, [1.0, 0.5, 0.0, -0.5, -1.0], (-1.0, -0.1))
    fine_by_lam = {p.lam: p.chi for p in fine}
    for p in coarse:
        assert abs(fine_by_lam[p.lam] - p.chi) <= 1e-8


def test_trace_line_branch_grows():
    pts = trace(CP1, [5.0, 6.0, 8.0], (0.1, 5.0))
    chis = [p.chi for p in pts]
    assert all(p.ok for p in pts)
    assert chis[0] < chis[1] < chis[2]


def test_nonzero_criticals_match_solver_roots():
    for lam in (5.0, 6.0):
        crit = [c for c in find_critical(FunctionalContext(CP1), lam) if c != 0.0]
        roots = scan_chi_roots(CP1, lam)
        assert len(crit) == len(roots) == 2
        for c, r in zip(sorted(crit), sorted(roots)):
            assert c == pytest.approx(r, abs=1e-8)


def test_trace_records_gaps():
    # no nonzero root below the threshold: the failed first point is a gap
    pts = trace(CP1, [3.0, 5.0], (0.5, 5.0))
    assert not pts[0].ok and pts[0].result is None
    assert pts[1].ok  # recovery from the original bracket after a gap


def test_trace_merges_onto_csck_branch_below_threshold():
    # continuing the nonzero branch below the threshold lands on the
    # constant-curvature solution at the origin rather than failing
    pts = trace(CP1, [5.0, 3.0], (0.1, 5.0))
    assert pts[1].ok
    assert pts[1].chi == pytest.approx(0.0, abs=1e-9)


def test_trace_rejects_non_monotone_grid():
    with pytest.raises(ValueError):
        trace(CP1, [1.0, 3.0, 2.0], (0.1, 5.0))


# -- extremal limit -----------------------------------------------------------------


def test_extremal_limit_p2():
    lc2, ext = extremal_limit_check(P2, -100.0)
    lc3, ext3 = extremal_limit_check(P2, -1000.0)
    assert ext == pytest.approx(ext3, rel=1e-12)
    assert abs(lc3 - ext) / abs(ext) <= 1e-2
    assert abs(lc2 - ext) / abs(lc3 - ext) >= 5.0


def test_extremal_limit_line_both_vanish():
    lc, ext = extremal_limit_check(CP1, -1000.0)
    assert abs(ext) <= 1e-12
    assert abs(lc) <= 1e-8


# -- lambda_freeze ------------------------------------------------------------------


@pytest.mark.parametrize("m", [1.0, 2.0])
def test_lambda_freeze_line(m):
    est = lambda_freeze_estimate(SurfaceSpec.cp1(m), (4.0 / m - 1.0, 4.0 / m + 1.0))
    assert est == pytest.approx(4.0 / m, abs=1e-3)


def test_lambda_freeze_ruled_finite_positive():
    est = lambda_freeze_estimate(SurfaceSpec.ruled(1, 0, 2.0), (0.5, 30.0))
    assert est == pytest.approx(RULED_LAMBDA_FREEZE, abs=2e-3)
    assert est > 0.0


def test_lambda_freeze_window_exhausted():
    with pytest.raises(WindowExhaustedError) as err:
        lambda_freeze_estimate(CP1, (5.0, 6.0))
    assert err.value.count_lo == err.value.count_hi == 3


# -- tau0 ---------------------------------------------------------------------------


def test_tau0_positive_example():
    tau0, verdict = tau0_positivity(-0.1, -1.0)
    assert verdict and tau0 > 0.0


def test_tau0_two_route_consistency(rng):
    for _ in range(12):
        chi = rng.uniform(-0.9, -0.02)
        lam = -rng.uniform(0.05, 8.0)
        tau0, _ = tau0_positivity(chi, lam)
        al, be, ga, de = tau0_sign_polynomials(chi)
        poly_route = -(al + lam * be) / (chi * (ga + lam * de))
        assert tau0 == pytest.approx(poly_route, rel=1e-8)


def test_tau0_matches_coefficients_directly(rng):
    chi, lam = -0.2, -5.0
    a, b, _ = solve_coefficients(P2, lam, TorusWeight(chi))
    tau0, _ = tau0_positivity(chi, lam)
    assert tau0 == pytest.approx(-a / b - 3.0 / chi, rel=1e-12)


def test_sign_patterns():
    # alpha, gamma positive on the full interval (-1, 0)
    for chi in np.linspace(-0.999, -1e-3, 200):
        al, be, ga, de = tau0_sign_polynomials(chi)
        assert al > 0.0 and ga > 0.0
    # beta, delta negative on the subinterval actually swept by the path
    for chi in np.linspace(-0.15, -1e-3, 100):
        _, be, _, de = tau0_sign_polynomials(chi)
        assert be < 0.0 and de < 0.0


def test_alpha_negative_outside():
    assert tau0_sign_polynomials(-1.5)[0] < 0.0


def test_tau0_positive_on_path():
    for chi in (-0.26, -0.2, -0.1, -0.02):
        lam = lambda_of_chi_p2blowup(chi)
        assert lam < 0.0
        _, verdict = tau0_positivity(chi, lam)
        assert verdict


def test_tau0_preconditions():
    with pytest.raises(ValueError):
        tau0_positivity(0.5, -1.0)
    with pytest.raises(ValueError):
        tau0_positivity(-0.5, 1.0)


# -- phase diagram -------------------------------------------------------------------


def test_phase_diagram_counts_and_transition():
    pd = phase_diagram(CP1, [3.5, 4.5])
    assert pd.critical_counts == (1, 3)
    assert pd.transition_lambda == pytest.approx(4.0, abs=1e-3)


def test_phase_metastable_classification():
    pd = phase_diagram(CP1, [4.5])
    row = dict(pd.classifications[0])
    assert row[0.0] == "muvol_min"  # the supercooled state
    nonzero = [k for c, k in pd.classifications[0] if c != 0.0]
    assert nonzero == ["muvol_max", "muvol_max"]


def test_phase_counts_odd():
    pd = phase_diagram(CP1, [2.0, 4.2, 6.0])
    assert all(c % 2 == 1 for c in pd.critical_counts)


def test_phase_diagram_serializes():
    pd = phase_diagram(CP1, [3.5, 4.5])
    d = pd.to_dict()
    assert d["critical_counts"] == [1, 3]
    assert isinstance(pd, PhaseDiagram)


def test_soliton_point_structural_degeneration():
    # at the soliton parameter the tau e^{chi tau} mode drops out of the
    # solved profile and the curvature constant is 2 - chi (derived
    # consistency, frozen as a regression)
    pts = trace(P2, [1.0], (-1.0, -0.1))
    res = pts[0].result
    assert abs(res.b) <= 1e-10
    assert res.c == pytest.approx(2.0 - res.chi, rel=1e-12)
