import numpy as np
import pytest

from dampscat import coefficients as C
from dampscat import spectral as S
from dampscat import zones as Z
from dampscat.errors import DomainError, RegimeError
from dampscat.propagator import free_propagator, integrate_fundamental

MU03 = C.mu_over_1pt(0.3)
SMALL = Z.ZoneGrid(lambda_min=1e-2, n_lambda=6, n_t=12)


@pytest.mark.parametrize("lam,n,expected", [(0.1, 1.0, 9.0), (2.0, 1.0, 0.0), (0.5, 2.0, 3.0)])
def test_t_xi(lam, n, expected):
    assert Z.t_xi(lam, n) == pytest.approx(expected)


def test_t_xi_kernel_mode_rejected():
    with pytest.raises(DomainError):
        Z.t_xi(0.0, 1.0)


def test_escalation_reaches_target():
    n, d, k = Z.escalate_zone_n(C.mu_over_1pt(1.0), 0.5)
    assert d >= Z.DET_TARGET and k >= 1 and n == 0.5 * 2**k


def test_refined_grid():
    g = SMALL.refined(2)
    assert (g.lambda_min, g.n_lambda, g.n_t, g.level) == (2.5e-3, 24, 48, 2)


def test_free_constant_at_most_one():
    rep = Z.check_diss_bound_c1(C.zero(), gamma=0.0, grid=SMALL)
    assert rep.constant <= 1.0 + 1e-9


def test_c1_bound_stable_under_refinement():
    sweep = Z.refinement_sweep(Z.check_diss_bound_c1, MU03, 3, SMALL, gamma=0.6)
    assert sweep.stable and np.all(np.isfinite(sweep.constants))


@pytest.mark.parametrize("mu", [1.0, 0.75])
def test_c2_bound_stable_under_refinement(mu):
    sweep = Z.refinement_sweep(Z.check_diss_bound_c2, C.mu_over_1pt(mu), 3, SMALL)
    assert sweep.stable


def test_footnote_constant_grows():
    coeff = C.footnote_counterexample()
    sweep = Z.refinement_sweep(Z.check_diss_bound_c1, coeff, 3, Z.ZoneGrid(1e-3, 8, 16),
                               gamma=0.5)
    assert sweep.increasing


def test_regime_gate():
    with pytest.raises(RegimeError):
        Z.check_diss_bound_c2(MU03)
    with pytest.raises(RegimeError):
        Z.check_diss_bound_c1(C.mu_over_1pt(1.0))


def test_kernel_modes_not_scanned():
    m = S.neumann_interval(4)
    rep = Z.check_diss_bound_c2(C.mu_over_1pt(1.0), model=m, grid=SMALL)
    assert all(r[1] > 0 for r in rep.rows)


def test_report_rows_schema():
    rep = Z.check_diss_bound_c1(MU03, gamma=0.6, grid=SMALL)
    assert all(len(r) == 6 and r[0] == "lemma_c1" and r[3] in Z.ENTRIES for r in rep.rows)
    assert rep.constant == max(r[4] for r in rep.rows)


def test_volterra_free_case():
    v, w = Z.volterra_solve_diss(C.zero(), 0.5, (1.0, 0.0), 1.5)
    assert v == pytest.approx(np.cos(0.75), abs=1e-10)
    assert w == pytest.approx(-np.sin(0.75), abs=1e-10)


def test_volterra_small_lambda_limit():
    v, w = Z.volterra_solve_diss(MU03, 1e-8, (1.0, 0.0), 5.0)
    assert v == pytest.approx(1.0, abs=1e-6) and abs(w) < 1e-6


def test_volterra_against_direct():
    lam, t = 0.05, 10.0
    E = integrate_fundamental(MU03, lam, 0.0, t, tol=1e-12)
    for eta in ((1.0, 0.0), (0.0, 1.0)):
        v, w = Z.volterra_solve_diss(MU03, lam, eta, t)
        np.testing.assert_allclose([v, w], E @ np.array(eta), atol=1e-8)


def test_volterra_free_matches_rotation():
    v, w = Z.volterra_solve_diss(C.zero(), 0.3, (0.0, 1.0), 2.0)
    np.testing.assert_allclose([v, w], free_propagator(0.3, 2.0)[:, 1], atol=1e-10)
