import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dampscat import coefficients as C
from dampscat import diagonal as D
from dampscat.errors import DomainError, ZoneConstantError
from dampscat.propagator import free_propagator, integrate_fundamental
from dampscat.zones import t_xi


def _const(b):
    return C.custom(lambda t: b + 0.0 * np.asarray(t, dtype=float),
                    lambda t: 0.0 * np.asarray(t, dtype=float))


MU03 = C.mu_over_1pt(0.3)


def test_n1_constant_coefficient():
    N = D.n1(_const(0.2), 0.0, 1.0)
    np.testing.assert_allclose(N, [[1.0, 0.1j], [-0.1j, 1.0]], atol=1e-16)
    assert D.det_n1(_const(0.2), 0.0, 1.0) == pytest.approx(0.99, abs=1e-15)


def test_n1_identity_without_damping():
    np.testing.assert_array_equal(D.n1(C.zero(), 3.0, 2.0), np.eye(2))


def test_small_zone_constant_detected():
    with pytest.raises(ZoneConstantError):
        D.det_n1(_const(4.0), 0.0, 1.0)


@given(st.floats(0.0, 10.0), st.floats(0.05, 50.0))
def test_commutator_identity(b, lam):
    c = _const(b)
    Dg = np.diag([-1j * lam, 1j * lam])
    N = D.n_first(c, 0.0, lam)
    np.testing.assert_allclose(Dg @ N - N @ Dg, -b * D.SIGMA_X, atol=1e-14)


@given(st.floats(0.0, 100.0), st.floats(0.0, 1e4), st.floats(0.0, 1e4))
def test_e0_tilde_unitary(lam, t, s):
    E = D.e0_tilde(lam, t, s)
    np.testing.assert_allclose(E @ E.conj().T, np.eye(2), atol=1e-14)


@given(st.floats(0.0, 50.0), st.floats(-50.0, 50.0))
def test_e0_tilde_conjugates_to_rotation(lam, t):
    np.testing.assert_allclose(D.M @ D.e0_tilde(lam, t) @ D.M_INV, free_propagator(lam, t),
                               atol=1e-13)


def test_m_inverse():
    np.testing.assert_allclose(D.M @ D.M_INV, np.eye(2), atol=1e-16)


def test_r1_vanishes_without_damping():
    assert not np.any(D.r1(C.zero(), 2.0, 1.0))


def test_r1_closed_form_matches_matrix_form():
    for t, lam in [(0.0, 1.0), (3.0, 0.5), (40.0, 7.0)]:
        b, bp = MU03.pair(t)
        entries = np.array(D.r1_entries(b, bp, lam)).reshape(2, 2)
        np.testing.assert_allclose(entries, D.r1(MU03, t, lam), atol=1e-15)


def test_r1_real_structure():
    X = D.r1(MU03, 2.0, 1.3)
    np.testing.assert_allclose(X.conj(), D.SIGMA_X @ X @ D.SIGMA_X, atol=1e-16)


def test_r1_decay_rate():
    # |R1| lam (1+t)^2 stays bounded on the hyperbolic zone
    vals = [D.r1_norm(MU03, t, lam) * lam * (1 + t) ** 2
            for lam in (0.05, 0.5, 5.0) for t in np.geomspace(t_xi(lam, 1.0) + 1e-9, 1e5, 30)]
    assert max(vals) < 1.0


def test_q1_identity_without_damping():
    np.testing.assert_allclose(D.q1(C.zero(), 2.0, 0.0, 30.0), np.eye(2), atol=1e-14)


def test_q1_ode_against_peano_baker():
    lam, s = 5.0, 0.0
    ode = D.q1(MU03, lam, s, s + 1.0, tol=1e-12)
    pb3, _ = D.q1_peano_baker(MU03, lam, s, s + 1.0, kmax=3)
    pb4, norms = D.q1_peano_baker(MU03, lam, s, s + 1.0, kmax=4)
    # the three-term gap is the size of the fourth term
    assert np.abs(ode - pb3).max() <= norms[3]
    assert np.abs(ode - pb4).max() < 0.1 * np.abs(ode - pb3).max()


def test_peano_baker_constant_generator_is_exponential():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    val, _ = D.peano_baker(lambda t: np.broadcast_to(A, np.shape(t) + (2, 2)), 0.0, 0.5,
                        kmax=12, n_grid=2001)
    np.testing.assert_allclose(val, free_propagator(1.0, 0.5), atol=1e-10)


@pytest.mark.parametrize("lam,t", [(1.0, 50.0), (0.7, 300.0), (20.0, 100.0)])
def test_representation_against_direct(lam, t):
    s = t_xi(lam, 1.0)
    E = integrate_fundamental(MU03, lam, s, t, tol=1e-12)
    R = D.hyperbolic_representation(MU03, lam, s, t, tol=1e-12)
    assert np.linalg.norm(R - E) / np.linalg.norm(E) < 1e-8


def test_representation_free_case():
    R = D.hyperbolic_representation(C.zero(), 3.0, 1.0, 9.0)
    np.testing.assert_allclose(R, free_propagator(3.0, 8.0), atol=1e-13)


def test_representation_determinant():
    lam, s, t = 2.0, 0.0, 20.0
    R = D.hyperbolic_representation(MU03, lam, s, t)
    liouville = C.lambda_ratio(MU03, s, t) ** 2
    assert np.linalg.det(R).real == pytest.approx(liouville, rel=1e-9)


def test_representation_requires_hyperbolic_zone():
    with pytest.raises(DomainError):
        D.hyperbolic_representation(MU03, 0.1, 0.0, 5.0)


def test_q1_limit_free():
    lim = D.q1_limit(C.zero(), 1.0, 0.0)
    np.testing.assert_allclose(lim.matrix, np.eye(2), atol=1e-14)
    assert lim.conv_error == 0.0


def test_q1_limit_det_and_monotone_error():
    s = 0.0
    one = D.q1_limit(MU03, 1.0, s)
    ten = D.q1_limit(MU03, 10.0, s)
    assert np.linalg.det(one.matrix).real == pytest.approx(D.det_n1(MU03, s, 1.0), abs=1e-9)
    assert one.conv_error < 1e-9 and ten.conv_error < 1e-9
    q1_T = D.q1(MU03, 10.0, s, 100.0)
    q1_T1 = D.q1(MU03, 1.0, s, 100.0)
    # larger spectral value converges faster at equal T
    assert (np.linalg.norm(ten.matrix - D.q1_tail_factor(MU03, 10.0, 100.0) @ q1_T)
            <= np.linalg.norm(one.matrix - D.q1_tail_factor(MU03, 1.0, 100.0) @ q1_T1))


@given(st.floats(0.5, 20.0), st.floats(0.0, 5.0), st.floats(0.0, 100.0))
def test_q1_norm_bound(lam, ds, dt):
    from dampscat.coefficients import integrate
    s = t_xi(lam, 1.0) + ds
    Q = D.q1(MU03, lam, s, s + dt)
    growth = np.exp(integrate(lambda t: D.r1_norm(MU03, float(t), lam), s, s + dt)) if dt else 1.0
    assert np.linalg.norm(Q, 2) <= growth * (1.0 + 1e-9)
