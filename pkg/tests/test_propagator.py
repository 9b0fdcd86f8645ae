import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dampscat import coefficients as C
from dampscat import spectral as S
from dampscat.diagonal import hyperbolic_representation
from dampscat.errors import DomainError
from dampscat.propagator import (evolve, free_propagator, fundamental_series,
                                 integrate_fundamental, kernel_mode_solution)


def test_free_propagator_quarter_turn():
    np.testing.assert_allclose(free_propagator(1.0, math.pi / 2), [[0, 1], [-1, 0]], atol=1e-15)


def test_free_propagator_kernel_mode_is_identity():
    np.testing.assert_array_equal(free_propagator(0.0, 3.7), np.eye(2))


@given(st.floats(0.0, 100.0), st.floats(-1e3, 1e3))
def test_free_group_property(lam, t):
    np.testing.assert_allclose(free_propagator(lam, t) @ free_propagator(lam, -t), np.eye(2),
                               atol=1e-14)


@given(st.floats(0.1, 30.0), st.floats(0.0, 20.0), st.floats(0.0, 20.0))
def test_zero_coefficient_gives_free_flow(lam, s, dt):
    E = integrate_fundamental(C.zero(), lam, s, s + dt)
    np.testing.assert_allclose(E, free_propagator(lam, dt), atol=1e-10)


def test_kernel_column_decays_like_inverse_lambda_squared():
    c = C.mu_over_1pt(1.0)
    t = np.array([1.0, 10.0, 100.0])
    E = fundamental_series(c, 0.0, 0.0, t)
    np.testing.assert_allclose(E[:, 1, 1], (1.0 + t) ** -2, rtol=1e-10)
    np.testing.assert_allclose(E[:, 0, 1], 0.0, atol=1e-15)


def test_agrees_with_diagonal_path():
    c = C.mu_over_1pt(0.3)
    E = integrate_fundamental(c, 1.0, 0.0, 50.0)
    R = hyperbolic_representation(c, 1.0, 0.0, 50.0)
    assert np.linalg.norm(E - R) / np.linalg.norm(E) < 1e-6


def test_liouville_determinant():
    c = C.mu_over_1pt(0.3)
    E = integrate_fundamental(c, 2.0, 1.0, 30.0)
    assert np.linalg.det(E) == pytest.approx(C.lambda_ratio(c, 1.0, 30.0) ** 2, rel=1e-9)


def test_kernel_mode_closed_form():
    c = C.mu_over_1pt(1.0)
    t = np.array([0.0, 1.0, 9.0])
    u, up = kernel_mode_solution(c, 2.0, 3.0, t)
    np.testing.assert_allclose(up, 3.0 / (1.0 + t) ** 2, rtol=1e-12)
    np.testing.assert_allclose(u, 2.0 + 3.0 * (1.0 - 1.0 / (1.0 + t)), rtol=1e-10)


def test_kernel_mode_free():
    u, up = kernel_mode_solution(C.zero(), 1.0, 2.0, np.array([5.0]))
    assert u[0] == pytest.approx(11.0) and up[0] == pytest.approx(2.0)


@given(st.floats(0.0, 1e3))
def test_kernel_mode_first_integral(t):
    c = C.mu_over_1pt(0.3)
    _, up = kernel_mode_solution(c, 0.0, 1.5, t)
    assert up * C.lambda_at(c, t) ** 2 == pytest.approx(1.5, rel=1e-12)


def test_energy_conserved_without_damping():
    m = S.dirichlet_interval(16)
    traj = evolve(m, C.zero(), S.random_data(m, seed=2), np.linspace(0.0, 100.0, 11))
    e = traj.energies()
    assert np.max(np.abs(e / e[0] - 1.0)) < 1e-9


def test_zero_data_stays_zero():
    m = S.dirichlet_interval(4)
    d = S.DataVector(np.zeros(4), np.zeros(4))
    assert not np.any(evolve(m, C.mu_over_1pt(0.3), d, [1.0, 2.0]).states)


def test_self_convergence():
    # loose tolerance run against a tight reference
    c = C.power_law(2.0)
    ref = integrate_fundamental(c, 1.0, 0.0, 40.0, tol=1e-12)
    loose = integrate_fundamental(c, 1.0, 0.0, 40.0, tol=1e-6)
    assert 0.0 < np.abs(loose - ref).max() < 1e-4


def test_trajectory_rows_and_header():
    m = S.neumann_interval(3)
    d = S.DataVector(np.array([1.0, 1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0, 0.0]))
    traj = evolve(m, C.mu_over_1pt(1.0), d, [1.0, 2.0])
    assert traj.header() == ["t", "lambda_t", "energy_E"]
    wide = traj.header(dump_modes=True)
    assert len(wide) == 3 + 4 * len(m)
    assert all(len(r) == len(wide) for r in traj.rows(dump_modes=True))


def test_times_must_increase():
    m = S.dirichlet_interval(2)
    with pytest.raises(DomainError):
        evolve(m, C.zero(), S.random_data(m), [2.0, 1.0])


@given(st.floats(0.0, 20.0), st.floats(0.0, 10.0), st.floats(0.0, 50.0))
def test_contractive(lam, s, dt):
    E = integrate_fundamental(C.mu_over_1pt(0.3), lam, s, s + dt)
    assert np.linalg.norm(E, 2) <= 1.0 + 1e-9
