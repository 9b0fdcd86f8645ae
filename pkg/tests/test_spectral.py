import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dampscat import spectral as S


def _model(lams, weights=None):
    lams = np.asarray(lams, dtype=float)
    w = np.ones_like(lams) if weights is None else np.asarray(weights, dtype=float)
    return S.SpectralModel(lams, w, lams == 0.0)


def test_energy_norm_pythagoras():
    m = _model([1.0, 1.0])
    d = S.DataVector(np.array([3.0, 4.0]), np.zeros(2))
    assert S.energy_norm(m, d) == pytest.approx(5.0)


def test_energy_norm_zero_data():
    m = S.dirichlet_interval(4)
    assert S.energy_norm(m, S.DataVector(np.zeros(4), np.zeros(4))) == 0.0


def test_kernel_mode_has_no_potential_energy():
    m = _model([0.0])
    assert S.energy_norm(m, S.DataVector(np.ones(1), np.zeros(1))) == 0.0


def test_e_gamma_norm_single_mode():
    m = _model([0.5])
    d = S.DataVector(np.ones(1), np.zeros(1))
    assert S.e_gamma_norm(m, d, gamma=1.0, zone_n=1.0) == pytest.approx(2.0)


def test_e_gamma_zero_equals_energy_above_zone():
    m = _model([1.0, 1.0, 1.0])
    d = S.random_data(m, seed=3)
    assert S.e_gamma_norm(m, d, 0.0, 1.0) == pytest.approx(S.energy_norm(m, d))


@given(st.integers(0, 10_000))
def test_e0_norm_comparable_to_bracket_norm(seed):
    m = S.neumann_interval(12)
    d = S.random_data(m, seed=seed, exclude_kernel=False)
    bracket = np.sqrt(1.0 + m.lambdas**2)
    ref = np.sqrt(np.sum(m.weights * np.abs(bracket * d.u1) ** 2)) + \
        np.sqrt(np.sum(m.weights * np.abs(d.u2) ** 2))
    val = S.e_gamma_norm(m, d, 0.0, 1.0)
    assert ref / 2.0 <= val <= 2.0 * ref


def test_builtin_models():
    m = S.dirichlet_interval(3)
    np.testing.assert_array_equal(m.lambdas, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(m.weights, [1.0, 1.0, 1.0])
    n = S.neumann_interval(2)
    np.testing.assert_array_equal(n.lambdas, [0.0, 1.0, 2.0])
    assert n.is_kernel.tolist() == [True, False, False]
    kg = S.klein_gordon(xi=[0.0, 1.0])
    np.testing.assert_allclose(kg.lambdas, [1.0, np.sqrt(2.0)])


def test_energy_rep_round_trip():
    m = S.dirichlet_interval(5)
    d = S.random_data(m, seed=1)
    back = S.from_energy_rep(m, S.to_energy_rep(m, d))
    np.testing.assert_allclose(back.u1, d.u1)
    np.testing.assert_allclose(back.u2, d.u2)


def test_bump_is_supported_in_band():
    m = S.dirichlet_interval(16)
    d = S.smooth_bump(m, 0.5, 8.0)
    outside = (m.lambdas < 0.5) | (m.lambdas > 8.0)
    assert not np.any(d.u1[outside]) and np.any(d.u1[~outside])


def test_bracket_clamps():
    np.testing.assert_allclose(S.bracket([0.5, 3.0], 2.0), [0.5, 2.0])
