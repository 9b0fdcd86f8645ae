import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from dampscat import coefficients as C
from dampscat import kernels
from dampscat.errors import DomainError, NumericalError, StiffnessError

I2 = np.eye(2, dtype=complex)
needs_c = pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="extension not built")


def _scipy_fundamental(coeff, lam, t):
    def f(tt, y):
        b = float(coeff.b(tt))
        Y = y.reshape(2, 2)
        A = np.array([[0.0, lam], [-lam, -2.0 * b]])
        return (A @ Y).ravel()
    sol = solve_ivp(f, (0.0, t), np.eye(2).ravel(), method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[:, -1].reshape(2, 2)


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
def test_fundamental_matches_scipy(backend):
    c = C.mu_over_1pt(0.3)
    Y = kernels.solve(kernels.SYS_FUNDAMENTAL, c, 2.0, 0.0, 0.0, I2, [5.0], 1e-11,
                      backend=backend)[0]
    np.testing.assert_allclose(Y.real, _scipy_fundamental(c, 2.0, 5.0), atol=1e-9)


@needs_c
@given(st.floats(0.05, 20.0), st.floats(0.1, 50.0))
def test_backends_agree(lam, t):
    c = C.mu_over_1pt(0.3)
    args = (kernels.SYS_FUNDAMENTAL, c, lam, 0.0, 0.0, I2, [t], 1e-10)
    a = kernels.solve(*args, backend="cython")
    b = kernels.solve(*args, backend="python")
    np.testing.assert_allclose(a, b, atol=1e-12)


@needs_c
def test_backends_agree_on_callback_coefficients():
    c = C.custom(lambda t: 0.2 / (2.0 + t), lambda t: -0.2 / (2.0 + t) ** 2)
    args = (kernels.SYS_Q1, c, 3.0, 1.0, 1.0, I2, [2.0, 8.0], 1e-10)
    np.testing.assert_allclose(kernels.solve(*args, backend="cython"),
                               kernels.solve(*args, backend="python"), atol=1e-12)


def test_env_selects_python(monkeypatch):
    monkeypatch.setenv("DAMPSCAT_BACKEND", "python")
    assert kernels.default_backend() == "python"
    monkeypatch.setenv("DAMPSCAT_BACKEND", "fortran")
    with pytest.raises(DomainError):
        kernels.default_backend()


def test_times_before_start_rejected():
    with pytest.raises(DomainError):
        kernels.solve(kernels.SYS_FUNDAMENTAL, C.zero(), 1.0, 0.0, 2.0, I2, [1.0], 1e-10)


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
def test_step_budget_raises(backend):
    with pytest.raises(NumericalError):
        kernels.solve(kernels.SYS_FUNDAMENTAL, C.zero(), 50.0, 0.0, 0.0, I2, [100.0], 1e-10,
                      backend=backend, max_steps=10)


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
def test_callback_error_propagates(backend):
    def bad(t):
        if t > 1.0:
            raise RuntimeError("boom")
        return 0.0
    c = C.custom(bad, lambda t: 0.0)
    with pytest.raises(RuntimeError, match="boom"):
        kernels.solve(kernels.SYS_FUNDAMENTAL, c, 1.0, 0.0, 0.0, I2, [3.0], 1e-10,
                      backend=backend)


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
def test_blow_up_is_reported(backend):
    # b negative and huge drives the solution to overflow
    c = C.custom(lambda t: -1e3, lambda t: 0.0)
    with pytest.raises((NumericalError, StiffnessError)):
        kernels.solve(kernels.SYS_FUNDAMENTAL, c, 1.0, 0.0, 0.0, I2, [10.0], 1e-10,
                      backend=backend)


def test_fallback_when_extension_missing():
    import subprocess
    import sys
    code = ("import sys; sys.modules['dampscat._kernel_c'] = None\n"
            "from dampscat import kernels, coefficients as C\n"
            "import numpy as np\n"
            "y = kernels.solve(kernels.SYS_FUNDAMENTAL, C.zero(), 1.0, 0.0, 0.0,"
            " np.eye(2, dtype=complex), [1.0], 1e-10)\n"
            "print(sorted(kernels.BACKENDS), kernels.default_backend())")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         check=True).stdout.split()
    assert out == ["['python']", "python"]
