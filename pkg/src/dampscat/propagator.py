"""Free propagator, fundamental solutions of the damped system, trajectories.

For a spectral value ``lam`` the state ``V = (lam u, u')`` obeys

    V' = [[0, lam], [-lam, -2 b(t)]] V,

whose fundamental matrix ``E(t, s)`` (``E(s, s) = I``) is computed by the
adaptive kernel.  Matrices are plain ``(2, 2)`` numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._parallel import pmap
from .coefficients import CoefficientModel, integrate, lambda_at, primitive_at
from .errors import DomainError, NumericalError, StiffnessError
from .spectral import DataVector, SpectralModel, energy_norm_rep, to_energy_rep

DEFAULT_TOL = 1e-10


def free_propagator(lam: float, t: float) -> np.ndarray:
    """``E0(t) = [[cos lam t, sin lam t], [-sin lam t, cos lam t]]``."""
    c, s = np.cos(lam * t), np.sin(lam * t)
    return np.array([[c, s], [-s, c]])


def frobenius(a) -> float:
    return float(np.linalg.norm(a))


def spectral_norm(a) -> float:
    return float(np.linalg.norm(a, 2))


def _check_times(s, t):
    if s < 0:
        raise DomainError("start time must be non-negative")
    if np.any(np.asarray(t) < s):
        raise DomainError("fundamental solution needs t >= s")


def fundamental_series(coeff: CoefficientModel, lam: float, s: float, times,
                       tol: float = DEFAULT_TOL, backend=None) -> np.ndarray:
    """``E(t, s)`` for every ``t`` in the non-decreasing array ``times``.

    Returns an array of shape ``(len(times), 2, 2)``.
    """
    if lam < 0:
        raise DomainError("spectral value must be non-negative")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    _check_times(s, times)
    out = kernels.solve(kernels.SYS_FUNDAMENTAL, coeff, lam, s, s, np.eye(2), times, tol,
                        backend=backend)
    return out.real.copy()


def integrate_fundamental(coeff: CoefficientModel, lam: float, s: float, t: float,
                          tol: float = DEFAULT_TOL, backend=None) -> np.ndarray:
    """Fundamental matrix ``E(t, s)`` of the damped system at one time.

    Both columns are integrated jointly with the adaptive 8th-order pair;
    steps are capped at ``1/max(lam, 1)``.

    Raises
    ------
    StiffnessError
        On step-size underflow; carries the time reached.
    """
    return fundamental_series(coeff, lam, s, [t], tol, backend)[0]


def inverse_lambda_sq_integral(coeff: CoefficientModel, t) -> np.ndarray:
    """``int_0^t lambda(tau)^-2 d tau`` for scalar or sorted array ``t``."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))

    def f(tau):
        return np.exp(-2.0 * primitive_at(coeff, tau))

    out = np.empty_like(t_arr)
    acc, prev = 0.0, 0.0
    for i in np.argsort(t_arr, kind="stable"):
        if t_arr[i] > prev:
            acc += integrate(f, prev, t_arr[i])
            prev = t_arr[i]
        out[i] = acc
    return out if np.ndim(t) else float(out[0])


def kernel_mode_solution(coeff: CoefficientModel, u1: complex, u2: complex, t):
    """Exact solution of ``u'' + 2 b u' = 0`` with data ``(u1, u2)``.

    Returns ``(u(t), u'(t)) = (u1 + u2 int_0^t lambda^-2, u2 / lambda(t)^2)``;
    ``t`` may be an array.
    """
    lam_t = lambda_at(coeff, t)
    return u1 + u2 * inverse_lambda_sq_integral(coeff, t), u2 / lam_t**2


@dataclass(frozen=True)
class Trajectory:
    """States ``V_j(t) = (lam_j u, u')`` of every mode at the requested times.

    Attributes
    ----------
    times : ndarray, shape (m,)
    states : ndarray, shape (m, n, 2), complex
    lambda_values : ndarray, shape (m,)
        ``lambda(t)`` (the decay scale, not a spectral value).
    kernel_u : dict
        Mode index -> ``u(t)`` for kernel modes, where ``V`` does not see ``u``.
    """

    model: SpectralModel
    times: np.ndarray
    states: np.ndarray
    lambda_values: np.ndarray
    kernel_u: dict = field(default_factory=dict)

    def energies(self) -> np.ndarray:
        return np.array([energy_norm_rep(self.model, V) for V in self.states])

    def rows(self, dump_modes=False):
        """Rows ``t, lambda_t, energy_E[, re/im per mode]`` for CSV output."""
        energies = self.energies()
        for k, t in enumerate(self.times):
            row = [t, self.lambda_values[k], energies[k]]
            if dump_modes:
                for V in self.states[k]:
                    row.extend([V[0].real, V[0].imag, V[1].real, V[1].imag])
            yield row

    def header(self, dump_modes=False):
        cols = ["t", "lambda_t", "energy_E"]
        if dump_modes:
            for j in range(len(self.model)):
                cols += [f"re_v1_{j}", f"im_v1_{j}", f"re_v2_{j}", f"im_v2_{j}"]
        return cols


def _annotate(exc, j):
    msg = f"mode {j}: {exc}"
    if isinstance(exc, StiffnessError):
        return StiffnessError(msg, t=exc.t)
    return type(exc)(msg)


def evolve(model: SpectralModel, coeff: CoefficientModel, data: DataVector, times,
           tol: float = DEFAULT_TOL, threads: int = 1, backend=None) -> Trajectory:
    """Evolve Cauchy data mode by mode.

    Non-kernel modes use :func:`fundamental_series`; kernel modes use the
    exact solution.  Integrator failures are re-raised with the mode index.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("times must be a non-empty 1-d array")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise DomainError("times must be strictly increasing and start at t >= 0")
    V0 = to_energy_rep(model, data)
    lam = model.lambdas

    def one(j):
        if model.is_kernel[j]:
            u, up = kernel_mode_solution(coeff, data.u1[j], data.u2[j], times)
            return np.stack([np.zeros_like(up), up], axis=1), u
        if not np.any(V0[j]):
            return np.zeros((times.size, 2), dtype=complex), None
        try:
            E = fundamental_series(coeff, lam[j], 0.0, times, tol, backend)
        except NumericalError as exc:
            raise _annotate(exc, j) from exc
        return E @ V0[j], None

    results = pmap(one, range(len(model)), threads)
    states = np.stack([r[0] for r in results], axis=1).astype(complex)
    kernel_u = {j: r[1] for j, r in enumerate(results) if r[1] is not None}
    return Trajectory(model=model, times=times, states=states,
                      lambda_values=np.asarray(lambda_at(coeff, times), dtype=float),
                      kernel_u=kernel_u)
