"""Two-step diagonalisation of the damped system in the hyperbolic zone.

With ``M = [[i, -i], [1, 1]]`` the system ``V' = [[0, lam], [-lam, -2b]] V``
becomes ``W' = (D - b J) W`` for ``W = M^-1 V``, ``D = diag(-i lam, i lam)``
and ``J`` the all-ones matrix.  After removing the scalar part ``-b I`` the
second step uses

    N1 = I - N^(1),   N^(1) = i beta [[0, -1], [1, 0]],   beta = b / (2 lam),

which satisfies ``[D, N^(1)] = -b sigma_x``.  The remaining system is
``Y' = (D + R1) Y`` with the exact remainder

    R1 = N1^-1 (d/dt N^(1) + b sigma_x N^(1)),

and ``Q1(t, s)`` solves ``Q1' = E0~(s, t) R1(t) E0~(t, s) Q1``.  Altogether

    E(t, s) = lambda(s)/lambda(t) M N1(t) E0~(t, s) Q1(t, s) N1(s)^-1 M^-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from . import kernels
from .coefficients import KIND_ZERO, CoefficientModel, integrate, lambda_ratio
from .errors import (DomainError, HorizonError, InconsistencyError,
                     SeriesDivergenceError, ZoneConstantError)

M = np.array([[1j, -1j], [1.0, 1.0]])
M_INV = 0.5 * np.array([[-1j, 1.0], [1j, 1.0]])
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_K = np.array([[0.0, -1.0], [1.0, 0.0]])

DEFAULT_TOL = 1e-10
DEFAULT_HORIZON_CAP = 1e6


def _lam_ok(lam):
    if not lam > 0:
        raise DomainError("the diagonaliser needs lambda > 0")


def e0_tilde(lam: float, t: float, s: float = 0.0) -> np.ndarray:
    """``diag(exp(-i lam (t-s)), exp(i lam (t-s)))``."""
    th = lam * (t - s)
    return np.diag([np.exp(-1j * th), np.exp(1j * th)])


def n_first(coeff: CoefficientModel, t: float, lam: float) -> np.ndarray:
    """``N^(1)(t) = i beta [[0, -1], [1, 0]]`` with ``beta = b/(2 lam)``."""
    _lam_ok(lam)
    return 1j * (float(coeff.b(t)) / (2.0 * lam)) * _K


def n1(coeff: CoefficientModel, t: float, lam: float) -> np.ndarray:
    """``N1 = I - N^(1)``."""
    return np.eye(2) - n_first(coeff, t, lam)


def det_n1(coeff: CoefficientModel, t: float, lam: float) -> float:
    """``det N1 = 1 - b^2 / (4 lam^2)``.

    Raises
    ------
    ZoneConstantError
        If the determinant is not positive.
    """
    _lam_ok(lam)
    beta = float(coeff.b(t)) / (2.0 * lam)
    d = 1.0 - beta * beta
    if d <= 0:
        raise ZoneConstantError(
            f"det N1 = {d:.6g} <= 0 at t={t}, lambda={lam}: zone constant too small")
    return d


def n1_inv(coeff: CoefficientModel, t: float, lam: float) -> np.ndarray:
    """``N1^-1 = (I + N^(1)) / det N1``."""
    d = det_n1(coeff, t, lam)
    return (np.eye(2) + n_first(coeff, t, lam)) / d


def r1(coeff: CoefficientModel, t: float, lam: float) -> np.ndarray:
    """Remainder ``N1^-1 (d/dt N^(1) + b sigma_x N^(1))`` of the second step."""
    b, bp = coeff.pair(t)
    dn = 1j * (bp / (2.0 * lam)) * _K
    return n1_inv(coeff, t, lam) @ (dn + b * SIGMA_X @ n_first(coeff, t, lam))


def r1_entries(b, bp, lam):
    """Closed-form entries ``(R11, R12, R21, R22)``; ``b, bp`` may be arrays."""
    beta = b / (2.0 * lam)
    dbeta = bp / (2.0 * lam)
    den = 1.0 - beta * beta
    return ((beta * dbeta + 1j * b * beta) / den, (-1j * dbeta - b * beta * beta) / den,
            (1j * dbeta - b * beta * beta) / den, (beta * dbeta - 1j * b * beta) / den)


def r1_norm(coeff: CoefficientModel, t: float, lam: float) -> float:
    """Spectral norm of ``R1(t)``."""
    b, bp = coeff.pair(t)
    r11, r12, r21, r22 = r1_entries(b, bp, lam)
    return float(np.linalg.norm(np.array([[r11, r12], [r21, r22]]), 2))


def r_interaction(coeff: CoefficientModel, lam: float, s: float, t) -> np.ndarray:
    """``E0~(s, t) R1(t) E0~(t, s)`` for an array of ``t``; shape (n, 2, 2)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    b = np.asarray(coeff.b(t), dtype=float)
    bp = np.asarray(coeff.b_prime(t), dtype=float)
    r11, r12, r21, r22 = r1_entries(b, bp, lam)
    e = np.exp(2j * lam * (t - s))
    out = np.empty((t.size, 2, 2), dtype=complex)
    out[:, 0, 0] = r11
    out[:, 0, 1] = e * r12
    out[:, 1, 0] = np.conj(e) * r21
    out[:, 1, 1] = r22
    return out


def q1_series(coeff: CoefficientModel, lam: float, s: float, times,
              tol: float = DEFAULT_TOL, backend=None) -> np.ndarray:
    """``Q1(t, s)`` for each ``t`` in ``times`` by adaptive integration."""
    _lam_ok(lam)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < s):
        raise DomainError("Q1(t, s) needs t >= s")
    return kernels.solve(kernels.SYS_Q1, coeff, lam, s, s, np.eye(2), times, tol,
                         backend=backend)


def q1(coeff: CoefficientModel, lam: float, s: float, t: float,
       tol: float = DEFAULT_TOL, backend=None) -> np.ndarray:
    """``Q1(t, s)``, solution of ``Q1' = E0~(s,t) R1 E0~(t,s) Q1``, ``Q1(s,s) = I``."""
    return q1_series(coeff, lam, s, [t], tol, backend)[0]


def peano_baker(generator, s: float, t: float, kmax: int = 4, n_grid: int = 4001,
                tol=None):
    """Truncated Peano-Baker series ``I + sum_k int F int F ... int F``.

    Each iterated integral ``P_k(t) = int_s^t F(tau) P_(k-1)(tau) d tau`` is
    evaluated by cumulative Simpson quadrature on a uniform grid.

    Parameters
    ----------
    generator : callable
        ``F(tau_array) -> array (n, 2, 2)``.
    kmax : int
        Number of terms after the identity.
    tol : float, optional
        If given, raise :class:`SeriesDivergenceError` when the last term
        has norm above ``tol``.

    Returns
    -------
    value : ndarray (2, 2)
    term_norms : list of float
        Frobenius norms of ``P_1(t), ..., P_kmax(t)``.
    """
    grid = np.linspace(s, t, int(n_grid))
    F = generator(grid)
    P = np.broadcast_to(np.eye(2, dtype=complex), F.shape).copy()
    total = np.eye(2, dtype=complex)
    norms = []
    for _ in range(int(kmax)):
        integrand = F @ P
        # cumulative_simpson drops imaginary parts; integrate them separately
        P = (cumulative_simpson(integrand.real, x=grid, axis=0, initial=0.0)
             + 1j * cumulative_simpson(integrand.imag, x=grid, axis=0, initial=0.0))
        total = total + P[-1]
        norms.append(float(np.linalg.norm(P[-1])))
    if tol is not None and norms and norms[-1] > tol:
        raise SeriesDivergenceError(
            f"Peano-Baker term {kmax} has norm {norms[-1]:.3e} > tol {tol:.3e}")
    return total, norms


def q1_peano_baker(coeff: CoefficientModel, lam: float, s: float, t: float,
                   kmax: int = 3, n_grid: int = 20001):
    """Series oracle for :func:`q1`; returns ``(value, term_norms)``."""
    _lam_ok(lam)
    return peano_baker(lambda tau: r_interaction(coeff, lam, s, tau), s, t, kmax, n_grid)


def in_hyperbolic_zone(lam: float, s: float, zone_n: float) -> bool:
    # relative slack so that s = t_xi(lam, zone_n) itself is inside
    return lam * (1.0 + s) >= zone_n * (1.0 - 1e-12)


@dataclass(frozen=True)
class Representation:
    """Assembled fundamental matrix and the imaginary part that was dropped."""

    matrix: np.ndarray
    im_residue: float


def hyperbolic_series(coeff: CoefficientModel, lam: float, s: float, times,
                      tol: float = DEFAULT_TOL, zone_n: float = 1.0,
                      residue_tol=None, backend=None):
    """Representation of ``E(t, s)`` through the diagonaliser for many ``t``.

    Returns a list of :class:`Representation`.
    """
    _lam_ok(lam)
    if not in_hyperbolic_zone(lam, s, zone_n):
        raise DomainError(f"(s={s}, lambda={lam}) is not in the hyperbolic zone for N={zone_n}")
    if residue_tol is None:
        residue_tol = 1e3 * tol
    times = np.atleast_1d(np.asarray(times, dtype=float))
    Q = q1_series(coeff, lam, s, times, tol, backend)
    right = n1_inv(coeff, s, lam) @ M_INV
    out = []
    for k, t in enumerate(times):
        ratio = lambda_ratio(coeff, s, t)
        full = ratio * (M @ n1(coeff, t, lam) @ e0_tilde(lam, t, s) @ Q[k] @ right)
        res = float(np.max(np.abs(full.imag)))
        scale = max(1.0, float(np.max(np.abs(full.real))))
        if res > residue_tol * scale:
            raise InconsistencyError(
                f"imaginary residue {res:.3e} at t={t}, lambda={lam} exceeds {residue_tol:.1e}")
        out.append(Representation(full.real.copy(), res))
    return out


def hyperbolic_representation(coeff: CoefficientModel, lam: float, s: float, t: float,
                              tol: float = DEFAULT_TOL, zone_n: float = 1.0,
                              residue_tol=None, backend=None) -> np.ndarray:
    """``E(t, s)`` assembled from ``M``, ``N1``, ``E0~`` and ``Q1``.

    Raises
    ------
    InconsistencyError
        If the assembled product has an imaginary part above ``residue_tol``
        (default ``1e3 * tol``), relative to its largest entry.
    """
    return hyperbolic_series(coeff, lam, s, [t], tol, zone_n, residue_tol, backend)[0].matrix


# ---------------------------------------------------------------------------
# limit t -> infinity


@dataclass(frozen=True)
class Q1Limit:
    """``Q1(inf, s)`` with convergence diagnostics.

    Attributes
    ----------
    conv_error : float
        ``max(cauchy, model)``: the last difference between successive
        tail-corrected values and a model of the remaining error.
    bound : float
        Rigorous tail bound ``int_T^inf |R1| exp(int_s^T |R1|)`` for the
        uncorrected truncation at ``T = horizon``.
    """

    matrix: np.ndarray
    conv_error: float
    horizon: float
    cauchy: float
    bound: float


def _tail_phase(coeff, lam, T):
    def f(x):
        b = float(coeff.b(x))
        beta = b / (2.0 * lam)
        return b * beta / (1.0 - beta * beta)
    return integrate(f, T, math.inf, rtol=1e-6)


def q1_tail_factor(coeff: CoefficientModel, lam: float, T: float) -> np.ndarray:
    """Diagonal approximation of ``Q1(inf, T)``.

    The diagonal of ``R1`` does not oscillate and integrates in closed form
    up to a quadrature: ``int_T^inf R11 = log(det N1(T)) / 2 + i phi``.  The
    off-diagonal part oscillates and contributes ``O(1/(lam T)^2)``.
    """
    phi = _tail_phase(coeff, lam, T)
    amp = math.sqrt(det_n1(coeff, T, lam))
    return np.diag([amp * np.exp(1j * phi), amp * np.exp(-1j * phi)])


def _r1_norm_integral(coeff, lam, a, c):
    return integrate(lambda x: r1_norm(coeff, x, lam), a, c, rtol=1e-6)


def q1_limit(coeff: CoefficientModel, lam: float, s: float, tol: float = 1e-9,
             horizon_cap: float = DEFAULT_HORIZON_CAP, epsilon=None,
             integ_tol=None, backend=None) -> Q1Limit:
    """``Q1(inf, s)`` by doubling horizons with Cauchy stopping.

    At every horizon ``T`` the truncated value is multiplied by
    :func:`q1_tail_factor`; iteration stops when two successive corrected
    values differ by less than ``tol`` in the Frobenius norm.

    Raises
    ------
    HorizonError
        If the horizon cap is reached first.
    """
    _lam_ok(lam)
    if epsilon is not None and lam < epsilon:
        raise DomainError(f"lambda={lam} below the uniformity threshold eps={epsilon}")
    if integ_tol is None:
        integ_tol = min(1e-10, 0.01 * tol)
    if coeff.kernel_kind == KIND_ZERO:
        return Q1Limit(np.eye(2, dtype=complex), 0.0, s, 0.0, 0.0)
    T = s + max(8.0, 8.0 / lam)
    Q = q1(coeff, lam, s, T, integ_tol, backend)
    prev = q1_tail_factor(coeff, lam, T) @ Q
    diff = math.inf
    while True:
        T_next = s + 2.0 * (T - s)
        if T_next > horizon_cap:
            raise HorizonError(
                f"Q1 limit not resolved: last difference {diff:.3e} > tol {tol:.1e} "
                f"at T={T:.6g}", achieved=diff, horizon=T)
        Q = kernels.solve(kernels.SYS_Q1, coeff, lam, s, T, Q, [T_next], integ_tol,
                          backend=backend)[0]
        cur = q1_tail_factor(coeff, lam, T_next) @ Q
        diff = float(np.linalg.norm(cur - prev))
        T, prev = T_next, cur
        if diff < tol:
            break
    tail = _r1_norm_integral(coeff, lam, T, math.inf)
    bound = tail * math.exp(_r1_norm_integral(coeff, lam, s, T))
    b, bp = coeff.pair(T)
    r11, r12, r21, r22 = r1_entries(b, bp, lam)
    model = max(abs(r12), abs(r21)) / lam + tail * tail
    return Q1Limit(prev, max(diff, model), T, diff, bound)
