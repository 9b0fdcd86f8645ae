"""Wave operators, scattering operator and asymptotic-equivalence checks.

Two normalisations are used:

classical
    ``W+ = lim E0(-t) E(t, 0) = Q(inf, 0)``, meaningful for integrable ``b``.
modified
    ``W~+ = lim lambda(t) E0(-t) E(t, 0)``, the general case.

For integrable ``b`` they differ by the scalar ``lambda(inf)``.  Residuals
carry the factor ``lambda(t)`` exactly when the modified normalisation is in
force.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from ._parallel import pmap
from .coefficients import (KIND_ZERO, CoefficientModel, declared_tag, lambda_at, lambda_infinity,
                           tail_integral)
from .diagonal import M, M_INV, n1_inv, peano_baker, q1_limit
from .errors import (DomainError, HorizonError, InconsistencyError, RegimeError,
                     SingularMatrixError)
from .propagator import DEFAULT_TOL, free_propagator, fundamental_series, integrate_fundamental
from .spectral import DataVector, SpectralModel, e_gamma_norm, energy_norm_rep, to_energy_rep
from .zones import t_xi

DEFAULT_HORIZON_CAP = 1e6
DIRECT_HORIZON = 1e4
P_FLIP = np.diag([1.0, -1.0])
SUPPORTED = ("Integrable", "C1", "C2")


# ---------------------------------------------------------------------------
# classical path


def classical_generator(coeff: CoefficientModel, lam: float, s: float):
    """``tau -> -2 b(tau) E0(s - tau) diag(0, 1) E0(tau - s)`` on arrays."""

    def F(tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        th = lam * (tau - s)
        c, sn = np.cos(th), np.sin(th)
        f = -2.0 * np.asarray(coeff.b(tau), dtype=float)
        out = np.empty((tau.size, 2, 2))
        out[:, 0, 0] = f * sn * sn
        out[:, 0, 1] = -f * sn * c
        out[:, 1, 0] = -f * sn * c
        out[:, 1, 1] = f * c * c
        return out

    return F


def classical_q_series(coeff: CoefficientModel, lam: float, s: float, times,
                       tol: float = DEFAULT_TOL, backend=None) -> np.ndarray:
    """``Q(t, s) = E0(s - t) E(t, s)`` for each ``t`` by adaptive integration."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < s) or s < 0:
        raise DomainError("classical Q(t, s) needs 0 <= s <= t")
    out = kernels.solve(kernels.SYS_CLASSICAL, coeff, lam, s, s, np.eye(2), times, tol,
                        backend=backend)
    return out.real.copy()


def classical_q(coeff: CoefficientModel, lam: float, s: float, t: float,
                tol: float = DEFAULT_TOL, backend=None) -> np.ndarray:
    """``Q(t, s)``, solution of ``Q' = -2b E0(s-t) diag(0,1) E0(t-s) Q``."""
    return classical_q_series(coeff, lam, s, [t], tol, backend)[0]


def classical_q_peano_baker(coeff: CoefficientModel, lam: float, s: float, t: float,
                            kmax: int = 4, n_grid: int = 20001):
    """Series oracle for :func:`classical_q`; returns ``(value, term_norms)``."""
    val, norms = peano_baker(classical_generator(coeff, lam, s), s, t, kmax, n_grid)
    return val.real, norms


@dataclass(frozen=True)
class LimitResult:
    matrix: np.ndarray
    conv_error: float
    horizon: float


def classical_q_limit(coeff: CoefficientModel, lam: float, s: float = 0.0,
                      tol: float = 1e-9, horizon_cap: float = DEFAULT_HORIZON_CAP,
                      backend=None) -> LimitResult:
    """``Q(inf, s)`` for integrable ``b`` by doubling horizons.

    Each truncation ``Q(T, s)`` is multiplied by ``exp(-int_T^inf b)``, the
    average effect of the tail (the generator averages to ``-b I``); the
    remaining error is ``O(b(T)/lam)``.
    """
    if not coeff.integrable:
        raise RegimeError(f"{coeff.label} is not declared integrable")
    if not lam > 0:
        raise DomainError("lambda must be positive")
    integ_tol = min(1e-10, 0.01 * tol)
    T = s + max(8.0, 8.0 / lam)
    Q = classical_q(coeff, lam, s, T, integ_tol, backend)
    prev = math.exp(-tail_integral(coeff, T)) * Q
    diff = math.inf
    while True:
        T_next = s + 2.0 * (T - s)
        if T_next > horizon_cap:
            raise HorizonError(f"classical limit not resolved (last difference {diff:.3e})",
                               achieved=diff, horizon=T)
        Q = kernels.solve(kernels.SYS_CLASSICAL, coeff, lam, s, T, Q, [T_next], integ_tol,
                          backend=backend)[0].real
        cur = math.exp(-tail_integral(coeff, T_next)) * Q
        diff = float(np.linalg.norm(cur - prev))
        T, prev = T_next, cur
        if diff < tol:
            break
    model = abs(float(coeff.b(T))) / lam
    return LimitResult(prev, max(diff, model), T)


def classical_tail_bound(coeff: CoefficientModel, t: float) -> float:
    """``2 int_t^inf b * exp(2 int_0^inf b)``, the bound on ``|Q(inf, t) - I|``."""
    return 2.0 * tail_integral(coeff, t) * math.exp(2.0 * tail_integral(coeff, 0.0))


# ---------------------------------------------------------------------------
# modified wave operator


@dataclass(frozen=True)
class WaveOperator:
    """``W~+`` for one mode with both construction paths.

    ``matrix`` is the assembled (closed-form) value; ``direct`` the value of
    ``lambda(T) E0(-T) E(T, 0)`` at the last direct horizon.
    """

    matrix: np.ndarray
    conv_error: float
    horizon: float
    direct: Optional[np.ndarray] = None
    direct_error: float = float("nan")
    direct_horizon: float = float("nan")
    discrepancy: float = float("nan")


def _assembled(coeff, lam, tol, horizon_cap, zone_n, backend):
    tx = t_xi(lam, zone_n)
    lim = q1_limit(coeff, lam, tx, tol=tol, horizon_cap=horizon_cap, backend=backend)
    E_diss = integrate_fundamental(coeff, lam, 0.0, tx, min(1e-11, tol), backend)
    lam_tx = float(lambda_at(coeff, tx))
    left = lam_tx * free_propagator(lam, -tx) @ M
    right = n1_inv(coeff, tx, lam) @ M_INV @ E_diss
    W = left @ lim.matrix @ right
    scale = lam_tx * np.linalg.norm(n1_inv(coeff, tx, lam), 2) * np.linalg.norm(E_diss, 2)
    err = scale * lim.conv_error
    res = float(np.max(np.abs(W.imag)))
    if res > max(10.0 * err, 1e-8) * max(1.0, float(np.max(np.abs(W.real)))):
        raise InconsistencyError(f"assembled wave operator has imaginary part {res:.3e}")
    return W.real.copy(), err, lim.horizon


def _direct(coeff, lam, tol, horizon, zone_n, backend):
    T0 = max(t_xi(lam, zone_n), 0.0) + max(8.0, 8.0 / lam)
    Ts = [T0]
    while Ts[-1] * 2.0 <= horizon:
        Ts.append(Ts[-1] * 2.0)
    integ_tol = min(1e-11, tol)
    Es = fundamental_series(coeff, lam, 0.0, Ts, integ_tol, backend)
    lams = np.asarray(lambda_at(coeff, np.asarray(Ts)), dtype=float)
    vals = [lams[k] * free_propagator(lam, -T) @ Es[k] for k, T in enumerate(Ts)]
    diffs = [float(np.linalg.norm(b - a)) for a, b in zip(vals[:-1], vals[1:])]
    T = Ts[-1]
    # the truncation oscillates with amplitude about b(T)/(2 lam) |W|
    # plus the phase drift of the integrator, about tol per radian
    size = float(np.linalg.norm(vals[-1]))
    model = (abs(float(coeff.b(T))) / lam + integ_tol * lam * T) * size
    err = max(max(diffs[-2:], default=0.0), model)
    return vals[-1], err, T


def modified_wave_operator(coeff: CoefficientModel, lam: float, tol: float = 1e-9,
                           horizon_cap: float = DEFAULT_HORIZON_CAP, zone_n: float = 1.0,
                           direct_horizon: Optional[float] = DIRECT_HORIZON,
                           check_regime: bool = True, backend=None) -> WaveOperator:
    """``W~+(xi) = lim lambda(t) E0(-t) E(t, 0)``.

    Path (b), returned: ``lambda(t_xi) E0(-t_xi) M Q1(inf, t_xi) N1(t_xi)^-1
    M^-1 E(t_xi, 0)``.  Path (a), the direct limit, is evaluated at doubling
    horizons up to ``direct_horizon`` (skipped if ``None``) and must agree
    with (b) within the sum of both error estimates and ``10 tol``.

    Raises
    ------
    InconsistencyError
        If the two paths disagree.
    """
    if not lam > 0:
        raise DomainError("wave operators are defined for lambda > 0")
    if check_regime and declared_tag(coeff) not in SUPPORTED:
        raise RegimeError(f"{coeff.label} is declared {declared_tag(coeff)}")
    if coeff.kernel_kind == KIND_ZERO:
        return WaveOperator(np.eye(2), 0.0, 0.0, np.eye(2), 0.0, 0.0, 0.0)
    W, err, hor = _assembled(coeff, lam, tol, horizon_cap, zone_n, backend)
    if direct_horizon is None:
        return WaveOperator(W, err, hor)
    Wa, err_a, hor_a = _direct(coeff, lam, tol, direct_horizon, zone_n, backend)
    gap = float(np.linalg.norm(Wa - W))
    if gap > err + err_a + 10.0 * tol:
        raise InconsistencyError(
            f"wave operator paths disagree at lambda={lam}: |a-b|={gap:.3e} > "
            f"{err + err_a + 10.0 * tol:.3e}")
    return WaveOperator(W, err, hor, Wa, err_a, hor_a, gap)


def w_minus(coeff: CoefficientModel, lam: float, tol: float = 1e-9, c0: Optional[float] = None,
            horizon_cap: float = DEFAULT_HORIZON_CAP, zone_n: float = 1.0,
            direct_horizon: Optional[float] = DIRECT_HORIZON, backend=None) -> WaveOperator:
    """``W~- = lim_{t -> -inf} lambda(t) E0(-t) E(t, 0)``.

    With ``P = diag(1, -1)`` and ``b~(tau) = -b(-tau)``, ``E(-tau, 0) = P
    E~(tau, 0) P``, hence ``W~- = P W~+[b~] P``.  Allowed when ``b`` is
    declared integrable or when ``lam >= c0 > 0`` (invertible ``A``).
    """
    if not lam > 0:
        raise DomainError("wave operators are defined for lambda > 0")
    integrable = declared_tag(coeff) == "Integrable"
    if not integrable and not (c0 is not None and c0 > 0 and lam >= c0):
        raise RegimeError("W- needs an integrable coefficient or lambda >= c0 > 0")
    W = modified_wave_operator(coeff.reflected(), lam, tol, horizon_cap, zone_n, direct_horizon,
                               check_regime=False, backend=backend)

    def flip(A):
        return None if A is None else P_FLIP @ A @ P_FLIP

    return WaveOperator(flip(W.matrix), W.conv_error, W.horizon, flip(W.direct),
                        W.direct_error, W.direct_horizon, W.discrepancy)


def scattering_op(w_plus, w_minus, cond_max: float = 1e12) -> np.ndarray:
    """``S = W+ W-^-1``."""
    w_minus = np.asarray(w_minus, dtype=float)
    if not np.all(np.isfinite(w_minus)) or np.linalg.cond(w_minus) > cond_max:
        raise SingularMatrixError("W- is numerically singular")
    return np.asarray(w_plus, dtype=float) @ np.linalg.inv(w_minus)


# ---------------------------------------------------------------------------
# tables over a spectral model


@dataclass
class WaveOperatorTable:
    """Per-mode wave operators for the non-kernel modes of a model.

    ``normalization`` is ``"classical"`` (no ``lambda(t)`` factor, integrable
    ``b``) or ``"modified"``.
    """

    lambdas: np.ndarray
    w_plus: np.ndarray
    conv_error: np.ndarray
    horizon: np.ndarray
    normalization: str
    regime: str
    gamma: float = 0.0
    zone_n: float = 1.0
    w_minus: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    HEADER = ("lambda", "w11", "w12", "w21", "w22", "conv_error", "horizon")

    def lookup(self, lam: float, rtol: float = 1e-12) -> int:
        k = int(np.argmin(np.abs(self.lambdas - lam)))
        if abs(self.lambdas[k] - lam) > rtol * max(1.0, abs(lam)):
            raise DomainError(f"no wave-operator entry for lambda={lam}")
        return k

    def rows(self):
        for k, lam in enumerate(self.lambdas):
            W = self.w_plus[k]
            yield [lam, W[0, 0], W[0, 1], W[1, 0], W[1, 1], self.conv_error[k], self.horizon[k]]

    def min_singular_values(self) -> np.ndarray:
        return np.array([np.linalg.svd(W, compute_uv=False)[-1] for W in self.w_plus])

    @classmethod
    def read_csv(cls, path, normalization="modified", regime="unknown"):
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(r for r in fh if not r.startswith("#"))
            missing = set(cls.HEADER) - set(reader.fieldnames or ())
            if missing:
                raise DomainError(f"wave-operator CSV missing columns {sorted(missing)}")
            for r in reader:
                rows.append([float(r[c]) for c in cls.HEADER])
        a = np.array(rows, dtype=float).reshape(-1, 7)
        return cls(a[:, 0], a[:, 1:5].reshape(-1, 2, 2), a[:, 5], a[:, 6], normalization, regime)


def default_normalization(coeff: CoefficientModel) -> str:
    return "classical" if declared_tag(coeff) == "Integrable" else "modified"


def build_wave_operator_table(model: SpectralModel, coeff: CoefficientModel, tol: float = 1e-9,
                              horizon_cap: float = DEFAULT_HORIZON_CAP, zone_n: float = 1.0,
                              direct_horizon: Optional[float] = DIRECT_HORIZON,
                              with_minus: bool = False, normalization: Optional[str] = None,
                              gamma: float = 0.0, threads: int = 1,
                              backend=None) -> WaveOperatorTable:
    """Wave operators for every non-kernel mode of ``model``."""
    norm = default_normalization(coeff) if normalization is None else normalization
    if norm not in ("classical", "modified"):
        raise DomainError(f"unknown normalization {norm!r}")
    if norm == "classical" and declared_tag(coeff) != "Integrable":
        raise RegimeError("classical normalization needs an integrable coefficient")
    lams = model.lambdas[model.positive]
    c0 = float(lams.min()) if lams.size else None
    scale = 1.0 / lambda_infinity(coeff) if norm == "classical" else 1.0

    def one(lam):
        wp = modified_wave_operator(coeff, lam, tol, horizon_cap, zone_n, direct_horizon,
                                    backend=backend)
        wm = None
        if with_minus:
            wm = w_minus(coeff, lam, tol, c0, horizon_cap, zone_n, direct_horizon, backend)
        return wp, wm

    results = pmap(one, lams, threads)
    w_plus = np.array([r[0].matrix * scale for r in results]).reshape(-1, 2, 2)
    conv = np.array([r[0].conv_error * scale for r in results])
    hor = np.array([r[0].horizon for r in results])
    wm = None
    if with_minus:
        # lambda(-inf) is lambda(inf) of the reflected coefficient
        scale_m = 1.0 / lambda_infinity(coeff.reflected()) if norm == "classical" else 1.0
        wm = np.array([r[1].matrix * scale_m for r in results]).reshape(-1, 2, 2)
    dets = np.linalg.det(w_plus) if lams.size else np.array([])
    if np.any(np.abs(dets) == 0):
        raise SingularMatrixError("a wave operator is singular")
    return WaveOperatorTable(lams.copy(), w_plus, conv, hor, norm, declared_tag(coeff), gamma,
                             zone_n, wm,
                             extra={"direct_discrepancy": [r[0].discrepancy for r in results]})


# ---------------------------------------------------------------------------
# asymptotic equivalence and energy checks


@dataclass(frozen=True)
class ResidualRow:
    t: float
    lambda_t: float
    residual: float
    energy_u: float
    energy_v: float


def _check_no_kernel_data(model, data):
    kern = model.is_kernel
    if np.any((data.u1[kern] != 0) | (data.u2[kern] != 0)):
        raise DomainError("data must vanish on kernel modes")


def scattering_residual(model: SpectralModel, coeff: CoefficientModel, data: DataVector,
                        wave_ops: WaveOperatorTable, times, tol: float = DEFAULT_TOL,
                        threads: int = 1, backend=None):
    """``|c(t) V_u(t) - E0(t) W V_u(0)|_E`` at each time.

    ``c(t) = lambda(t)`` for the modified normalisation and 1 for the
    classical one.  Returns a list of :class:`ResidualRow`.
    """
    _check_no_kernel_data(model, data)
    times = np.asarray(times, dtype=float)
    V0 = to_energy_rep(model, data)
    active = [j for j in range(len(model)) if not model.is_kernel[j] and np.any(V0[j])]
    idx = {j: wave_ops.lookup(model.lambdas[j]) for j in active}
    lam_t = np.asarray(lambda_at(coeff, times), dtype=float)
    factor = lam_t if wave_ops.normalization == "modified" else np.ones_like(lam_t)

    def one(j):
        lam = model.lambdas[j]
        E = fundamental_series(coeff, lam, 0.0, times, tol, backend)
        Vu = E @ V0[j]
        WV = wave_ops.w_plus[idx[j]] @ V0[j]
        Vv = np.array([free_propagator(lam, t) @ WV for t in times])
        return Vu, Vv

    results = dict(zip(active, pmap(one, active, threads)))
    n = len(model)
    out = []
    for k, t in enumerate(times):
        Vu = np.zeros((n, 2), dtype=complex)
        Vv = np.zeros((n, 2), dtype=complex)
        for j in active:
            Vu[j] = results[j][0][k]
            Vv[j] = results[j][1][k]
        out.append(ResidualRow(float(t), float(lam_t[k]),
                               energy_norm_rep(model, factor[k] * Vu - Vv),
                               energy_norm_rep(model, Vu), energy_norm_rep(model, Vv)))
    return out


def _energies(model, coeff, data, times, tol, threads, backend):
    V0 = to_energy_rep(model, data)
    active = [j for j in range(len(model)) if not model.is_kernel[j] and np.any(V0[j])]

    def one(j):
        return fundamental_series(coeff, model.lambdas[j], 0.0, times, tol, backend) @ V0[j]

    res = dict(zip(active, pmap(one, active, threads)))
    out = np.zeros(len(times))
    for j in active:
        out += model.weights[j] * np.sum(np.abs(res[j]) ** 2, axis=1)
    return np.sqrt(out)


def two_sided_ratio(model: SpectralModel, coeff: CoefficientModel, data: DataVector, times,
                    tol: float = DEFAULT_TOL, threads: int = 1, backend=None):
    """Pairs ``(t, lambda(t) |(u, u')(t)|_E)`` for data orthogonal to the kernel."""
    _check_no_kernel_data(model, data)
    times = np.asarray(times, dtype=float)
    en = _energies(model, coeff, data, times, tol, threads, backend)
    lam_t = np.asarray(lambda_at(coeff, times), dtype=float)
    return [(float(t), float(l * e)) for t, l, e in zip(times, lam_t, en)]


@dataclass(frozen=True)
class EnergyReport:
    """``sup lambda(t) |V(t)|_E / |data|_{E^(gamma)}`` with its witness."""

    constant: float
    witness_t: float
    witness_data: int
    values: np.ndarray


def energy_estimate_check(model: SpectralModel, coeff: CoefficientModel, data_set, gamma: float,
                          times, zone_n: float = 1.0, tol: float = DEFAULT_TOL, threads: int = 1,
                          backend=None) -> EnergyReport:
    """Empirical constant of the energy estimate in the cases C1 and C2."""
    tag = declared_tag(coeff)
    if tag not in ("C1", "C2"):
        raise RegimeError(f"energy estimate check needs C1 or C2, {coeff.label} is {tag}")
    times = np.asarray(times, dtype=float)
    lam_t = np.asarray(lambda_at(coeff, times), dtype=float)
    reps = [to_energy_rep(model, d) for d in data_set]
    active = [j for j in range(len(model))
              if not model.is_kernel[j] and any(np.any(V[j]) for V in reps)]
    # one fundamental matrix series per mode, shared by all data
    mats = dict(zip(active, pmap(
        lambda j: fundamental_series(coeff, model.lambdas[j], 0.0, times, tol, backend),
        active, threads)))
    rows = []
    for data, V0 in zip(data_set, reps):
        _check_no_kernel_data(model, data)
        denom = e_gamma_norm(model, data, gamma, zone_n)
        if denom == 0:
            raise DomainError("data with zero E^(gamma) norm")
        en = np.zeros(times.size)
        for j in active:
            en += model.weights[j] * np.sum(np.abs(mats[j] @ V0[j]) ** 2, axis=1)
        rows.append(lam_t * np.sqrt(en) / denom)
    values = np.array(rows)
    k = int(np.argmax(values))
    i, j = divmod(k, times.size)
    return EnergyReport(float(values.flat[k]), float(times[j]), i, values)


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    residual: float


def decay_fit(series) -> DecayFit:
    """Least-squares slope of ``log value`` against ``log t``.

    Needs at least 8 points with positive times and values spanning at
    least two decades in ``t``.  ``residual`` is the RMS misfit in ``log``.
    """
    arr = np.asarray([(float(t), float(v)) for t, v in series], dtype=float)
    if arr.shape[0] < 8:
        raise DomainError("decay_fit needs at least 8 points")
    t, v = arr[:, 0], arr[:, 1]
    if np.any(t <= 0) or np.any(v <= 0):
        raise DomainError("decay_fit needs positive times and values")
    if math.log10(t.max() / t.min()) < 2.0 - 1e-12:
        raise DomainError("decay_fit needs a span of at least two decades")
    x, y = np.log(t), np.log(v)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return DecayFit(float(coef[0]), float(coef[1]), res)
