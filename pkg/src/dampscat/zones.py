"""Zone partition and the matrix bounds in the dissipative zone.

The dissipative zone is ``{lam (1 + t) < N}``; a mode with spectral value
``lam < N`` leaves it at ``t_xi = N/lam - 1``.  Inside, the fundamental
matrix is compared entrywise with the patterns

    C1:  |E(t, 0)| lambda(t)^2  <~  [[lam^-gamma, 1], [lam^-gamma, 1]]
    C2:  |E(t, 0)| (1 + t)      <~  [[lam^-1, 1], [lam^-1, 1]]

and the sup of the ratios is reported at several refinement levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from ._parallel import pmap
from .coefficients import CoefficientModel, declared_tag, lambda_at, sup_t_b
from .errors import DomainError, RegimeError, SeriesDivergenceError
from .propagator import DEFAULT_TOL, fundamental_series

DET_TARGET = 0.9
ENTRIES = ("11", "12", "21", "22")


def t_xi(lam: float, zone_n: float) -> float:
    """Exit time ``max(N/lam - 1, 0)`` from the dissipative zone."""
    if not lam > 0:
        raise DomainError("kernel modes never leave the dissipative zone")
    if not zone_n > 0:
        raise DomainError("zone constant must be positive")
    return max(zone_n / lam - 1.0, 0.0)


def min_det_n1(coeff: CoefficientModel, zone_n: float, horizon: float = 1e6) -> float:
    """Lower bound of ``det N1`` over the hyperbolic zone.

    There ``lam >= N/(1+t)``, so ``b/(2 lam) <= (1+t) b(t) / (2N)``.
    """
    beta = sup_t_b(coeff, horizon) / (2.0 * zone_n)
    return 1.0 - beta * beta


def escalate_zone_n(coeff: CoefficientModel, zone_n: float = 1.0,
                    target: float = DET_TARGET, horizon: float = 1e6, max_doublings: int = 40):
    """Double ``zone_n`` until ``det N1 >= target`` on the hyperbolic zone.

    Returns ``(zone_n, min_det, doublings)``.
    """
    for k in range(max_doublings + 1):
        d = min_det_n1(coeff, zone_n, horizon)
        if d >= target:
            return zone_n, d, k
        zone_n *= 2.0
    raise DomainError("zone constant escalation did not reach the det N1 target")


@dataclass(frozen=True)
class ZoneGrid:
    """Log-spaced sample grid of the dissipative zone at one refinement level.

    Level ``k`` halves ``lambda_min`` and doubles both point counts relative
    to level 0.
    """

    lambda_min: float = 1e-3
    n_lambda: int = 12
    n_t: int = 24
    level: int = 0

    def refined(self, level: int) -> "ZoneGrid":
        f = 2**level
        return ZoneGrid(self.lambda_min / f, self.n_lambda * f, self.n_t * f, level)

    def lambdas(self, zone_n, extra=()):
        lam = np.geomspace(self.lambda_min, zone_n, self.n_lambda, endpoint=False)
        extra = np.asarray([x for x in extra if self.lambda_min <= x < zone_n], dtype=float)
        return np.unique(np.concatenate([lam, extra]))

    def times(self, lam, zone_n):
        tx = t_xi(lam, zone_n)
        if tx == 0.0:
            return np.array([0.0])
        return np.concatenate([[0.0], np.geomspace(min(1e-2, tx), tx, self.n_t)])


@dataclass
class BoundReport:
    """Sup of the entrywise ratios with its witness.

    ``rows`` holds one witness row per sampled ``lambda``:
    ``(check, lambda, t, entry, ratio, refinement_level)``.
    """

    check: str
    constant: float
    witness_lambda: float
    witness_t: float
    witness_entry: str
    level: int
    rows: list = field(default_factory=list)


@dataclass
class RefinementSweep:
    """Constants of one check over successive refinement levels."""

    check: str
    reports: list

    @property
    def constants(self):
        return [r.constant for r in self.reports]

    @property
    def max_change(self) -> float:
        """Largest ratio between consecutive constants (>= 1)."""
        c = self.constants
        return max((max(a, b) / min(a, b) for a, b in zip(c[:-1], c[1:])), default=1.0)

    @property
    def stable(self) -> bool:
        return self.max_change <= 2.0

    @property
    def increasing(self) -> bool:
        c = self.constants
        return all(b > a for a, b in zip(c[:-1], c[1:]))

    def rows(self):
        out = []
        for r in self.reports:
            out.extend(r.rows)
        return out


def _scan(check, coeff, weight_fn, pattern_fn, zone_n, grid, tol, extra, threads, backend):
    lams = grid.lambdas(zone_n, extra)

    def one(lam):
        ts = grid.times(lam, zone_n)
        E = np.abs(fundamental_series(coeff, lam, 0.0, ts, tol, backend))
        ratio = E * weight_fn(ts)[:, None, None] / pattern_fn(lam)[None, :, :]
        k = int(np.argmax(ratio))
        i, r = divmod(k, 4)
        return float(ratio.flat[k]), float(ts[i]), ENTRIES[r]

    results = pmap(one, lams, threads)
    rows = [(check, float(lam), t, e, v, grid.level) for lam, (v, t, e) in zip(lams, results)]
    best = max(range(len(rows)), key=lambda j: rows[j][4])
    _, lam_w, t_w, e_w, c_w, _ = rows[best]
    return BoundReport(check, c_w, lam_w, t_w, e_w, grid.level, rows)


def _require(coeff, allowed):
    tag = declared_tag(coeff)
    if tag not in allowed:
        raise RegimeError(f"{coeff.label} is declared {tag}; this check needs {'/'.join(allowed)}")


def check_diss_bound_c1(coeff: CoefficientModel, model=None, gamma: float = 0.0,
                        zone_n: float = 1.0, grid: ZoneGrid = ZoneGrid(),
                        tol: float = DEFAULT_TOL, threads: int = 1, backend=None) -> BoundReport:
    """Sup of ``|E_ik(t,0)| lambda(t)^2 / pattern_ik`` over the dissipative zone.

    ``pattern = [[lam^-gamma, 1], [lam^-gamma, 1]]``.  The sampled spectral
    values are a log grid on ``[grid.lambda_min, zone_n)`` together with the
    values of ``model`` in that range.  Integrable coefficients are accepted
    as a sub-case with ``mu = 0``.
    """
    _require(coeff, ("C1", "Integrable"))
    extra = () if model is None else model.lambdas[model.positive]

    def pattern(lam):
        p = lam ** (-gamma)
        return np.array([[p, 1.0], [p, 1.0]])

    return _scan("lemma_c1", coeff, lambda ts: np.asarray(lambda_at(coeff, ts)) ** 2,
                 pattern, zone_n, grid, tol, extra, threads, backend)


def check_diss_bound_c2(coeff: CoefficientModel, model=None, zone_n: float = 1.0,
                        grid: ZoneGrid = ZoneGrid(), tol: float = DEFAULT_TOL,
                        threads: int = 1, backend=None) -> BoundReport:
    """Sup of ``|E_ik(t,0)| (1+t) / pattern_ik``, ``pattern = [[1/lam, 1], [1/lam, 1]]``."""
    _require(coeff, ("C2",))
    extra = () if model is None else model.lambdas[model.positive]

    def pattern(lam):
        return np.array([[1.0 / lam, 1.0], [1.0 / lam, 1.0]])

    return _scan("lemma_c2", coeff, lambda ts: 1.0 + ts, pattern, zone_n, grid, tol, extra,
                 threads, backend)


def refinement_sweep(check_fn, coeff, levels=3, grid: ZoneGrid = ZoneGrid(), **kwargs):
    """Run a bound check on ``grid.refined(k)`` for ``k = 0 .. levels-1``."""
    reports = [check_fn(coeff, grid=grid.refined(k), **kwargs) for k in range(levels)]
    return RefinementSweep(reports[0].check, reports)


def volterra_solve_diss(coeff: CoefficientModel, lam: float, eta, t: float,
                        kmax: int = 60, tol: float = 1e-12, n_grid: int = 4001):
    """Column ``E(t, 0) eta`` from the Volterra system of the dissipative zone.

    Picard iteration of

        v(t) = eta_1 + lam int_0^t w,
        w(t) = lambda(t)^-2 eta_2 - lam lambda(t)^-2 int_0^t lambda^2 v,

    on a grid uniform in ``log(1+t)`` with cumulative Simpson quadrature.

    Returns
    -------
    (v, w) : tuple of complex
        First and second entries of the column.

    Raises
    ------
    SeriesDivergenceError
        If successive iterates still differ by ``tol`` after ``kmax`` sweeps.
    """
    if lam < 0:
        raise DomainError("spectral value must be non-negative")
    if t < 0:
        raise DomainError("t must be non-negative")
    eta = np.asarray(eta, dtype=complex)
    if t == 0.0:
        return complex(eta[0]), complex(eta[1])
    n = int(n_grid) | 1
    grid = np.expm1(np.linspace(0.0, math.log1p(t), n))
    grid[-1] = t
    L2 = np.asarray(lambda_at(coeff, grid), dtype=float) ** 2

    def cum(f):
        return (cumulative_simpson(f.real, x=grid, initial=0.0)
                + 1j * cumulative_simpson(f.imag, x=grid, initial=0.0))

    v = np.full(n, eta[0], dtype=complex)
    w = eta[1] / L2 + 0j
    diff = math.inf
    for _ in range(int(kmax)):
        v_new = eta[0] + lam * cum(w)
        w_new = (eta[1] - lam * cum(L2 * v)) / L2
        diff = max(np.max(np.abs(v_new - v)), np.max(np.abs(w_new - w)))
        v, w = v_new, w_new
        if diff < tol:
            return complex(v[-1]), complex(w[-1])
    raise SeriesDivergenceError(
        f"Volterra iteration did not settle within {kmax} sweeps (last change {diff:.3e})")
