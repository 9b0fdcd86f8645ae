"""Backend selection and a numpy-facing wrapper around the integration kernel.

The compiled ``_kernel_c`` is used when it imports; otherwise, or when the
environment variable ``DAMPSCAT_BACKEND=python`` is set, the pure-Python
``_kernel_py`` is used.  Both expose the same ``propagate`` function.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernel_py
from ._kernel_py import (STATUS_CALLBACK, STATUS_MAX_STEPS, STATUS_NONFINITE,
                         STATUS_OK, STATUS_UNDERFLOW, SYS_CLASSICAL,
                         SYS_FUNDAMENTAL, SYS_Q1)
from .coefficients import KIND_CALLBACK
from .errors import DomainError, NumericalError, StiffnessError

try:
    from . import _kernel_c
except ImportError:  # pragma: no cover - depends on the build
    _kernel_c = None

__all__ = ["SYS_FUNDAMENTAL", "SYS_Q1", "SYS_CLASSICAL", "BACKENDS", "default_backend",
           "solve", "HMAX_CAP", "MAX_STEPS"]

BACKENDS = {"python": _kernel_py}
if _kernel_c is not None:
    BACKENDS["cython"] = _kernel_c

# step cap c / max(lambda, 1): about a sixth of an oscillation period
HMAX_CAP = 1.0
MAX_STEPS = 50_000_000
ATOL_FACTOR = 1e-3


def default_backend() -> str:
    """Name of the backend used when none is requested explicitly."""
    forced = os.environ.get("DAMPSCAT_BACKEND", "").strip().lower()
    if forced:
        if forced not in BACKENDS:
            raise DomainError(f"DAMPSCAT_BACKEND={forced!r} is not available; "
                              f"have {sorted(BACKENDS)}")
        return forced
    return "cython" if "cython" in BACKENDS else "python"


def _module(backend):
    name = default_backend() if backend is None else backend
    try:
        return BACKENDS[name]
    except KeyError:
        raise DomainError(f"unknown backend {name!r}; have {sorted(BACKENDS)}") from None


def solve(system, coeff, lam, s_ref, t0, y0, times, tol, hmax=None, backend=None,
          max_steps=MAX_STEPS):
    """Integrate ``Y' = F(t) Y`` from ``t0`` and sample at ``times``.

    Parameters
    ----------
    system : int
        One of ``SYS_FUNDAMENTAL``, ``SYS_Q1``, ``SYS_CLASSICAL``.
    coeff : CoefficientModel
    lam : float
        Spectral value; ``s_ref`` is the reference time of the oscillating
        factors for the interaction-picture systems.
    y0 : array_like, shape (2, 2)
    times : array_like
        Non-decreasing output times, all ``>= t0``.
    tol : float
        Relative tolerance; absolute tolerance is ``tol * 1e-3``.

    Returns
    -------
    ndarray, shape (len(times), 2, 2), complex
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if tol <= 0:
        raise DomainError("tol must be positive")
    if times.size and (times[0] < t0 or np.any(np.diff(times) < 0)):
        raise DomainError("output times must be non-decreasing and >= t0")
    if hmax is None:
        hmax = HMAX_CAP / max(lam, 1.0)
    y0 = np.asarray(y0, dtype=complex).reshape(4)
    mod = _module(backend)

    failure = []
    callback = None
    if coeff.kernel_kind == KIND_CALLBACK:
        def callback(t, _pair=coeff.pair):
            try:
                return _pair(t)
            except Exception as exc:  # re-raised below with context
                failure.append(exc)
                raise
    params = tuple(float(p) for p in coeff.kernel_params) or (0.0,)

    states, nsteps, status, t_fail = mod.propagate(
        int(system), int(coeff.kernel_kind), params, callback, float(lam), float(s_ref),
        float(t0), tuple(y0), times.tolist(), float(tol), float(tol) * ATOL_FACTOR, float(hmax),
        int(max_steps))
    if status == STATUS_OK:
        return np.array(states, dtype=complex).reshape(times.size, 2, 2)
    if status == STATUS_UNDERFLOW:
        raise StiffnessError(f"step size underflow at t={t_fail:.17g} (lambda={lam})", t=t_fail)
    if status == STATUS_MAX_STEPS:
        raise NumericalError(f"step budget {max_steps} exhausted at t={t_fail:.17g}")
    if status == STATUS_NONFINITE:
        raise NumericalError(f"non-finite error estimate at t={t_fail:.17g}")
    if status == STATUS_CALLBACK and failure:
        raise failure[0]
    raise NumericalError(f"kernel status {status} at t={t_fail:.17g}")
