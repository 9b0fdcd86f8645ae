"""Dissipation coefficients b(t) and their derived quantities.

A :class:`CoefficientModel` bundles ``b``, ``b'``, an optional closed-form
primitive ``B(t) = int_0^t b``, and the declared asymptotic constants that
select a regime.  Built-in coefficients also carry a compact numeric code so
the compiled integration kernel can evaluate them without calling back into
Python.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, QuadratureError, ValidationError

# kernel coefficient codes, shared with _kernel_py / _kernel_c
KIND_ZERO = 0
KIND_POWER = 1
KIND_ITERLOG = 2
KIND_FOOTNOTE = 3
KIND_CALLBACK = 4

QUAD_RTOL = 1e-10
MU_PLUS_OFFSET = 0.01
_DYADIC_FINITE_LIMIT = 2.0**20

TAGS = ("Integrable", "C1", "C2", "Unclassified")


@dataclass(frozen=True)
class CoefficientModel:
    """A dissipation coefficient together with its hypothesis constants.

    ``b`` and ``b_prime`` must accept floats and numpy arrays.  ``past`` is
    the coefficient on negative times in the form ``tau -> b(-tau)``; ``None``
    means the even extension ``b(-tau) = b(tau)``.
    """

    b: Callable
    b_prime: Callable
    primitive: Optional[Callable] = None
    mu_upper: Optional[float] = None
    mu_lower: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    label: str = "custom"
    integrable: Optional[bool] = None
    past: Optional["CoefficientModel"] = None
    kernel_kind: int = KIND_CALLBACK
    kernel_params: tuple = ()
    params: dict = field(default_factory=dict, compare=False)

    def pair(self, t):
        """Return ``(b(t), b'(t))`` as floats; used as the kernel callback."""
        return float(self.b(t)), float(self.b_prime(t))

    def reflected(self) -> "CoefficientModel":
        """Coefficient ``tau -> -b(-tau)`` that runs negative time forward.

        For ``t = -tau`` the system in ``(Lambda u, u')`` becomes, after the
        sign flip ``diag(1, -1)``, the same system with this coefficient.
        Reflecting twice returns a model equal to the original.
        """
        src = self.past if self.past is not None else self
        return replace(_negated(src), label=f"reflected({self.label})",
                       past=_negated(self))


def _negated(m: CoefficientModel) -> CoefficientModel:
    if m.kernel_kind == KIND_CALLBACK:
        kind, kparams = KIND_CALLBACK, ()
    else:
        kind = m.kernel_kind
        kparams = (-m.kernel_params[0],) + tuple(m.kernel_params[1:])
    prim = m.primitive
    return CoefficientModel(
        b=lambda t, f=m.b: -f(t),
        b_prime=lambda t, f=m.b_prime: -f(t),
        primitive=None if prim is None else (lambda t, f=prim: -f(t)),
        mu_upper=None if m.mu_lower is None else -m.mu_lower,
        mu_lower=None if m.mu_upper is None else -m.mu_upper,
        c1=m.c1,
        c2=m.c2,
        label=f"-{m.label}",
        integrable=m.integrable,
        kernel_kind=kind,
        kernel_params=kparams,
        params=dict(m.params),
    )


@dataclass(frozen=True)
class Regime:
    """Outcome of :func:`classify`.

    ``gamma_index`` is the index of the data space ``E^(gamma)`` for the
    energy estimate; ``lemma_gamma`` is the exponent for the dissipative-zone
    bound in case C1.  ``gamma_2mu_admissible`` records whether the sampled
    tail supports ``Lambda^(2 mu) lambda^2(t_xi) <~ 1``.
    """

    tag: str
    gamma_index: float = 0.0
    lemma_gamma: Optional[float] = None
    mu_plus: Optional[float] = None
    gamma_2mu_admissible: Optional[bool] = None
    tb_sup: float = float("nan")
    tb_inf: float = float("nan")

    @property
    def normalizes_by_lambda(self) -> bool:
        """Whether residuals carry the lambda(t) factor (not for L^1 b)."""
        return self.tag != "Integrable"


# ---------------------------------------------------------------------------
# built-in library


def zero() -> CoefficientModel:
    return CoefficientModel(
        b=lambda t: np.zeros_like(np.asarray(t, dtype=float)) + 0.0,
        b_prime=lambda t: np.zeros_like(np.asarray(t, dtype=float)) + 0.0,
        primitive=lambda t: np.zeros_like(np.asarray(t, dtype=float)) + 0.0,
        mu_upper=0.0,
        mu_lower=0.0,
        c1=0.0,
        c2=0.0,
        label="zero",
        integrable=True,
        kernel_kind=KIND_ZERO,
        kernel_params=(0.0,),
        params={"kind": "zero"},
    )


def power_law(p: float, amplitude: float = 1.0) -> CoefficientModel:
    """``b(t) = amplitude * (1+t)^(-p)``."""
    p = float(p)
    a = float(amplitude)
    if a < 0:
        raise DomainError("power_law amplitude must be non-negative")

    def b(t):
        return a * (1.0 + np.asarray(t, dtype=float)) ** (-p)

    def bp(t):
        return -p * a * (1.0 + np.asarray(t, dtype=float)) ** (-p - 1.0)

    if p == 1.0:
        def prim(t):
            return a * np.log1p(np.asarray(t, dtype=float))
    else:
        def prim(t):
            return a * ((1.0 + np.asarray(t, dtype=float)) ** (1.0 - p) - 1.0) / (1.0 - p)

    declared = {}
    if p > 1.0:
        declared = dict(mu_upper=0.0, mu_lower=0.0, integrable=True)
    elif p == 1.0:
        declared = dict(mu_upper=a, mu_lower=a, integrable=a == 0.0)
    return CoefficientModel(
        b=b,
        b_prime=bp,
        primitive=prim,
        c1=a if p >= 1.0 else None,
        c2=a * p if p >= 1.0 else None,
        label=f"power_law(p={p:g},a={a:g})",
        kernel_kind=KIND_POWER,
        kernel_params=(a, p),
        params={"kind": "power_law", "p": p, "amplitude": a},
        **declared,
    )


def mu_over_1pt(mu: float) -> CoefficientModel:
    """``b(t) = mu / (1+t)``."""
    m = power_law(1.0, mu)
    return replace(m, label=f"mu_over_1pt(mu={float(mu):g})",
                   params={"kind": "mu_over_1pt", "mu": float(mu)})


def _iterated_exp(n: int) -> float:
    v = 1.0
    for _ in range(n):
        v = math.exp(v)
    return v


def iterated_log(mu: float, n: int) -> CoefficientModel:
    """``b(t) = mu / ((1+t) log(e+t) ... log^[n](e^[n]+t))``."""
    n = int(n)
    if not 0 <= n <= 3:
        raise DomainError("iterated_log supports 0 <= n <= 3")
    mu = float(mu)
    if n == 0:
        m = mu_over_1pt(mu)
        return replace(m, label=f"iterated_log(mu={mu:g},n=0)",
                       params={"kind": "iterated_log", "mu": mu, "n": 0})
    shifts = [_iterated_exp(k) for k in range(1, n + 1)]

    def _logs(t):
        t = np.asarray(t, dtype=float)
        vals, dlogs = [], []
        for k, shift in enumerate(shifts, start=1):
            x = shift + t
            d = np.ones_like(x)
            for _ in range(k):
                d = d / x
                x = np.log(x)
            vals.append(x)
            dlogs.append(d / x)
        return vals, dlogs

    def b(t):
        t = np.asarray(t, dtype=float)
        vals, _ = _logs(t)
        den = 1.0 + t
        for v in vals:
            den = den * v
        return mu / den

    def bp(t):
        t = np.asarray(t, dtype=float)
        vals, dlogs = _logs(t)
        den = 1.0 + t
        rate = 1.0 / (1.0 + t)
        for v, dl in zip(vals, dlogs):
            den = den * v
            rate = rate + dl
        return -mu / den * rate

    return CoefficientModel(
        b=b,
        b_prime=bp,
        mu_upper=0.0,
        mu_lower=0.0,
        c1=mu,
        c2=mu * (n + 1),
        label=f"iterated_log(mu={mu:g},n={n})",
        integrable=False if mu > 0 else True,
        kernel_kind=KIND_ITERLOG,
        kernel_params=(mu, float(n)),
        params={"kind": "iterated_log", "mu": mu, "n": n},
    )


def footnote_counterexample() -> CoefficientModel:
    """``b(t) = 1/(4(e+t)) + 1/((e+t) log(e+t))``; limsup t b(t) = 1/4."""

    def b(t):
        x = math.e + np.asarray(t, dtype=float)
        return 0.25 / x + 1.0 / (x * np.log(x))

    def bp(t):
        x = math.e + np.asarray(t, dtype=float)
        lg = np.log(x)
        return -0.25 / x**2 - (lg + 1.0) / (x * lg) ** 2

    def prim(t):
        x = math.e + np.asarray(t, dtype=float)
        lg = np.log(x)
        return 0.25 * lg + np.log(lg) - 0.25

    return CoefficientModel(
        b=b,
        b_prime=bp,
        primitive=prim,
        mu_upper=0.25,
        mu_lower=0.25,
        c1=1.25,
        c2=2.25,
        label="footnote_counterexample",
        integrable=False,
        kernel_kind=KIND_FOOTNOTE,
        kernel_params=(1.0,),
        params={"kind": "footnote_counterexample"},
    )


def tabulated(t, b, bprime, label="tabulated") -> CoefficientModel:
    """Coefficient interpolated from samples by monotone cubic splines.

    Beyond the last sample, ``b`` continues as ``C (1+t)^(-p)`` with ``p``
    matched to the final slope so that ``b`` stays C^1.  Derivative accuracy
    is that of the tabulated ``b'`` column, not of a differentiated spline.
    """
    t = np.asarray(t, dtype=float)
    b = np.asarray(b, dtype=float)
    bprime = np.asarray(bprime, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise DomainError("tabulated times must be strictly increasing (>= 2 rows)")
    if t[0] > 0.0:
        raise DomainError("tabulated coefficient must start at t = 0")
    bi = PchipInterpolator(t, b, extrapolate=False)
    dbi = PchipInterpolator(t, bprime, extrapolate=False)
    t_end, b_end = t[-1], b[-1]
    p_end = -bprime[-1] * (1.0 + t_end) / b_end if b_end > 0 else 0.0

    def bf(x):
        x = np.asarray(x, dtype=float)
        tail = b_end * ((1.0 + t_end) / (1.0 + x)) ** p_end
        return np.where(x <= t_end, bi(np.minimum(x, t_end)), tail)

    def bpf(x):
        x = np.asarray(x, dtype=float)
        tail = -p_end * b_end * (1.0 + t_end) ** p_end * (1.0 + x) ** (-p_end - 1.0)
        return np.where(x <= t_end, dbi(np.minimum(x, t_end)), tail)

    return CoefficientModel(b=bf, b_prime=bpf, label=label,
                            params={"kind": "tabulated"})


def load_tabulated_csv(path) -> CoefficientModel:
    """Read ``t,b,bprime`` columns (header required)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        missing = {"t", "b", "bprime"} - set(reader.fieldnames or ())
        if missing:
            raise DomainError(f"coefficient CSV missing columns {sorted(missing)}")
        for row in reader:
            rows.append((float(row["t"]), float(row["b"]), float(row["bprime"])))
    arr = np.array(rows, dtype=float)
    return tabulated(arr[:, 0], arr[:, 1], arr[:, 2], label=f"tabulated({path})")


def custom(b, b_prime, label="custom", **declared) -> CoefficientModel:
    return CoefficientModel(b=b, b_prime=b_prime, label=label, **declared)


BUILTINS = {
    "zero": zero,
    "power_law": power_law,
    "mu_over_1pt": mu_over_1pt,
    "iterated_log": iterated_log,
    "footnote_counterexample": footnote_counterexample,
}


def from_spec(spec: dict) -> CoefficientModel:
    """Build a coefficient from a config table such as ``{kind="mu_over_1pt", mu=0.3}``.

    Declared constants (``mu_upper``, ``mu_lower``, ``c1``, ``c2``) present in
    the table override the built-in declarations.
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    overrides = {k: spec.pop(k) for k in ("mu_upper", "mu_lower", "c1", "c2")
                 if k in spec}
    if kind == "tabulated":
        model = load_tabulated_csv(spec.pop("path"))
    elif kind in BUILTINS:
        try:
            model = BUILTINS[kind](**spec)
        except TypeError as exc:
            raise DomainError(f"bad parameters for coefficient {kind!r}: {exc}") from None
    else:
        raise DomainError(f"unknown coefficient kind {kind!r}")
    if overrides:
        model = replace(model, **{k: float(v) for k, v in overrides.items()})
    return model


# ---------------------------------------------------------------------------
# quadrature


def _dyadic_edges(a: float, c: float) -> list:
    edges = [a]
    k = 1.0
    while k <= a:
        k *= 2.0
    while k < c and k <= _DYADIC_FINITE_LIMIT:
        edges.append(k)
        k *= 2.0
    edges.append(c)
    return edges


def integrate(f, a: float, c: float, rtol: float = QUAD_RTOL) -> float:
    """``int_a^c f`` by adaptive quadrature on dyadic panels (``c`` may be inf).

    Panels double in length up to ``2^20``; an infinite remainder is mapped
    onto ``(0, 1]``.
    """
    if c < a:
        raise DomainError(f"integration bounds reversed: {a} > {c}")
    if c == a:
        return 0.0
    total, err = 0.0, 0.0
    edges = _dyadic_edges(a, c)
    for lo, hi in zip(edges[:-1], edges[1:]):
        if math.isinf(hi):
            # x = lo/u maps the tail onto (0, 1]; better conditioned than quad's own map
            val, e = quad(lambda u: float(f(lo / u)) * lo / (u * u), 0.0, 1.0,
                          epsabs=0.0, epsrel=0.1 * rtol, limit=400)
        else:
            val, e = quad(lambda x: float(f(x)), lo, hi, epsabs=0.0,
                          epsrel=0.1 * rtol, limit=400)
        total += val
        err += e
    if err > rtol * abs(total) + 1e-300 and err > 1e-15:
        raise QuadratureError(
            f"quadrature on [{a}, {c}] reached error {err:.3e}", achieved=err)
    return total


def primitive_at(coeff: CoefficientModel, t):
    """``B(t) = int_0^t b`` for scalar or array ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("time must be non-negative")
    if coeff.primitive is not None:
        out = np.asarray(coeff.primitive(t_arr), dtype=float)
        return float(out) if out.ndim == 0 else out
    flat = t_arr.ravel()
    order = np.argsort(flat, kind="stable")
    out = np.empty_like(flat)
    acc, prev = 0.0, 0.0
    for idx in order:
        ti = flat[idx]
        if ti > prev:
            acc += integrate(coeff.b, prev, ti)
            prev = ti
        out[idx] = acc
    out = out.reshape(t_arr.shape)
    return float(out) if out.ndim == 0 else out


def lambda_at(coeff: CoefficientModel, t):
    """``lambda(t) = exp(int_0^t b)``."""
    return np.exp(primitive_at(coeff, t))


def tail_integral(coeff: CoefficientModel, t: float, horizon: float = math.inf) -> float:
    """``int_t^horizon b``."""
    if t < 0:
        raise DomainError("t must be non-negative")
    if horizon < t:
        raise DomainError(f"horizon {horizon} < t {t}")
    if coeff.integrable is False and not math.isfinite(horizon):
        raise DomainError(f"{coeff.label} is not integrable: the tail integral diverges")
    if coeff.primitive is not None and math.isfinite(horizon):
        return float(coeff.primitive(horizon) - coeff.primitive(t))
    if coeff.primitive is not None and coeff.integrable and coeff.kernel_kind == KIND_POWER:
        a, p = coeff.kernel_params
        return a * (1.0 + t) ** (1.0 - p) / (p - 1.0)
    return integrate(coeff.b, t, horizon)


def lambda_ratio(coeff: CoefficientModel, s: float, t: float) -> float:
    """``lambda(s) / lambda(t) = exp(-int_s^t b)`` for ``s <= t``."""
    return math.exp(-tail_integral(coeff, s, t))


def lambda_infinity(coeff: CoefficientModel) -> float:
    """``lambda(inf)`` for integrable coefficients."""
    if not coeff.integrable:
        raise DomainError(f"{coeff.label} is not declared integrable")
    return math.exp(tail_integral(coeff, 0.0, math.inf))


# ---------------------------------------------------------------------------
# regime classification


def check_hypotheses(coeff: CoefficientModel, times) -> None:
    """Falsify (A1) and, when declared, (A2) on the sampled ``times``."""
    times = np.asarray(times, dtype=float)
    bv = np.asarray(coeff.b(times), dtype=float)
    bad = np.nonzero(bv < 0)[0]
    if bad.size:
        raise ValidationError(f"b < 0 at t={times[bad[0]]:.6g} (A1)", witness=float(times[bad[0]]))
    bracket = np.sqrt(1.0 + times**2)
    slack = 1e-12
    if coeff.c1 is not None:
        v = bv * bracket
        bad = np.nonzero(v > coeff.c1 * (1 + slack) + slack)[0]
        if bad.size:
            raise ValidationError(
                f"b(t)<t> = {v[bad[0]]:.6g} > c1 = {coeff.c1} at t={times[bad[0]]:.6g} (A2)",
                witness=float(times[bad[0]]))
    if coeff.c2 is not None:
        v = np.abs(np.asarray(coeff.b_prime(times), dtype=float)) * bracket**2
        bad = np.nonzero(v > coeff.c2 * (1 + slack) + slack)[0]
        if bad.size:
            raise ValidationError(
                f"|b'(t)|<t>^2 = {v[bad[0]]:.6g} > c2 = {coeff.c2} at t={times[bad[0]]:.6g} (A2)",
                witness=float(times[bad[0]]))


def declared_tag(coeff: CoefficientModel) -> str:
    """Regime tag implied by the declarations alone, without sampling."""
    if coeff.integrable:
        return "Integrable"
    if coeff.mu_upper is not None and coeff.mu_upper < 0.5:
        return "C1"
    if coeff.mu_lower is not None and coeff.mu_lower > 0.5:
        return "C2"
    return "Unclassified"


def sup_t_b(coeff: CoefficientModel, horizon: float = 1e6, grid_size: int = 400) -> float:
    """``max (1+t) |b(t)|`` over a log grid on ``[0, horizon]``."""
    t = np.concatenate([[0.0], np.geomspace(1e-3, horizon, grid_size)])
    return float(np.max((1.0 + t) * np.abs(np.asarray(coeff.b(t), dtype=float))))


def classify(coeff: CoefficientModel, horizon: float = 1e6, grid_size: int = 200,
             tol: float = 0.05, mu_plus: Optional[float] = None,
             lemma_gamma: Optional[float] = None) -> Regime:
    """Check the declared regime of ``coeff`` against samples up to ``horizon``.

    Declarations decide the tag; samples of ``t b(t)`` on ``[horizon/10,
    horizon]`` can only contradict them (raising :class:`ValidationError`).
    """
    if horizon <= 0:
        raise DomainError("horizon must be positive")
    full = np.concatenate([[0.0], np.geomspace(1e-3, horizon, 4 * grid_size)])
    check_hypotheses(coeff, full)
    tail = np.geomspace(horizon / 10.0, horizon, grid_size)
    tb = tail * np.asarray(coeff.b(tail), dtype=float)
    tb_sup, tb_inf = float(tb.max()), float(tb.min())

    if coeff.mu_upper is not None and tb_sup > coeff.mu_upper + tol:
        i = int(np.argmax(tb))
        raise ValidationError(
            f"t*b(t) = {tb_sup:.6g} exceeds declared mu_upper={coeff.mu_upper} "
            f"at t={tail[i]:.6g}", witness=float(tail[i]))
    if coeff.mu_lower is not None and tb_inf < coeff.mu_lower - tol:
        i = int(np.argmin(tb))
        raise ValidationError(
            f"t*b(t) = {tb_inf:.6g} below declared mu_lower={coeff.mu_lower} "
            f"at t={tail[i]:.6g}", witness=float(tail[i]))

    if coeff.integrable:
        near = tail_integral(coeff, horizon / 10.0, horizon)
        far = tail_integral(coeff, horizon / 100.0, horizon / 10.0)
        if near > 0 and near > (1.0 - tol) * far:
            raise ValidationError(
                f"declared integrable but tail integrals do not shrink "
                f"({far:.3g} -> {near:.3g})", witness=horizon)
        return Regime(tag="Integrable", gamma_index=0.0, lemma_gamma=0.0,
                      mu_plus=None, gamma_2mu_admissible=True,
                      tb_sup=tb_sup, tb_inf=tb_inf)

    mu_bar = coeff.mu_upper
    if mu_bar is not None and mu_bar < 0.5:
        mp = mu_bar + MU_PLUS_OFFSET if mu_plus is None else float(mu_plus)
        # Lambda^(2 mu) lambda^2(t_xi) ~ lambda^2(t) (1+t)^(-2 mu) must stay bounded
        lo, hi = horizon / 10.0, horizon
        growth = math.exp(2.0 * (tail_integral(coeff, lo, hi)
                                 - mu_bar * math.log((1.0 + hi) / (1.0 + lo))))
        admissible = growth <= 1.0 + tol
        lg = lemma_gamma
        if lg is None:
            lg = 2.0 * mu_bar if admissible else 2.0 * mp
        return Regime(tag="C1", gamma_index=0.0, lemma_gamma=float(lg), mu_plus=mp,
                      gamma_2mu_admissible=admissible, tb_sup=tb_sup, tb_inf=tb_inf)
    if coeff.mu_lower is not None and coeff.mu_lower > 0.5:
        ref = coeff.mu_upper if coeff.mu_upper is not None else coeff.mu_lower
        mp = ref + MU_PLUS_OFFSET if mu_plus is None else float(mu_plus)
        return Regime(tag="C2", gamma_index=max(mp - 1.0, 0.0), lemma_gamma=None,
                      mu_plus=mp, tb_sup=tb_sup, tb_inf=tb_inf)
    return Regime(tag="Unclassified", tb_sup=tb_sup, tb_inf=tb_inf)
