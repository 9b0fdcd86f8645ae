"""Sampled spectral models, Cauchy data and energy norms.

A continuous spectrum is represented by quadrature samples ``(lambda_j, w_j)``
of the spectral function ``Lambda(xi)``; every estimate is then evaluated
mode by mode and aggregated in the weighted l^2 sense.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class SpectralModel:
    """Weighted samples of ``Lambda``, sorted by ``lambdas``.

    Attributes
    ----------
    lambdas : ndarray
        Non-negative spectral values.
    weights : ndarray
        Positive quadrature weights.
    is_kernel : ndarray of bool
        Modes with ``lambda = 0`` (kernel of ``A``).
    """

    lambdas: np.ndarray
    weights: np.ndarray
    is_kernel: np.ndarray
    label: str = "model"

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if lam.shape != w.shape or lam.ndim != 1:
            raise DomainError("lambdas and weights must be 1-d arrays of equal length")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise DomainError("spectral values must be finite and non-negative")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite and positive")
        kern = lam == 0.0
        order = np.argsort(lam, kind="stable")
        object.__setattr__(self, "lambdas", lam[order])
        object.__setattr__(self, "weights", w[order])
        object.__setattr__(self, "is_kernel", kern[order])

    def __len__(self):
        return self.lambdas.size

    @property
    def positive(self) -> np.ndarray:
        return ~self.is_kernel


@dataclass(frozen=True)
class DataVector:
    """Per-mode Cauchy data ``(u1_j, u2_j)`` aligned with a model."""

    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        u1 = np.asarray(self.u1, dtype=complex)
        u2 = np.asarray(self.u2, dtype=complex)
        if u1.shape != u2.shape or u1.ndim != 1:
            raise DomainError("u1 and u2 must be 1-d arrays of equal length")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)

    def __len__(self):
        return self.u1.size

    def scaled(self, factor) -> "DataVector":
        return DataVector(self.u1 * factor, self.u2 * factor)

    def __add__(self, other):
        return DataVector(self.u1 + other.u1, self.u2 + other.u2)


def _check_aligned(model, data):
    if len(model) != len(data):
        raise DomainError(f"data has {len(data)} modes, model has {len(model)}")


def to_energy_rep(model: SpectralModel, data: DataVector) -> np.ndarray:
    """Stack ``V = (Lambda u1, u2)`` into an array of shape (n, 2)."""
    _check_aligned(model, data)
    return np.stack([model.lambdas * data.u1, data.u2], axis=1)


def from_energy_rep(model: SpectralModel, V: np.ndarray) -> DataVector:
    """Inverse of :func:`to_energy_rep`; ``u1`` is set to 0 on kernel modes."""
    lam = model.lambdas
    with np.errstate(divide="ignore", invalid="ignore"):
        u1 = np.where(lam > 0, V[:, 0] / np.where(lam > 0, lam, 1.0), 0.0)
    return DataVector(u1, V[:, 1])


def energy_norm(model: SpectralModel, data: DataVector) -> float:
    """``sqrt(sum_j w_j (lambda_j^2 |u1_j|^2 + |u2_j|^2))``."""
    V = to_energy_rep(model, data)
    return energy_norm_rep(model, V)


def energy_norm_rep(model: SpectralModel, V: np.ndarray) -> float:
    """Energy norm of an array in ``(Lambda u, u')`` representation."""
    return float(np.sqrt(np.sum(model.weights * np.sum(np.abs(V) ** 2, axis=1))))


def bracket(lambdas, zone_n: float) -> np.ndarray:
    """``[Lambda] = min(Lambda, N)``."""
    return np.minimum(np.asarray(lambdas, dtype=float), zone_n)


def e_gamma_norm(model: SpectralModel, data: DataVector, gamma: float,
                 zone_n: float) -> float:
    """Norm of the modified energy space ``E^(gamma)``.

    Kernel modes are outside the space: nonzero kernel data raises for
    ``gamma > 0``; for ``gamma = 0`` the weights take their limits
    ``[lambda]^-1 lambda -> 1`` and ``[lambda]^0 = 1``.
    """
    _check_aligned(model, data)
    if gamma < 0:
        raise DomainError("gamma must be non-negative")
    if zone_n <= 0:
        raise DomainError("zone constant must be positive")
    lam = model.lambdas
    kern = model.is_kernel
    if gamma > 0 and np.any((data.u1[kern] != 0) | (data.u2[kern] != 0)):
        raise DomainError("E^(gamma) with gamma > 0 excludes kernel-mode data")
    br = bracket(lam, zone_n)
    safe = np.where(kern, 1.0, br)
    w1 = np.where(kern, 1.0, safe ** (-gamma - 1.0) * lam)
    w2 = np.where(kern, 1.0, safe ** (-gamma))
    total = np.sum(model.weights * (np.abs(w1 * data.u1) ** 2 + np.abs(w2 * data.u2) ** 2))
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# built-in models


def dirichlet_interval(k: int) -> SpectralModel:
    """``-d^2/dx^2`` on ``(0, pi)`` with Dirichlet conditions: ``Lambda = 1..k``."""
    k = int(k)
    if k <= 0:
        raise DomainError("k must be positive")
    lam = np.arange(1, k + 1, dtype=float)
    return SpectralModel(lam, np.ones(k), lam == 0, label=f"dirichlet_interval(k={k})")


def neumann_interval(k: int) -> SpectralModel:
    """Neumann Laplacian on ``(0, pi)``: ``Lambda = 0..k``, constants in the kernel."""
    k = int(k)
    if k <= 0:
        raise DomainError("k must be positive")
    lam = np.arange(0, k + 1, dtype=float)
    return SpectralModel(lam, np.ones(k + 1), lam == 0, label=f"neumann_interval(k={k})")


def _radial_grid(xi=None, xi_min=0.0, xi_max=None, count=None, dim=1):
    if xi is None:
        if xi_max is None or count is None:
            raise DomainError("radial model needs xi or (xi_max, count)")
        if int(count) <= 0 or xi_max <= xi_min:
            raise DomainError("radial grid needs count > 0 and xi_max > xi_min")
        xi = np.linspace(float(xi_min), float(xi_max), int(count))
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1 or xi.size == 0 or np.any(xi < 0) or np.any(np.diff(xi) <= 0):
        raise DomainError("xi must be a strictly increasing list of non-negative values")
    dim = int(dim)
    if dim < 1:
        raise DomainError("dimension must be >= 1")
    if xi.size == 1:
        width = np.ones(1)
    else:
        edges = np.concatenate([[xi[0]], 0.5 * (xi[1:] + xi[:-1]), [xi[-1]]])
        width = np.diff(edges)
    w = width * xi ** (dim - 1)
    keep = w > 0
    return xi[keep], w[keep]


def wave_radial(xi=None, xi_min=0.0, xi_max=None, count=None, dim=1) -> SpectralModel:
    """``-Delta`` on ``L^2(R^n)`` in polar Fourier coordinates: ``Lambda = |xi|``."""
    xi, w = _radial_grid(xi, xi_min, xi_max, count, dim)
    return SpectralModel(xi, w, xi == 0, label=f"wave_radial(n={dim},N={xi.size})")


def klein_gordon(xi=None, xi_min=0.0, xi_max=None, count=None, dim=1) -> SpectralModel:
    """``-Delta + 1``: ``Lambda = sqrt(1 + |xi|^2) >= 1`` (boundedly invertible)."""
    xi, w = _radial_grid(xi, xi_min, xi_max, count, dim)
    lam = np.sqrt(1.0 + xi**2)
    return SpectralModel(lam, w, lam == 0, label=f"klein_gordon(n={dim},N={xi.size})")


def plate(xi=None, xi_min=0.0, xi_max=None, count=None, dim=1) -> SpectralModel:
    """``Delta^2``: ``Lambda = |xi|^2``."""
    xi, w = _radial_grid(xi, xi_min, xi_max, count, dim)
    lam = xi**2
    return SpectralModel(lam, w, lam == 0, label=f"plate(n={dim},N={xi.size})")


def load_model_csv(path) -> SpectralModel:
    """Read ``lambda,weight[,is_kernel]`` rows."""
    lam, w, kern = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        if not {"lambda", "weight"} <= set(reader.fieldnames or ()):
            raise DomainError("spectral CSV needs columns lambda,weight")
        for row in reader:
            lam.append(float(row["lambda"]))
            w.append(float(row["weight"]))
            if row.get("is_kernel") not in (None, ""):
                kern.append(row["is_kernel"].strip().lower() in ("1", "true", "yes"))
    lam = np.array(lam)
    if kern and np.any(np.array(kern) != (lam == 0)):
        raise DomainError("is_kernel flags must coincide with lambda == 0")
    return SpectralModel(lam, np.array(w), lam == 0, label=f"csv({path})")


MODELS = {
    "dirichlet_interval": dirichlet_interval,
    "neumann_interval": neumann_interval,
    "wave_radial": wave_radial,
    "klein_gordon": klein_gordon,
    "plate": plate,
}


def builtin_models(kind: str, **params) -> SpectralModel:
    """Construct a built-in spectral model by name."""
    if kind == "csv":
        return load_model_csv(params["path"])
    if kind not in MODELS:
        raise DomainError(f"unknown spectral model {kind!r}")
    try:
        return MODELS[kind](**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for model {kind!r}: {exc}") from None


# ---------------------------------------------------------------------------
# data


def gaussian_bump(model, center, width, phase=0.0):
    """Gaussian profile ``g(lambda)`` placed on ``Lambda u1`` and on ``u2``."""
    lam = model.lambdas
    g = np.exp(-0.5 * ((lam - center) / width) ** 2)
    g = np.where(model.is_kernel, 0.0, g)
    with np.errstate(divide="ignore", invalid="ignore"):
        u1 = np.where(lam > 0, g / np.where(lam > 0, lam, 1.0), 0.0)
    return DataVector(u1, g * np.exp(1j * phase))


def smooth_bump(model, lo, hi, phase=0.0):
    """C-infinity bump supported in ``lo < lambda < hi``."""
    if not 0 <= lo < hi:
        raise DomainError("smooth_bump needs 0 <= lo < hi")
    lam = model.lambdas
    x = (2.0 * lam - (lo + hi)) / (hi - lo)
    inside = np.abs(x) < 1
    g = np.zeros_like(lam)
    g[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    g = np.where(model.is_kernel, 0.0, g)
    with np.errstate(divide="ignore", invalid="ignore"):
        u1 = np.where(lam > 0, g / np.where(lam > 0, lam, 1.0), 0.0)
    return DataVector(u1, g * np.exp(1j * phase))


def random_data(model, seed=0, exclude_kernel=True, lo=None, hi=None):
    rng = np.random.default_rng(seed)
    n = len(model)
    u1 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    u2 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    mask = np.ones(n, dtype=bool)
    if exclude_kernel:
        mask &= model.positive
    if lo is not None:
        mask &= model.lambdas >= lo
    if hi is not None:
        mask &= model.lambdas <= hi
    return DataVector(np.where(mask, u1, 0), np.where(mask, u2, 0))


def kernel_only(model, u1=1.0, u2=1.0):
    kern = model.is_kernel
    if not np.any(kern):
        raise DomainError("model has no kernel modes")
    return DataVector(np.where(kern, u1, 0.0), np.where(kern, u2, 0.0))


def load_data_csv(path, model) -> DataVector:
    """Read ``lambda_index,re_u1,im_u1,re_u2,im_u2``; unlisted modes are zero."""
    u1 = np.zeros(len(model), dtype=complex)
    u2 = np.zeros(len(model), dtype=complex)
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        need = {"lambda_index", "re_u1", "im_u1", "re_u2", "im_u2"}
        if not need <= set(reader.fieldnames or ()):
            raise DomainError(f"data CSV needs columns {sorted(need)}")
        for row in reader:
            j = int(row["lambda_index"])
            if not 0 <= j < len(model):
                raise DomainError(f"lambda_index {j} out of range")
            u1[j] = complex(float(row["re_u1"]), float(row["im_u1"]))
            u2[j] = complex(float(row["re_u2"]), float(row["im_u2"]))
    return DataVector(u1, u2)


DATA_KINDS = {
    "gaussian_bump": gaussian_bump,
    "smooth_bump": smooth_bump,
    "random": random_data,
    "kernel_only": kernel_only,
}


def make_data(model: SpectralModel, kind: str, **params) -> DataVector:
    if kind == "csv":
        return load_data_csv(params["path"], model)
    if kind not in DATA_KINDS:
        raise DomainError(f"unknown data kind {kind!r}")
    try:
        return DATA_KINDS[kind](model, **params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for data {kind!r}: {exc}") from None
