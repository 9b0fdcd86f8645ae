"""Scattering and energy decay for wave equations with weak time-dependent dissipation.

The equation ``u'' + 2 b(t) u' + A u = 0`` is reduced by the spectral theorem
to a family of 2x2 first-order systems, one per spectral value of
``Lambda = sqrt(A)``.  The package integrates these systems, builds the
hyperbolic-zone diagonaliser, computes (modified) wave operators and checks
the decay and equivalence statements numerically.
"""

__version__ = "0.1.0"

from .kernels import default_backend  # noqa: E402

__all__ = ["__version__", "default_backend"]
