"""Fixed-order Gauss-Legendre helpers shared by the measure and auction code."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre_unit(order):
    """Nodes and weights of an ``order``-point rule on [0, 1] (weights sum to 1)."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def cumulative_integral(func, x, panels=1024, order=10, grade=1):
    """Return ``int_0^x func(z) dz`` for every entry of ``x`` (all in [0, 1]).

    Composite Gauss-Legendre on ``panels`` equal panels; the partial panel
    containing each ``x`` gets its own rule, so ``func`` is never evaluated
    at the endpoints 0 or 1.  ``grade > 1`` integrates in ``s = z**(1/grade)``,
    which tames algebraic endpoint behaviour such as ``sqrt(z)`` at 0.
    """
    if grade != 1:
        g = float(grade)
        x = np.asarray(x, dtype=float)
        return cumulative_integral(lambda s: func(s**g) * g * s ** (g - 1.0),
                                   np.clip(x, 0.0, 1.0) ** (1.0 / g), panels, order)
    x = np.asarray(x, dtype=float)
    flat = np.clip(x.ravel(), 0.0, 1.0)
    u, w = gauss_legendre_unit(order)
    width = 1.0 / panels
    left = np.arange(panels) * width
    full = (func(left[:, None] + width * u[None, :]) @ w) * width
    before = np.concatenate(([0.0], np.cumsum(full)))

    k = np.minimum((flat * panels).astype(int), panels - 1)
    lo = k * width
    span = flat - lo
    part = (func(lo[:, None] + span[:, None] * u[None, :]) @ w) * span
    return (before[k] + part).reshape(x.shape)
