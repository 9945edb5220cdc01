"""Quadrature on [-2, 2] with endpoint 1/sqrt(4-x^2) singularities.

Everything runs through the substitution x = 2 cos(theta), which turns
int g(x)/sqrt(4-x^2) dx into int g(2 cos t) dt and kills the endpoint
singularity analytically; Gauss-Legendre in theta then converges spectrally
for smooth integrands.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


class QuadratureError(RuntimeError):
    pass


@lru_cache(maxsize=32)
def theta_rule(npts: int):
    """Gauss-Legendre nodes/weights on theta in (0, pi), read-only arrays."""
    x, w = np.polynomial.legendre.leggauss(npts)
    theta = 0.5 * np.pi * (x + 1.0)
    wt = 0.5 * np.pi * w
    theta.setflags(write=False)
    wt.setflags(write=False)
    return theta, wt


def integral_inv_sqrt(g, npts: int = 512) -> float:
    """int_{-2}^{2} g(x) / sqrt(4 - x^2) dx."""
    t, w = theta_rule(npts)
    return float(np.sum(w * g(2.0 * np.cos(t))))


def integral_sqrt(g, npts: int = 512) -> float:
    """int_{-2}^{2} g(x) sqrt(4 - x^2) dx."""
    t, w = theta_rule(npts)
    return float(np.sum(w * g(2.0 * np.cos(t)) * 4.0 * np.sin(t) ** 2))


def converged(evaluate, start: int = 64, max_pts: int = 4096,
              rtol: float = 1e-7, atol: float = 1e-12) -> float:
    """Double the rule until two consecutive evaluations agree to rtol/atol."""
    npts = start
    prev = evaluate(npts)
    while npts < max_pts:
        npts *= 2
        cur = evaluate(npts)
        if abs(cur - prev) <= rtol * abs(cur) + atol:
            return cur
        prev = cur
    raise QuadratureError(
        f"quadrature did not converge by {max_pts} points (last delta "
        f"{abs(cur - prev):.3e})"
    )
