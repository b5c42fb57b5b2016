"""Integral Cauchy-Binet identity for determinants of sampled functions.

For functions ``f_1..f_m`` and ``g_1..g_n`` (``m <= n``), constants
``c`` (an ``(n-m) x n`` array) and a weight ``h``::

    int...int det F(r) det G(r) prod_l h(r_l) dr_1...dr_m = m! det Phi

with ``F_ij = f_j(r_i)``, ``G`` holding ``c`` on top and ``g_j(r_i)`` below,
and ``Phi`` holding ``c`` on top and ``int f_i g_j h`` below.  The
left-hand side is computed here by brute-force tensor-product quadrature and
the right-hand side from one-dimensional integrals, so the two sides share
no code.
"""

from __future__ import annotations

import itertools
import math
import warnings

import numpy as np
from scipy import integrate

from .errors import DimensionMismatchError


def _check(f, g, c):
    m, n = len(f), len(g)
    if m > n:
        raise DimensionMismatchError("need len(f) <= len(g)")
    c = np.zeros((0, n)) if c is None else np.atleast_2d(np.asarray(c, dtype=float))
    if n - m and c.shape != (n - m, n):
        raise DimensionMismatchError(f"constants must have shape {(n - m, n)}, got {c.shape}")
    return m, n, c.reshape(n - m, n)


def cauchy_binet_lhs(f, g, c, h, domain=(0.0, 1.0), nodes: int = 24) -> float:
    """Left side by an ``m``-fold Gauss-Legendre product rule."""
    m, n, c = _check(f, g, c)
    x, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = domain
    x = 0.5 * (hi - lo) * (x + 1.0) + lo
    w = 0.5 * (hi - lo) * w
    fx = np.array([[fj(xi) for fj in f] for xi in x])       # (nodes, m)
    gx = np.array([[gj(xi) for gj in g] for xi in x])       # (nodes, n)
    hx = np.array([h(xi) for xi in x])
    total = 0.0
    top = c
    for idx in itertools.product(range(nodes), repeat=m):
        idx = list(idx)
        det_f = np.linalg.det(fx[idx, :])
        det_g = np.linalg.det(np.vstack([top, gx[idx, :]]))
        total += det_f * det_g * np.prod(hx[idx] * w[idx])
    return float(total)


def cauchy_binet_rhs(f, g, c, h, domain=(0.0, 1.0)) -> float:
    """Right side ``m! det Phi`` from adaptive one-dimensional quadrature."""
    m, n, c = _check(f, g, c)
    lo, hi = domain
    phi = np.zeros((n, n))
    phi[: n - m] = c
    with warnings.catch_warnings():
        # near machine precision quad reports roundoff; the value is still fine
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for i in range(m):
            for j in range(n):
                phi[n - m + i, j] = integrate.quad(lambda r: f[i](r) * g[j](r) * h(r), lo, hi,
                                                   epsabs=0, epsrel=1e-13, limit=200)[0]
    return float(math.factorial(m) * np.linalg.det(phi))


def cauchy_binet_check(f, g, c, h, domain=(0.0, 1.0), nodes: int = 24):
    """``(lhs, rhs, relative_difference)`` for one instance."""
    lhs = cauchy_binet_lhs(f, g, c, h, domain, nodes)
    rhs = cauchy_binet_rhs(f, g, c, h, domain)
    return lhs, rhs, abs(lhs - rhs) / max(abs(rhs), 1e-300)


def random_polynomial_instance(m: int, n: int, rng: np.random.Generator, degree: int = 4):
    """Random polynomial ``f``, ``g``, constants and weight ``h(r) = 1 + r``.

    Polynomials keep the brute-force side exact for a modest node count.
    """
    def poly(coef):
        return lambda r: float(np.polynomial.polynomial.polyval(r, coef))

    f = [poly(rng.standard_normal(degree + 1)) for _ in range(m)]
    g = [poly(rng.standard_normal(degree + 1)) for _ in range(n)]
    c = rng.standard_normal((n - m, n))
    return f, g, c, (lambda r: 1.0 + r)
