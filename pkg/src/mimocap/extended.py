"""Multiprecision evaluation of the CF matrices.

At high SNR the correlated matrix ``Lambda`` approaches a matrix of rank
one: its lower rows are dominated by ``(eta_bar lambda_i sigma_j)^(n_s-1)``
and the determinant lives in the lower-order terms.  Double precision loses
roughly ``n_s (n_s - 1)/2 * log10(eta_bar)`` digits.  The routines here
rebuild the same matrices with :mod:`mpmath` at a working precision chosen
from that estimate.

Every entry is a sum of the one-dimensional integrals
``I_l(s) = int_1^inf t^(s-1) ln^l(t) exp(-c t) dt``, evaluated as the
``l``-th ``s``-derivative of ``Gamma(s) c^-s`` (a Bell polynomial in
polygamma values) minus a convergent series for the part on ``[0, 1]``.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np

from .errors import NumericalDegeneracyError


def _bell(xs):
    bell = [mp.mpf(1)]
    for n in range(len(xs)):
        bell.append(mp.fsum(math.comb(n, k) * bell[n - k] * xs[k] for k in range(n + 1)))
    return bell


def incgamma_log_moment(s, c, ell):
    """``int_1^inf t^(s-1) ln^ell(t) exp(-c t) dt`` for ``Re s > 0``, ``c > 0``."""
    lc = mp.log(c)
    derivs = [mp.digamma(s) - lc] + [mp.polygamma(j, s) for j in range(1, ell)]
    full = mp.gamma(s) * mp.exp(-s * lc) * _bell(derivs)[ell]
    # int_0^1 t^(s-1) ln^ell(t) exp(-c t) dt, term by term
    term = mp.mpf(1)
    low = term / (s ** (ell + 1))
    k = 0
    tol = mp.mpf(10) ** (-mp.mp.dps - 5)
    while True:
        k += 1
        term *= -c / k
        add = term / (s + k) ** (ell + 1)
        low += add
        if k > c and abs(add) <= tol * max(abs(low), tol):
            break
    low *= (-1) ** ell * mp.factorial(ell)
    return full - low


def mp_j(n, ell, a, b, xi):
    """``J_{n,ell}(a, b, xi)`` (``ell = 0`` gives ``G_n``) in the current mp precision."""
    a, b = mp.mpf(a), mp.mpf(b)
    c = 1 / (a * b)
    xi = mp.mpmathify(xi)
    if ell == 0 and xi == int(mp.re(xi)) and mp.re(xi) >= 1:
        m = int(mp.re(xi))
        return b ** n * mp.fsum(mp.binomial(m - 1, k) * (a * b) ** k * mp.factorial(n + k - 1)
                                for k in range(m))
    total = mp.fsum(mp.binomial(n - 1, k) * (-1) ** (n - 1 - k) * incgamma_log_moment(xi + k, c, ell)
                    for k in range(n))
    return mp.exp(c) * total / a ** n


def working_dps(bundle, cond: float = 1.0, nu=0) -> int:
    """Digits needed so that the determinant keeps about 20 significant digits."""
    lam = np.asarray(bundle.lambda_small)
    sig = np.asarray(bundle.sigma_large)
    scale = bundle.eta_bar * float(lam.max()) * float(sig.max())
    loss = bundle.n_s * (bundle.n_s - 1) / 2 * max(0.0, math.log10(max(scale, 1.0)))
    cmax = 1.0 / (bundle.eta_bar * float(lam.min()) * float(sig.min()))
    loss += 2 * cmax / math.log(10)  # lower-series terms peak near exp(c); the result is ~exp(-c) of them
    loss += max(0.0, math.log10(max(cond, 1.0)))
    loss += abs(complex(nu).imag) * math.pi / 2 / math.log(10)  # Gamma(s) decays like exp(-pi |w| / 2)
    return int(30 + loss)


def mp_matrix(bundle, nu, order: int = 0):
    """The base matrix of ``bundle`` (or its ``order``-th derivative) as an mp.matrix."""
    n_s, n_l = bundle.n_s, bundle.n_l
    nu = mp.mpmathify(nu)
    lam = [mp.mpf(float(x)) for x in bundle.lambda_small]
    sig = [mp.mpf(float(x)) for x in bundle.sigma_large]
    eb = mp.mpf(bundle.eta_bar)
    if bundle.kind == "iid":
        hank = [mp_j(n_l - n_s + s + 1, order, eb, 1, nu + 1) for s in range(2 * n_s - 1)]
        return mp.matrix([[hank[i + j] for j in range(n_s)] for i in range(n_s)])
    m = mp.matrix(n_l, n_l)
    if order == 0:
        for i in range(n_l - n_s):
            for j in range(n_l):
                m[i, j] = sig[j] ** i
    for r in range(n_s):
        i = n_l - n_s + r
        for j in range(n_l):
            if bundle.kind == "correlated":
                m[i, j] = sig[j] ** (n_l - n_s - 1) * mp_j(1, order, eb * lam[r], sig[j], nu + n_s)
            else:
                ls = mp.log(sig[j])
                m[i, j] = mp.exp((nu + i) * ls) * ls ** order
    return m


def mp_log_prefactor(bundle, nu):
    nu = mp.mpmathify(nu)
    n_s = bundle.n_s
    lam = [mp.mpf(float(x)) for x in bundle.lambda_small]
    sig = [mp.mpf(float(x)) for x in bundle.sigma_large]
    eb = mp.mpf(bundle.eta_bar)

    def logvdm(x):
        return mp.fsum(mp.log(x[j] - x[i]) for i in range(len(x)) for j in range(i + 1, len(x)))

    if bundle.kind == "iid":
        return -mp.fsum(mp.loggamma(bundle.n_l - l + 1) + mp.loggamma(l) for l in range(1, n_s + 1))
    if bundle.kind == "correlated":
        lk = n_s * (n_s - 1) / 2 * mp.log(eb) + logvdm(lam) + logvdm(sig)
        return -mp.fsum(l * mp.log(nu + l) for l in range(1, n_s)) - lk
    lnorm = mp.fsum(mp.loggamma(l) for l in range(1, n_s + 1)) + logvdm(sig)
    return (nu * (n_s * mp.log(eb) + mp.fsum(mp.log(x) for x in lam))
            + mp.fsum(mp.loggamma(nu + l) for l in range(1, n_s + 1)) - lnorm)


def mp_log_cf(bundle, nu, dps: int | None = None) -> complex:
    """``ln phi(nu)`` evaluated in multiprecision and returned as a Python complex."""
    dps = working_dps(bundle, nu=nu) if dps is None else dps
    with mp.workdps(dps):
        d = mp.det(mp_matrix(bundle, nu, 0))
        if d == 0:
            raise NumericalDegeneracyError("singular CF matrix in extended precision")
        return complex(mp.log(d) + mp_log_prefactor(bundle, nu))


def _maxabs(m):
    return max(abs(m[i, j]) for i in range(m.rows) for j in range(m.cols))


def _mp_polymatrices(bundle, max_order, dps):
    with mp.workdps(dps):
        derivs = [mp_matrix(bundle, 0, k) for k in range(max_order + 1)]
        r0 = derivs[0]
        size = r0.rows
        inv = mp.inverse(r0)
        poly = [mp.eye(size)] + [inv * d for d in derivs[1:]]
        dim = []
        for n in range(1, max_order + 1):
            acc = poly[n].copy()
            for l in range(1, n):
                acc -= math.comb(n - 1, l - 1) * poly[n - l] * dim[l - 1]
            dim.append(acc)
        pj = [mp.eye(size)]
        for j in range(1, max_order):
            acc = mp.zeros(size, size)
            for i in range(j):
                acc -= math.comb(j, i) * pj[i] * poly[j - i]
            pj.append(acc)
        resid = mp.mpf(0)
        for k in range(max_order):
            alt = mp.zeros(size, size)
            for j in range(k + 1):
                alt += math.comb(k, j) * pj[j] * poly[k + 1 - j]
            scale = max(mp.mpf(1), _maxabs(dim[k]))
            resid = max(resid, _maxabs(alt - dim[k]) / scale)
        traces = [mp.fsum(dim[k][i, i] for i in range(size)) for k in range(max_order)]
        to_np = lambda m: np.array(m.tolist(), dtype=float)
        return ([to_np(p) for p in poly], [to_np(d) for d in dim], float(resid),
                [float(t) for t in traces])


def mp_polymatrices(bundle, max_order: int = 4, cond: float = 1.0, check: bool = True):
    """Polymatrices and dimatrix traces at ``nu = 0`` in multiprecision.

    With ``check`` the computation is repeated with 15 more digits and the
    larger of the two trace differences is returned as ``precision_error``.

    Returns
    -------
    poly, dimatrix_derivs, lemma1_residual, traces, precision_error
    """
    dps = working_dps(bundle, cond)
    poly, dim, resid, tr = _mp_polymatrices(bundle, max_order, dps)
    err = 0.0
    if check:
        _, _, _, tr2 = _mp_polymatrices(bundle, max_order, dps + 15)
        err = max(abs(x - y) / max(1.0, abs(y)) for x, y in zip(tr, tr2))
        tr = tr2
    return poly, dim, resid, tr, err
