"""Special functions and the integral families behind the capacity matrices.

Two integrals drive every matrix entry used by the analytic engines::

    G_n(a, b, xi)      = int_0^inf (1 + a x)^(xi - 1) x^(n - 1) exp(-x / b) dx
    J_{n,l}(a, b, xi)  = int_0^inf (1 + a x)^(xi - 1) ln^l(1 + a x) x^(n - 1) exp(-x / b) dx

``J`` is the ``l``-th derivative of ``G`` with respect to ``xi``.  Each has a
closed-form route and an independent quadrature route; :class:`EvalResult`
records which one produced a value together with an error estimate.

The vectorised helpers :func:`g_values` and :func:`j_values` are what the
engines call.  :func:`integral_G` and :func:`integral_J` are the scalar,
validated entry points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061
APERY = 1.2020569031595942854  # zeta(3)

_EPS = np.finfo(float).eps
# closed forms are trusted only while their cancellation estimate stays below this
_CLOSED_FORM_RTOL = 1e-12
_QUAD_RTOL = 1e-11
LAGUERRE_LEVELS = (64, 128, 256)
LEGENDRE_LEVELS = (64, 128, 256, 512, 1024, 2048)


# ---------------------------------------------------------------------------
# elementary special functions
# ---------------------------------------------------------------------------

def _is_int(z):
    return np.isfinite(z) and float(z) == math.floor(z)


def _polygamma_int(order, z):
    # -gamma + H_(z-1) for the digamma; Hurwitz zeta (exact constants at z = 1)
    # for higher orders, where subtracting the finite sum from zeta(p) cancels
    z = int(z)
    if order == 0:
        return -EULER_GAMMA + math.fsum(1.0 / k for k in range(1, z))
    p = order + 1
    if z == 1 and order <= 3:
        head = (math.pi ** 2 / 6, APERY, math.pi ** 4 / 90)[order - 1]
    else:
        head = float(special.zeta(p, z))
    return (-1) ** (order + 1) * math.factorial(order) * head


def polygamma(order, z):
    """Polygamma function ``psi^(order)(z)``.

    Positive integers up to 50 use ``-gamma + sum_{k<z} 1/k`` for the
    digamma and ``(-1)^(m+1) m! zeta(m+1, z)`` otherwise, with the exact
    constants ``pi^2/6``, ``zeta(3)`` and ``pi^4/90`` at ``z = 1``.  Other
    arguments go to :func:`scipy.special.polygamma`.  Accepts scalars or
    arrays.
    """
    if order < 0 or int(order) != order:
        raise DomainError(f"polygamma order must be a non-negative integer, got {order}")
    order = int(order)
    arr = np.asarray(z, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("polygamma is only provided for z > 0")
    if arr.ndim == 0:
        zf = float(arr)
        if _is_int(zf) and zf <= 50:
            return _polygamma_int(order, zf)
        return float(special.polygamma(order, zf))
    out = np.asarray(special.polygamma(order, arr), dtype=float)
    small = (arr == np.floor(arr)) & (arr <= 50)
    if np.any(small):
        flat = out.reshape(-1)
        for idx in np.flatnonzero(small.reshape(-1)):
            flat[idx] = _polygamma_int(order, arr.reshape(-1)[idx])
    return out


def exp_integral_e1(x):
    """Exponential integral ``E1(x) = int_x^inf exp(-t)/t dt`` for ``x > 0``."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("E1 is only defined here for x > 0")
    out = special.exp1(arr)
    return float(out) if arr.ndim == 0 else out


def upper_incomplete_gamma(alpha, x):
    """Complementary incomplete gamma ``Gamma(alpha, x)`` for real ``alpha``.

    Positive ``alpha`` goes through the regularised scipy function.  For
    ``alpha <= 0`` the downward recurrence
    ``Gamma(a, x) = (Gamma(a + 1, x) - x^a e^-x) / a`` is run from a seed in
    ``[0, 1)``; the seed at zero is ``E1(x)``.  Past ``|alpha| = 30`` the
    recurrence loses too many digits and direct quadrature is used instead.
    """
    x = float(x)
    alpha = float(alpha)
    if x <= 0:
        raise DomainError("Gamma(alpha, x) requires x > 0")
    if alpha > 0:
        return float(special.gammaincc(alpha, x) * special.gamma(alpha))
    if -alpha > 30:
        val, _ = integrate.quad(lambda t: t ** (alpha - 1) * math.exp(-t), x, np.inf,
                                epsabs=0, epsrel=1e-13, limit=200)
        return val
    steps = math.ceil(-alpha)
    a0 = alpha + steps
    if a0 == 0:
        g = exp_integral_e1(x)
    else:
        g = float(special.gammaincc(a0, x) * special.gamma(a0))
    a = a0
    for _ in range(steps):
        a -= 1.0
        g = (g - x ** a * math.exp(-x)) / a
    return g


# ---------------------------------------------------------------------------
# shared numerical pieces
# ---------------------------------------------------------------------------

def _factorial(k):
    if k <= 20:
        return float(math.factorial(k))
    return math.exp(math.lgamma(k + 1))


def _binom(n, k):
    if n <= 60:
        return float(math.comb(n, k))
    return math.exp(math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1))


def complete_bell(xs):
    """Complete Bell polynomials ``B_0 .. B_L`` of the sequence ``xs[0..L-1]``.

    ``xs`` is a list of equally shaped arrays (the successive derivatives of
    ``g``); ``B_k`` is the ``k``-th derivative of ``exp(g)`` divided by
    ``exp(g)``.
    """
    bell = [np.ones_like(np.asarray(xs[0], dtype=complex if np.iscomplexobj(xs[0]) else float))
            if len(xs) else 1.0]
    for n in range(len(xs)):
        acc = 0.0
        for k in range(n + 1):
            acc = acc + math.comb(n, k) * bell[n - k] * xs[k]
        bell.append(acc)
    return bell


def _lower_series(alpha, c):
    """``S(alpha) = sum_m c^m / (alpha)_(m+1)`` and the sum of |terms|.

    ``exp(c) (ab)^alpha gamma(alpha, c) = S`` with ``c = 1/(ab)``.
    """
    alpha = np.asarray(alpha)
    term = 1.0 / alpha
    total = term.copy()
    abs_total = np.abs(term)
    for m in range(1, 4000):
        term = term * (c / (alpha + m))
        total = total + term
        aterm = np.abs(term)
        abs_total = abs_total + aterm
        if np.all(aterm <= 1e-17 * np.abs(total)) and np.all(m > c):
            break
    return total, abs_total


# ---------------------------------------------------------------------------
# quadrature route
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _laguerre(n):
    x, w = special.roots_laguerre(n)
    return x, w


@lru_cache(maxsize=None)
def _legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _quad_laguerre(n, ell, a, b, xi, nodes):
    # x = b t, weight exp(-t)
    t, w = _laguerre(nodes)
    ab = (a * b)[:, None]
    lg = np.log1p(ab * t)
    f = np.exp((xi[:, None] - 1.0) * lg) * t ** (n - 1)
    if ell:
        f = f * lg ** ell
    return b ** n * (f @ w)


def _quad_logmap(n, ell, a, b, xi, nodes):
    # y = ln(1 + a x): the integrand is smooth in y and any oscillation of
    # (1 + a x)^(i w) becomes a plain exp(i w y)
    u, w = _legendre(nodes)
    ab = a * b
    tmax = 60.0 + 4.0 * (n + np.maximum(xi.real, 1.0) + ell)
    ymax = np.log1p(ab * tmax)
    y = 0.5 * ymax[:, None] * (u + 1.0)
    t = np.expm1(y) / ab[:, None]
    f = np.exp(xi[:, None] * y - t) * t ** (n - 1)
    if ell:
        f = f * y ** ell
    return b ** n / ab * 0.5 * ymax * (f @ w)


def _quadrature(n, ell, a, b, xi):
    """Vectorised quadrature of ``J_{n,ell}`` (``ell = 0`` gives ``G``).

    Real ``xi`` with ``1/(ab) >= 1`` uses Gauss-Laguerre in ``t = x/b``;
    everything else uses Gauss-Legendre after ``y = ln(1 + a x)``.  Node
    counts escalate until two successive levels agree to 1e-11 relative.
    Returns ``(value, est_abs_error)``.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    xi = np.asarray(xi, dtype=complex).ravel()
    val = np.zeros(a.shape, dtype=complex)
    err = np.zeros(a.shape, dtype=float)
    use_lag = (xi.imag == 0) & (1.0 / (a * b) >= 1.0)
    for mask, levels, rule in ((use_lag, LAGUERRE_LEVELS, _quad_laguerre),
                               (~use_lag, LEGENDRE_LEVELS, _quad_logmap)):
        idx = np.flatnonzero(mask)
        for start in range(0, idx.size, 512):
            chunk = idx[start:start + 512]
            pending = chunk
            prev = rule(n, ell, a[pending], b[pending], xi[pending], levels[0])
            for level in levels[1:]:
                cur = rule(n, ell, a[pending], b[pending], xi[pending], level)
                diff = np.abs(cur - prev)
                done = diff <= _QUAD_RTOL * np.maximum(np.abs(cur), 1e-300)
                val[pending] = cur
                err[pending] = np.maximum(diff, 4 * _EPS * np.abs(cur))
                pending, prev = pending[~done], cur[~done]
                if pending.size == 0:
                    break
    return val, err


# ---------------------------------------------------------------------------
# closed-form routes
# ---------------------------------------------------------------------------

def _g_finite_sum(n, a, b, m):
    # xi = m a positive integer: polynomial expansion of (1 + a x)^(m - 1)
    ab = a * b
    total = np.zeros(np.shape(ab))
    for k in range(m):
        total = total + _binom(m - 1, k) * ab ** k * _factorial(n + k - 1)
    val = b ** n * total
    return val, 4 * _EPS * (m + n) * np.abs(val)


def _g_incgamma(n, a, b, xi):
    """Alternate incomplete-gamma form of ``G_n``; needs ``Re xi > 0``."""
    ab = a * b
    c = 1.0 / ab
    lab = np.log(ab)
    total = 0.0
    scale = 0.0
    for k in range(n):
        alpha = xi + k
        big = np.exp(c + alpha * lab + special.loggamma(alpha))
        ser, ser_abs = _lower_series(alpha, c)
        coef = _binom(n - 1, k) * (-1.0) ** (n - k - 1)
        total = total + coef * (big - ser)
        scale = scale + abs(coef) * (np.abs(big) + ser_abs)
    an = a ** (-n)
    val = an * total
    err = 8 * _EPS * (n + 4) * an * scale
    return val, err


def _j_incgamma(n, ell, a, b, xi):
    """Incomplete-gamma expansion of ``J_{n,ell}`` for real ``xi > 0``.

    Each term is the ``ell``-th parameter derivative of
    ``(ab)^alpha Gamma(alpha, 1/(ab))``, written as the derivative of
    ``(ab)^alpha Gamma(alpha)`` (Bell polynomial in polygamma values) minus the
    derivative of the lower part ``int_0^1 u^(alpha-1) exp(-u/(ab)) du``.
    """
    ab = a * b
    c = 1.0 / ab
    lab = np.log(ab)
    ec = np.exp(c)
    total = 0.0
    scale = 0.0
    for k in range(n):
        alpha = xi + k
        derivs = [lab + special.polygamma(0, alpha)]
        derivs += [special.polygamma(j, alpha) for j in range(1, ell)]
        bell = complete_bell(derivs)[ell]
        bell_abs = complete_bell([np.abs(d) for d in derivs])[ell]
        base = np.exp(c + alpha * lab + special.gammaln(alpha))
        upper = base * bell
        # lower part: alternating series in c
        term = np.ones_like(c)
        low = term / alpha ** (ell + 1)
        low_abs = np.abs(low)
        for m in range(1, 400):
            term = term * (-c / m)
            add = term / (alpha + m) ** (ell + 1)
            low = low + add
            low_abs = low_abs + np.abs(add)
            if np.all(np.abs(add) <= 1e-18 * np.abs(low)) and np.all(m > c):
                break
        lower = ec * (-1.0) ** ell * _factorial(ell) * low
        coef = _binom(n - 1, k) * (-1.0) ** (n - k - 1)
        total = total + coef * (upper - lower)
        scale = scale + abs(coef) * (base * bell_abs * (ell + 2) + ec * _factorial(ell) * low_abs)
    an = a ** (-n)
    return an * total, 8 * _EPS * (n + 4) * an * scale


# ---------------------------------------------------------------------------
# vectorised dispatchers
# ---------------------------------------------------------------------------

METHOD_CLOSED = 0
METHOD_QUAD = 1
_METHOD_NAMES = {METHOD_CLOSED: "closed_form", METHOD_QUAD: "quadrature"}


def _broadcast(a, b, xi):
    a, b, xi = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                                   np.asarray(xi))
    return a, b, xi


def _closed_form_mp(n, ell, a, b, xi):
    """The incomplete-gamma closed form in multiprecision.

    Used by ``method="closed_form"`` where the double-precision evaluation
    fails its cancellation test; the working precision grows with
    ``1/(ab)``, which sets how badly the lower series cancels.
    """
    import mpmath as mp

    from .extended import mp_j

    val = np.empty(a.shape, dtype=complex)
    for k in range(a.size):
        c = 1.0 / (a[k] * b[k])
        # the lower series peaks near exp(c) and the result is ~exp(-c) smaller than its parts
        dps = 30 + int(2 * c / math.log(10)) + int(abs(xi[k].imag) * math.pi / 2 / math.log(10))
        with mp.workdps(dps):
            val[k] = complex(mp_j(n, ell, a[k], b[k], complex(xi[k]) if xi[k].imag else xi[k].real))
    return val, np.abs(val) * _EPS


def g_values(n, a, b, xi, method="auto"):
    """Vectorised ``G_n(a, b, xi)``.

    Returns ``(value, est_abs_error, method_code)`` arrays with the broadcast
    shape of the inputs.  ``value`` is real when every ``xi`` is real.

    Dispatch for ``method="auto"``: positive-integer ``xi`` uses the finite
    binomial sum; otherwise the incomplete-gamma form is tried and kept when its
    cancellation estimate is below 1e-12 relative; the rest goes to quadrature.
    ``method="closed_form"`` instead re-evaluates the rejected entries with the
    same closed form in multiprecision, so that it stays a route independent
    of quadrature; ``method="quadrature"`` never uses a closed form.
    """
    n = int(n)
    a, b, xi = _broadcast(a, b, xi)
    shape = a.shape
    a, b, xi = a.ravel(), b.ravel(), xi.ravel()
    xic = xi.astype(complex)
    val = np.zeros(a.shape, dtype=complex)
    err = np.full(a.shape, np.inf)
    code = np.full(a.shape, METHOD_QUAD, dtype=np.int8)

    if method in ("auto", "closed_form"):
        re = xic.real
        is_int = (xic.imag == 0) & (np.abs(re - np.round(re)) <= 1e-12) & (np.round(re) >= 1)
        for m in np.unique(np.round(re[is_int]).astype(int)):
            sel = is_int & (np.round(re).astype(int) == m)
            v, e = _g_finite_sum(n, a[sel], b[sel], int(m))
            val[sel], err[sel], code[sel] = v, e, METHOD_CLOSED
        rest = ~is_int & (re > 0)
        if np.any(rest):
            with np.errstate(over="ignore", invalid="ignore"):
                # exp(1/(ab)) can overflow; such values fail the finiteness test
                v, e = _g_incgamma(n, a[rest], b[rest], xic[rest])
            ok = np.isfinite(v) & (e <= _CLOSED_FORM_RTOL * np.abs(v))
            idx = np.flatnonzero(rest)[ok]
            val[idx], err[idx], code[idx] = v[ok], e[ok], METHOD_CLOSED
    todo = code == METHOD_QUAD
    if method == "closed_form" and np.any(todo):
        if np.any(xic.real[todo] <= 0):
            raise DomainError("no closed form available for Re(xi) <= 0")
        val[todo], err[todo] = _closed_form_mp(n, 0, a[todo], b[todo], xic[todo])
        code[todo] = METHOD_CLOSED
        todo[:] = False
    if np.any(todo):
        v, e = _quadrature(n, 0, a[todo], b[todo], xic[todo])
        val[todo], err[todo] = v, e
    if np.all(xic.imag == 0):
        val = val.real
    return val.reshape(shape), err.reshape(shape), code.reshape(shape)


def j_values(n, ell, a, b, xi, method="auto"):
    """Vectorised ``J_{n,ell}(a, b, xi)``; same return convention as
    :func:`g_values`.

    Real ``xi > 0`` tries the incomplete-gamma/Leibniz expansion first.
    Complex ``xi`` uses quadrature unless ``method="closed_form"``, which
    falls back to the multiprecision closed form wherever the double
    evaluation is rejected.
    """
    n, ell = int(n), int(ell)
    if ell == 0:
        return g_values(n, a, b, xi, method=method)
    a, b, xi = _broadcast(a, b, xi)
    shape = a.shape
    a, b, xi = a.ravel(), b.ravel(), xi.ravel()
    xic = xi.astype(complex)
    val = np.zeros(a.shape, dtype=complex)
    err = np.full(a.shape, np.inf)
    code = np.full(a.shape, METHOD_QUAD, dtype=np.int8)
    real = (xic.imag == 0) & (xic.real > 0)
    if method in ("auto", "closed_form") and np.any(real):
        with np.errstate(over="ignore", invalid="ignore"):
            v, e = _j_incgamma(n, ell, a[real], b[real], xic.real[real])
        ok = np.isfinite(v) & (e <= _CLOSED_FORM_RTOL * np.abs(v))
        idx = np.flatnonzero(real)[ok]
        val[idx], err[idx], code[idx] = v[ok], e[ok], METHOD_CLOSED
    todo = code == METHOD_QUAD
    if method == "closed_form" and np.any(todo):
        if np.any(xic.real[todo] <= 0):
            raise DomainError("closed form for J needs Re(xi) > 0")
        val[todo], err[todo] = _closed_form_mp(n, ell, a[todo], b[todo], xic[todo])
        code[todo] = METHOD_CLOSED
        todo[:] = False
    if np.any(todo):
        v, e = _quadrature(n, ell, a[todo], b[todo], xic[todo])
        val[todo], err[todo] = v, e
    if np.all(xic.imag == 0):
        val = val.real
    return val.reshape(shape), err.reshape(shape), code.reshape(shape)


# ---------------------------------------------------------------------------
# validated scalar interface
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegralParams:
    """Parameters of ``G_n(a, b, xi)`` / ``J_{n,ell}(a, b, xi)``."""

    a: float
    b: float
    n: int
    xi: complex = 1.0
    ell: int = 0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError(f"a and b must be positive, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if int(self.ell) != self.ell or self.ell < 0:
            raise DomainError(f"ell must be a non-negative integer, got {self.ell}")


@dataclass(frozen=True)
class EvalResult:
    value: complex
    method: str
    est_abs_error: float


def _scalar(res, xi):
    v, e, c = res
    value = complex(v.reshape(-1)[0])
    if complex(xi).imag == 0:
        value = value.real
    return EvalResult(value, _METHOD_NAMES[int(c.reshape(-1)[0])], float(e.reshape(-1)[0]))


def integral_G(p: IntegralParams, method: str = "auto") -> EvalResult:
    """Evaluate ``G_n(a, b, xi)`` with automatic route selection.

    >>> integral_G(IntegralParams(a=2.0, b=0.5, n=3, xi=1)).value
    0.25
    """
    return _scalar(g_values(p.n, p.a, p.b, p.xi, method=method), p.xi)


def integral_J(p: IntegralParams, method: str = "auto") -> EvalResult:
    """Evaluate ``J_{n,ell}(a, b, xi)``; requires ``ell >= 1``."""
    if p.ell < 1:
        raise DomainError("J needs ell >= 1; use integral_G for ell = 0")
    return _scalar(j_values(p.n, p.ell, p.a, p.b, p.xi, method=method), p.xi)
