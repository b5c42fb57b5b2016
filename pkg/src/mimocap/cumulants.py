"""Cumulants and moments of the capacity from polymatrix traces.

For a base matrix ``R(nu)`` (``Omega``, ``Lambda`` or ``K``) the polymatrices
are ``R_[n] = R(0)^-1 R^(n)(0)`` and the dimatrix is ``R_[1](nu)``.  The
derivatives of ``ln det R`` at zero are ``tr R_[1]^(n-1)(0)``, and the
dimatrix derivatives follow from the polymatrices by the recurrence::

    R_[1]^(n-1) = R_[n] - sum_{l=1}^{n-1} C(n-1, l-1) R_[n-l] R_[1]^(l-1)

Each engine adds the derivatives of its own scalar prefactor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .cf import CapacityCF, CFMatrixBundle, build_high_snr_cf, make_bundle, matrix_stack
from .channel import (DEFAULT_EPSILON, DEFAULT_GAP_THRESHOLD, ChannelConfig, CorrelationPair,
                      ensure_distinct, iid_pair)
from .errors import DomainError, NumericalDegeneracyError
from .extended import mp_polymatrices
from .special import polygamma

SOURCES = ("exact_corr", "exact_iid", "high_snr", "monte_carlo")


@dataclass(frozen=True)
class PolymatrixSet:
    """Polymatrices ``poly[0..N]`` and dimatrix derivatives ``dimatrix_derivs[0..N-1]``.

    ``lemma1_residual`` is the largest entrywise gap between the dimatrix
    derivatives and an independent evaluation through derivatives of
    ``R^-1``; ``cond`` is the condition estimate of the equilibrated ``R(0)``.
    """

    base_kind: str
    poly: list
    dimatrix_derivs: list
    lemma1_residual: float
    cond: float
    precision: str = "double"
    precision_error: float = 0.0
    traces: list | None = None

    def lemma1_check(self) -> float:
        """Largest entrywise residual of
        ``poly[n] = sum_l C(n-1, l-1) poly[n-l] dimatrix_derivs[l-1]``."""
        worst = 0.0
        for n in range(1, len(self.poly)):
            acc = sum(math.comb(n - 1, l - 1) * self.poly[n - l] @ self.dimatrix_derivs[l - 1]
                      for l in range(1, n + 1))
            worst = max(worst, float(np.max(np.abs(acc - self.poly[n]))))
        return worst


def polymatrices_from_derivatives(derivs, base_kind: str = "custom") -> PolymatrixSet:
    """Build a :class:`PolymatrixSet` from ``[R(0), R'(0), ..., R^(N)(0)]``.

    ``R(0)`` is equilibrated by row and column scaling and factorised once.
    """
    derivs = [np.atleast_2d(np.asarray(d)) for d in derivs]
    r0 = derivs[0]
    if len(derivs) < 2:
        raise DomainError("need at least one derivative")
    rs = np.max(np.abs(r0), axis=1)
    if np.any(rs == 0):
        raise NumericalDegeneracyError("R(0) has a zero row", math.inf)
    a = r0 / rs[:, None]
    cs = np.max(np.abs(a), axis=0)
    if np.any(cs == 0):
        raise NumericalDegeneracyError("R(0) has a zero column", math.inf)
    a = a / cs[None, :]
    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > 1 / np.finfo(float).eps:
        raise NumericalDegeneracyError("R(0) is singular", cond)
    lu = linalg.lu_factor(a)
    size = r0.shape[0]
    # R^-1 X = C^-1 A^-1 S^-1 X  with  A = S^-1 R C^-1
    poly = [np.eye(size)]
    for d in derivs[1:]:
        poly.append(linalg.lu_solve(lu, d / rs[:, None]) / cs[:, None])
    n_max = len(poly) - 1
    dim = []
    for n in range(1, n_max + 1):
        acc = poly[n].copy()
        for l in range(1, n):
            acc = acc - math.comb(n - 1, l - 1) * poly[n - l] @ dim[l - 1]
        dim.append(acc)
    # independent route: P_j = (R^-1)^(j) R, D^(k) = sum_j C(k, j) P_j poly[k + 1 - j]
    pj = [np.eye(size)]
    for j in range(1, n_max):
        pj.append(-sum(math.comb(j, i) * pj[i] @ poly[j - i] for i in range(j)))
    resid = 0.0
    for k in range(n_max):
        alt = sum(math.comb(k, j) * pj[j] @ poly[k + 1 - j] for j in range(k + 1))
        scale = max(1.0, float(np.max(np.abs(dim[k]))))
        resid = max(resid, float(np.max(np.abs(alt - dim[k]))) / scale)
    return PolymatrixSet(base_kind, poly, dim, resid, cond)


_BASE_NAME = {"iid": "omega", "correlated": "lambda", "high_snr": "k_highsnr"}


EXTENDED_COND = 1e6
EXTENDED_RESIDUAL = 1e-10
PRECISIONS = ("auto", "double", "extended")


def polymatrices_from_bundle(bundle: CFMatrixBundle, max_order: int = 4,
                             precision: str = "auto") -> PolymatrixSet:
    """Polymatrices of the bundle's base matrix at ``nu = 0``.

    ``precision="auto"`` works in double precision unless the equilibrated
    ``R(0)`` has a condition estimate above 1e6 or the two dimatrix routes
    disagree by more than 1e-10; the multiprecision route of
    :mod:`mimocap.extended` is used then.
    """
    if max_order < 1:
        raise DomainError("max_order must be >= 1")
    if precision not in PRECISIONS:
        raise DomainError(f"precision must be one of {PRECISIONS}")
    base = _BASE_NAME[bundle.kind]
    cond = math.inf
    if precision != "extended":
        derivs = [matrix_stack(bundle, 0.0, k)[0] for k in range(max_order + 1)]
        try:
            pset = polymatrices_from_derivatives(derivs, base)
        except NumericalDegeneracyError:
            if precision == "double":
                raise
        else:
            if precision == "double" or (pset.cond <= EXTENDED_COND
                                         and pset.lemma1_residual <= EXTENDED_RESIDUAL):
                return pset
            cond = pset.cond
    poly, dim, resid, traces, err = mp_polymatrices(bundle, max_order,
                                                    cond if math.isfinite(cond) else 1e16)
    return PolymatrixSet(base, poly, dim, resid, cond, "extended", err, traces)


def compute_polymatrices(kind: str, config: ChannelConfig, pair: CorrelationPair | None = None,
                         max_order: int = 4) -> PolymatrixSet:
    """Polymatrices of ``Omega`` (``kind="omega"``), ``Lambda`` (``"lambda"``)
    or the high-SNR ``K`` (``"k_highsnr"``) at ``nu = 0``."""
    engine = {"omega": "iid", "lambda": "correlated", "k_highsnr": "high_snr"}.get(kind, kind)
    if engine not in _BASE_NAME:
        raise DomainError(f"unknown polymatrix base {kind!r}")
    pair = iid_pair(config) if pair is None else pair.with_config(config)
    if engine == "correlated":
        pair, _ = ensure_distinct(pair)
    return polymatrices_from_bundle(make_bundle(engine, config, pair), max_order)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def moments_from_cumulants(kappa):
    """Raw moments ``m_1..m_N`` and central moments ``mu_1..mu_N``.

    ``m_n = sum_l C(n-1, l-1) m_{n-l} kappa_l`` with ``m_0 = 1``, and
    ``mu_n = sum_l C(n, l) m_{n-l} (-m_1)^l``.
    """
    kappa = [float(k) for k in kappa]
    if not kappa:
        raise DomainError("need at least one cumulant")
    n_max = len(kappa)
    m = [1.0]
    for n in range(1, n_max + 1):
        m.append(math.fsum(math.comb(n - 1, l - 1) * m[n - l] * kappa[l - 1] for l in range(1, n + 1)))
    # central moments from the shifted cumulants (kappa_1 -> 0) avoid cancellation
    shifted = [0.0] + kappa[1:]
    mu = [1.0]
    for n in range(1, n_max + 1):
        mu.append(math.fsum(math.comb(n - 1, l - 1) * mu[n - l] * shifted[l - 1] for l in range(1, n + 1)))
    return np.array(m[1:]), np.array(mu[1:])


def central_from_raw(raw):
    """``mu_n = sum_{l=0}^{n} C(n, l) m_{n-l} (-m_1)^l`` for ``raw = m_1..m_N``."""
    m = [1.0] + [float(x) for x in raw]
    m1 = m[1]
    return np.array([math.fsum(math.comb(n, l) * m[n - l] * (-m1) ** l for l in range(n + 1))
                     for n in range(1, len(m))])


def cumulants_from_moments(raw):
    """Inverse of the raw-moment recurrence: ``kappa_1..kappa_N`` from ``m_1..m_N``."""
    m = [1.0] + [float(x) for x in raw]
    kappa = []
    for n in range(1, len(m)):
        acc = m[n] - math.fsum(math.comb(n - 1, l - 1) * m[n - l] * kappa[l - 1] for l in range(1, n))
        kappa.append(acc)
    return np.array(kappa)


@dataclass(frozen=True)
class CumulantSet:
    """Cumulants with derived moments and shape statistics.

    ``raw_moments`` and ``central_moments`` are indexed from order one, so
    ``central_moments[1]`` is the variance.  ``skewness`` and
    ``kurtosis_excess`` are NaN when fewer than 3 or 4 cumulants exist.
    """

    kappa: np.ndarray
    raw_moments: np.ndarray
    central_moments: np.ndarray
    skewness: float
    kurtosis_excess: float
    source: str

    @classmethod
    def from_kappa(cls, kappa, source: str) -> "CumulantSet":
        if source not in SOURCES:
            raise DomainError(f"unknown source {source!r}")
        kappa = np.asarray(kappa, dtype=float)
        raw, central = moments_from_cumulants(kappa)
        k2 = kappa[1] if kappa.size > 1 else math.nan
        skew = kappa[2] / k2 ** 1.5 if kappa.size > 2 and k2 > 0 else math.nan
        kurt = kappa[3] / k2 ** 2 if kappa.size > 3 and k2 > 0 else math.nan
        return cls(kappa, raw, central, float(skew), float(kurt), source)

    @property
    def mean(self) -> float:
        return float(self.kappa[0])

    @property
    def variance(self) -> float:
        return float(self.kappa[1])

    def as_dict(self) -> dict:
        d = {f"kappa{i + 1}": float(k) for i, k in enumerate(self.kappa)}
        d.update(mean=self.mean, variance=self.variance if self.kappa.size > 1 else math.nan,
                 skewness=self.skewness, kurtosis_excess=self.kurtosis_excess)
        return d


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------

def _traces(pset):
    if pset.traces is not None:
        return np.array(pset.traces)
    return np.array([float(np.real(np.trace(d))) for d in pset.dimatrix_derivs])


def _upsilon_terms(n_s, max_order):
    # derivatives of ln prod_l (nu + l)^-l at zero
    return np.array([(-1) ** n * math.factorial(n - 1) * math.fsum(l ** (1 - n) for l in range(1, n_s))
                     for n in range(1, max_order + 1)])


def cumulants_from_bundle(bundle: CFMatrixBundle, max_order: int = 4,
                          precision: str = "auto") -> CumulantSet:
    """Cumulants for any CF bundle from its trace formula."""
    pset = polymatrices_from_bundle(bundle, max_order, precision)
    tr = _traces(pset)
    if bundle.kind == "iid":
        return CumulantSet.from_kappa(tr, "exact_iid")
    if bundle.kind == "correlated":
        return CumulantSet.from_kappa(tr + _upsilon_terms(bundle.n_s, max_order), "exact_corr")
    kappa = tr + np.array([math.fsum(polygamma(n - 1, l) for l in range(1, bundle.n_s + 1))
                           for n in range(1, max_order + 1)])
    kappa[0] += bundle.n_s * math.log(bundle.eta_bar) + bundle.log_det_psi_s
    return CumulantSet.from_kappa(kappa, "high_snr")


def cumulants_iid(config: ChannelConfig, max_order: int = 4, precision: str = "auto") -> CumulantSet:
    """Exact cumulants of the uncorrelated channel, ``kappa_n = tr Omega_[1]^(n-1)(0)``."""
    return cumulants_from_bundle(make_bundle("iid", config), max_order, precision)


def cumulants_correlated(config: ChannelConfig, pair: CorrelationPair, max_order: int = 4,
                         precision: str = "auto", **regularize) -> CumulantSet:
    """Exact cumulants with correlation on both sides.

    ``kappa_n = tr Lambda_[1]^(n-1)(0) + (-1)^n (n-1)! sum_{l<n_s} l^(1-n)``.
    Clustered spectra are regularised as in :func:`mimocap.channel.ensure_distinct`;
    ``regularize`` accepts ``gap_threshold``, ``epsilon`` and ``auto_regularize``.  ``Lambda(0)`` becomes nearly singular
    at high SNR; ``precision="auto"`` then switches to multiprecision.
    """
    pair, _ = ensure_distinct(pair.with_config(config), regularize.get("gap_threshold", DEFAULT_GAP_THRESHOLD),
                              regularize.get("epsilon", DEFAULT_EPSILON),
                              regularize.get("auto_regularize", True))
    return cumulants_from_bundle(make_bundle("correlated", config, pair), max_order, precision)


def _is_scalar_spectrum(eigs, tol=1e-12):
    return eigs.size == 1 or float(np.max(np.abs(eigs - eigs.mean()))) <= tol * float(eigs.mean())


def cumulants_high_snr(config: ChannelConfig, pair: CorrelationPair | None = None,
                       max_order: int = 4, precision: str = "auto", **regularize) -> CumulantSet:
    """High-SNR asymptotic cumulants.

    The general case uses ``tr K_[1]^(n-1)(0)`` plus polygamma sums.  Two
    cases need no ``K``: square arrays, where correlation only shifts the
    mean by ``ln det(Psi_T Psi_R)``, and a scalar large-side matrix ``s I``,
    where ``kappa_n`` is ``sum_l psi^(n-1)(n_l - n_s + l)`` plus the mean
    shift ``n_s ln s``.
    """
    pair = iid_pair(config) if pair is None else pair.with_config(config)
    n_s, n_l = config.n_s, config.n_l
    sig = np.asarray(pair.sigma, dtype=float)
    if n_s == n_l or _is_scalar_spectrum(sig):
        kappa = np.array([math.fsum(polygamma(n - 1, n_l - n_s + l) for l in range(1, n_s + 1))
                          for n in range(1, max_order + 1)])
        shift = float(np.sum(np.log(sig))) if n_s == n_l else n_s * float(np.log(sig.mean()))
        kappa[0] += log_det_prefactor(config, pair) + shift
        return CumulantSet.from_kappa(kappa, "high_snr")
    cf = build_high_snr_cf(config, pair, **regularize)
    return cumulants_from_bundle(cf.bundle, max_order, precision)


def cumulants_for(config: ChannelConfig, pair: CorrelationPair | None = None, max_order: int = 4,
                  high_snr: bool = False, precision: str = "auto", **regularize) -> CumulantSet:
    """Dispatch to the appropriate engine (uncorrelated pairs use the iid engine)."""
    if high_snr:
        return cumulants_high_snr(config, pair, max_order, precision, **regularize)
    if pair is None or pair.is_identity:
        return cumulants_iid(config, max_order, precision)
    return cumulants_correlated(config, pair, max_order, precision, **regularize)


def cumulants_from_cf(cf: CapacityCF, max_order: int = 4, precision: str = "auto") -> CumulantSet:
    return cumulants_from_bundle(cf.bundle, max_order, precision)


def high_snr_shape_bounds(n: int):
    """Square-array high-SNR ``(beta_1, beta_2)`` from polygamma sums."""
    k = [math.fsum(polygamma(o, l) for l in range(1, n + 1)) for o in (1, 2, 3)]
    return k[1] / k[0] ** 1.5, k[2] / k[0] ** 2


def log_det_prefactor(config: ChannelConfig, pair: CorrelationPair) -> float:
    """``n_s ln eta_bar + ln det Psi_S``, the high-SNR mean offset."""
    return config.n_s * math.log(config.eta_bar) + float(np.sum(np.log(pair.lam)))


__all__ = [
    "PolymatrixSet", "CumulantSet", "compute_polymatrices", "polymatrices_from_derivatives",
    "polymatrices_from_bundle", "cumulants_iid", "cumulants_correlated", "cumulants_high_snr",
    "cumulants_for", "cumulants_from_bundle", "cumulants_from_cf", "moments_from_cumulants",
    "cumulants_from_moments", "central_from_raw", "high_snr_shape_bounds",
]
