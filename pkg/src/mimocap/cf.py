"""Characteristic function of the capacity.

Three engines share one evaluable object, :class:`CapacityCF`:

``correlated``
    ``phi(nu) = Upsilon(nu) det Lambda(nu) / K_cor``, valid for distinct
    eigenvalues on both sides.
``iid``
    ``phi(nu) = det Omega(nu) / K_iid`` with a Hankel matrix of
    ``G_m(eta_bar, 1, nu + 1)`` entries.
``high_snr``
    Asymptotic form ``A prod Gamma(nu + l) det K(nu)`` built from the
    large-side spectrum and ``det Psi_S``.

``nu`` is the complex argument, ``nu = j omega`` on the Fourier axis.  All
normalising constants and determinants are handled in log space, with rows
scaled to unit maximum modulus before the LU factorisation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .channel import (DEFAULT_EPSILON, DEFAULT_GAP_THRESHOLD, ChannelConfig, CorrelationPair,
                      SpectrumReport, ensure_distinct, iid_pair)
from .errors import DomainError, NumericalDegeneracyError
from .special import g_values, j_values

COND_WARN = 1e12
KINDS = ("correlated", "iid", "high_snr")


class ConditioningWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CFMatrixBundle:
    """Everything needed to build the CF matrices of one configuration.

    ``log_norm`` is ``ln K_cor`` (correlated), ``ln K_iid`` (iid) or
    ``ln(prod Gamma(l) * V(sigma))`` (high_snr), where ``V`` is the
    Vandermonde product ``prod_{i<j} (sigma_j - sigma_i)``.
    """

    kind: str
    lambda_small: np.ndarray
    sigma_large: np.ndarray
    eta_bar: float
    n_s: int
    n_l: int
    log_norm: float
    log_det_psi_s: float = 0.0

    @property
    def k_cor(self) -> float:
        if self.kind != "correlated":
            raise AttributeError("k_cor only exists for the correlated kind")
        return math.exp(self.log_norm)

    @property
    def k_iid(self) -> float:
        if self.kind != "iid":
            raise AttributeError("k_iid only exists for the iid kind")
        return math.exp(self.log_norm)

    @property
    def size(self) -> int:
        return self.n_s if self.kind == "iid" else self.n_l


def _log_vandermonde(x):
    x = np.asarray(x, dtype=float)
    d = x[None, :] - x[:, None]
    iu = np.triu_indices(x.size, 1)
    diffs = d[iu]
    if np.any(diffs <= 0):
        raise NumericalDegeneracyError("eigenvalues must be strictly increasing")
    return float(np.sum(np.log(diffs)))


def log_k_cor(eta_bar, lam, sigma):
    n_s = len(lam)
    return n_s * (n_s - 1) / 2 * math.log(eta_bar) + _log_vandermonde(lam) + _log_vandermonde(sigma)


def log_k_iid(n_s, n_l):
    return math.fsum(math.lgamma(n_l - l + 1) + math.lgamma(l) for l in range(1, n_s + 1))


def make_bundle(kind: str, config: ChannelConfig, pair: CorrelationPair | None = None) -> CFMatrixBundle:
    """Assemble the bundle for ``kind`` (no regularisation is done here)."""
    if kind not in KINDS:
        raise DomainError(f"unknown CF kind {kind!r}")
    n_s, n_l, eb = config.n_s, config.n_l, config.eta_bar
    if pair is None:
        pair = iid_pair(config)
    lam = np.array(pair.lam, dtype=float)
    sig = np.array(pair.sigma, dtype=float)
    if kind == "iid":
        norm = log_k_iid(n_s, n_l)
    elif kind == "correlated":
        norm = log_k_cor(eb, lam, sig)
    else:
        norm = math.fsum(math.lgamma(l) for l in range(1, n_s + 1)) + _log_vandermonde(sig)
    return CFMatrixBundle(kind, lam, sig, eb, n_s, n_l, norm, float(np.sum(np.log(lam))))


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------

def _nu_array(nu):
    return np.atleast_1d(np.asarray(nu, dtype=complex))


def _lambda_stack(bundle, nus, order=0, method="auto"):
    """``Lambda^(order)(nu)`` for every ``nu`` in ``nus``; shape (K, n_l, n_l)."""
    n_s, n_l = bundle.n_s, bundle.n_l
    lam, sig = bundle.lambda_small, bundle.sigma_large
    nus = _nu_array(nus)
    real = np.all(nus.imag == 0)
    dtype = float if real else complex
    out = np.zeros((nus.size, n_l, n_l), dtype=dtype)
    if order == 0:
        out[:, : n_l - n_s, :] = sig[None, :] ** np.arange(n_l - n_s)[:, None]
    a = (bundle.eta_bar * lam)[None, :, None]
    b = sig[None, None, :]
    xi = (nus.real if real else nus)[:, None, None] + n_s
    vals, _, _ = j_values(1, order, a, b, xi, method=method)
    out[:, n_l - n_s:, :] = sig[None, None, :] ** (n_l - n_s - 1) * vals
    return out


def build_lambda_matrix(bundle: CFMatrixBundle, nu: complex, method: str = "auto") -> np.ndarray:
    """``Lambda(nu)``: Vandermonde rows ``sigma_j^(i-1)`` on top, and
    ``sigma_j^(n_l-n_s-1) G_1(eta_bar lambda_i, sigma_j, nu + n_s)`` below."""
    if bundle.kind != "correlated":
        raise DomainError("Lambda is only defined for the correlated kind")
    return _lambda_stack(bundle, nu, 0, method)[0]


def build_lambda_derivative(bundle: CFMatrixBundle, nu: complex, order: int,
                            method: str = "auto") -> np.ndarray:
    """``d^order Lambda / d nu^order``; the Vandermonde block is zero and the
    lower block uses ``J_{1,order}``."""
    if bundle.kind != "correlated":
        raise DomainError("Lambda is only defined for the correlated kind")
    if order < 1:
        raise DomainError("order must be >= 1")
    return _lambda_stack(bundle, nu, int(order), method)[0]


def _omega_stack(bundle, nus, order=0, method="auto"):
    n_s, n_l = bundle.n_s, bundle.n_l
    nus = _nu_array(nus)
    real = np.all(nus.imag == 0)
    xi = (nus.real if real else nus) + 1.0
    # Hankel: entry depends on i + j only
    hank = []
    for s in range(2 * n_s - 1):
        v, _, _ = j_values(n_l - n_s + s + 1, order, bundle.eta_bar, 1.0, xi, method=method)
        hank.append(v)
    hank = np.stack(hank, axis=-1)
    idx = np.add.outer(np.arange(n_s), np.arange(n_s))
    return hank[:, idx]


def build_omega_matrix(bundle: CFMatrixBundle, nu: complex, order: int = 0,
                       method: str = "auto") -> np.ndarray:
    """``Omega^(order)(nu)`` with entries
    ``J_{m,order}(eta_bar, 1, nu + 1)``, ``m = n_l - n_s + i + j - 1``."""
    if bundle.kind != "iid":
        raise DomainError("Omega is only defined for the iid kind")
    if order < 0:
        raise DomainError("order must be >= 0")
    return _omega_stack(bundle, nu, int(order), method)[0]


def _k_stack(bundle, nus, order=0):
    n_s, n_l = bundle.n_s, bundle.n_l
    sig = bundle.sigma_large
    nus = _nu_array(nus)
    real = np.all(nus.imag == 0)
    out = np.zeros((nus.size, n_l, n_l), dtype=float if real else complex)
    lsig = np.log(sig)
    if order == 0:
        out[:, : n_l - n_s, :] = sig[None, :] ** np.arange(n_l - n_s)[:, None]
    expo = np.arange(n_l - n_s, n_l)[None, :, None] + (nus.real if real else nus)[:, None, None]
    out[:, n_l - n_s:, :] = np.exp(expo * lsig[None, None, :]) * lsig[None, None, :] ** order
    return out


def build_k_matrix(bundle: CFMatrixBundle, nu: complex, order: int = 0) -> np.ndarray:
    """High-SNR matrix ``K(nu)``: rows ``sigma_j^(i-1)`` then
    ``sigma_j^(nu+i-1)``; derivatives multiply the lower rows by
    ``ln^order sigma_j`` and zero the upper ones."""
    if bundle.kind != "high_snr":
        raise DomainError("K is only defined for the high_snr kind")
    return _k_stack(bundle, nu, int(order))[0]


def matrix_stack(bundle: CFMatrixBundle, nus, order: int = 0, method: str = "auto") -> np.ndarray:
    """Base matrix (or its ``order``-th derivative) of ``bundle`` at each ``nu``."""
    if bundle.kind == "correlated":
        return _lambda_stack(bundle, nus, order, method)
    if bundle.kind == "iid":
        return _omega_stack(bundle, nus, order, method)
    return _k_stack(bundle, nus, order)


# ---------------------------------------------------------------------------
# determinants and the CF
# ---------------------------------------------------------------------------

def scaled_logdet(mats):
    """``(phase, log|det|)`` of a stack of matrices after row scaling."""
    mats = np.asarray(mats)
    scale = np.max(np.abs(mats), axis=-1, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    sign, logabs = np.linalg.slogdet(mats / scale)
    return sign, logabs + np.sum(np.log(scale[..., 0]), axis=-1)


def scaled_cond(mat):
    mat = np.asarray(mat)
    scale = np.max(np.abs(mat), axis=-1, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    return float(np.linalg.cond(mat / scale))


def log_prefactor(bundle: CFMatrixBundle, nus) -> np.ndarray:
    """Log of everything multiplying ``det(matrix)`` in ``phi(nu)``."""
    nus = _nu_array(nus)
    n_s = bundle.n_s
    if bundle.kind == "iid":
        return np.full(nus.shape, -bundle.log_norm, dtype=complex)
    if bundle.kind == "correlated":
        ups = np.zeros(nus.shape, dtype=complex)
        for l in range(1, n_s):
            ups -= l * np.log(nus + l)
        return ups - bundle.log_norm
    gam = np.zeros(nus.shape, dtype=complex)
    for l in range(1, n_s + 1):
        gam += special.loggamma(nus + l)
    return nus * (n_s * math.log(bundle.eta_bar) + bundle.log_det_psi_s) + gam - bundle.log_norm


@dataclass(frozen=True)
class CapacityCF:
    """Evaluable characteristic function ``phi_C``.

    Call with real ``omega`` (scalar or array) to get ``E[exp(j omega C)]``;
    :meth:`at_nu` takes the complex argument ``nu`` directly.
    """

    bundle: CFMatrixBundle
    cond_estimate_at_zero: float
    config: ChannelConfig | None = None
    spectrum_report: SpectrumReport | None = None
    method: str = field(default="auto", repr=False)

    @property
    def kind(self) -> str:
        return self.bundle.kind

    def log_at_nu(self, nu, chunk: int = 256) -> np.ndarray:
        """``ln phi(nu)`` (principal phase from the determinant sign)."""
        nus = _nu_array(nu)
        out = np.empty(nus.shape, dtype=complex)
        for start in range(0, nus.size, chunk):
            part = nus[start:start + chunk]
            mats = matrix_stack(self.bundle, part, 0, self.method)
            sign, logabs = scaled_logdet(mats)
            if np.any(~np.isfinite(logabs)):
                raise NumericalDegeneracyError("singular CF matrix", self.cond_estimate_at_zero)
            out[start:start + chunk] = logabs + np.log(sign.astype(complex)) + log_prefactor(self.bundle, part)
        return out

    def at_nu(self, nu):
        val = np.exp(self.log_at_nu(nu))
        return complex(val[0]) if np.ndim(nu) == 0 else val.reshape(np.shape(nu))

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        val = np.exp(self.log_at_nu(1j * omega.ravel()))
        return complex(val[0]) if omega.ndim == 0 else val.reshape(omega.shape)


def evaluate_cf(cf: CapacityCF, omega):
    """``phi_C(j omega)`` for real ``omega`` (scalar or array)."""
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise DomainError("omega must be finite")
    return cf(omega)


def _finish(bundle, config, report, method="auto"):
    m0 = matrix_stack(bundle, 0.0, 0, method)[0]
    cond = scaled_cond(m0)
    if not np.isfinite(cond):
        raise NumericalDegeneracyError("CF matrix singular at nu = 0", cond)
    if cond > COND_WARN:
        warnings.warn(f"CF matrix condition estimate {cond:.2e} at nu = 0; expect lost digits",
                      ConditioningWarning, stacklevel=3)
    return CapacityCF(bundle, cond, config, report, method)


def build_iid_cf(config: ChannelConfig, method: str = "auto") -> CapacityCF:
    return _finish(make_bundle("iid", config), config, None, method)


def build_correlated_cf(config: ChannelConfig, pair: CorrelationPair,
                        gap_threshold: float = DEFAULT_GAP_THRESHOLD,
                        epsilon: float = DEFAULT_EPSILON, auto_regularize: bool = True,
                        method: str = "auto") -> CapacityCF:
    """Exact CF for distinct spectra; clustered spectra are regularised first."""
    pair, report = ensure_distinct(pair.with_config(config), gap_threshold, epsilon, auto_regularize)
    return _finish(make_bundle("correlated", config, pair), config, report, method)


def build_high_snr_cf(config: ChannelConfig, pair: CorrelationPair | None = None,
                      gap_threshold: float = DEFAULT_GAP_THRESHOLD,
                      epsilon: float = DEFAULT_EPSILON,
                      auto_regularize: bool = True) -> CapacityCF:
    """High-SNR asymptotic CF.

    Only the large-side spectrum enters ``K``; when it is clustered it is
    regularised like the exact engine.  A scalar ``Psi_L`` is better served
    by :func:`mimocap.cumulants.cumulants_high_snr`, which has a closed form.
    """
    pair = iid_pair(config) if pair is None else pair.with_config(config)
    sig_gap = pair.min_rel_gap_large
    report = None
    if sig_gap < gap_threshold:
        if not auto_regularize:
            raise NumericalDegeneracyError("large-side eigenvalues are not distinct")
        pair, report = ensure_distinct(pair, gap_threshold, epsilon, auto_regularize)
    return _finish(make_bundle("high_snr", config, pair), config, report)


def build_cf(config: ChannelConfig, pair: CorrelationPair | None = None, kind: str = "auto",
             **kwargs) -> CapacityCF:
    """Pick the engine: ``iid`` when there is no correlation, else ``correlated``.

    ``kind`` may force ``"iid"``, ``"correlated"`` or ``"high_snr"``.
    """
    if kind == "auto":
        kind = "iid" if pair is None or pair.is_identity else "correlated"
    if kind == "iid":
        return build_iid_cf(config, method=kwargs.get("method", "auto"))
    if kind == "correlated":
        return build_correlated_cf(config, pair if pair is not None else iid_pair(config), **kwargs)
    if kind == "high_snr":
        return build_high_snr_cf(config, pair, **kwargs)
    raise DomainError(f"unknown CF kind {kind!r}")
