"""Channel configuration, Kronecker correlation structure and matrix files.

The channel is ``H = Psi_R^{1/2} H_uc Psi_T^{1/2}`` with ``H_uc`` i.i.d.
standard complex Gaussian.  Everything downstream only needs the antenna
counts, the SNR and the two eigenvalue spectra, ordered by which side has
fewer antennas.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (DimensionMismatchError, DomainError, NotHermitianError,
                     NotPositiveDefiniteError, ParseError, ValidationError)

HERMITIAN_TOL = 1e-12
UNIT_DIAGONAL_TOL = 1e-12
DEFAULT_GAP_THRESHOLD = 1e-9
DEFAULT_EPSILON = 1e-6


class SpectrumWarning(UserWarning):
    """Emitted when a spectrum is perturbed or a matrix is only loosely valid."""


@dataclass(frozen=True)
class ChannelConfig:
    """Antenna counts and average SNR.

    Parameters
    ----------
    n_t, n_r : int
        Transmit and receive antenna counts.
    snr_db : float
        Average SNR ``eta`` in dB.  Power is split equally over the transmit
        antennas, so the per-antenna SNR is ``eta_bar = eta / n_t``.
    """

    n_t: int
    n_r: int
    snr_db: float

    def __post_init__(self):
        for name in ("n_t", "n_r"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DomainError(f"{name} must be a positive integer, got {v}")
            object.__setattr__(self, name, int(v))
        if not math.isfinite(self.snr_db):
            raise DomainError("snr_db must be finite")
        object.__setattr__(self, "snr_db", float(self.snr_db))

    @property
    def eta(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def eta_bar(self) -> float:
        return self.eta / self.n_t

    @property
    def n_s(self) -> int:
        return min(self.n_t, self.n_r)

    @property
    def n_l(self) -> int:
        return max(self.n_t, self.n_r)

    @property
    def small_side(self) -> str:
        """``"r"`` if the receive side is the small one (ties go to ``"r"``)."""
        return "r" if self.n_r <= self.n_t else "t"

    def with_snr(self, snr_db: float) -> "ChannelConfig":
        return replace(self, snr_db=snr_db)


def relative_gaps(eigs) -> np.ndarray:
    """Adjacent gaps of an ascending spectrum, relative to the larger value."""
    eigs = np.asarray(eigs, dtype=float)
    if eigs.size < 2:
        return np.empty(0)
    return np.diff(eigs) / np.abs(eigs[1:])


def _min_gap(eigs):
    g = relative_gaps(eigs)
    return float(g.min()) if g.size else math.inf


@dataclass(frozen=True)
class CorrelationPair:
    """Validated transmit/receive correlation matrices with their spectra.

    ``lam`` holds the ascending eigenvalues of ``psi_s`` (the side with
    ``n_s`` antennas) and ``sigma`` those of ``psi_l``.  Eigenvectors are kept
    so that a regularised spectrum can be mapped back to matrices.
    """

    config: ChannelConfig
    psi_t: np.ndarray
    psi_r: np.ndarray
    eig_t: np.ndarray
    vec_t: np.ndarray = field(repr=False)
    eig_r: np.ndarray = field(repr=False)
    vec_r: np.ndarray = field(repr=False)

    @property
    def psi_s(self) -> np.ndarray:
        return self.psi_r if self.config.small_side == "r" else self.psi_t

    @property
    def psi_l(self) -> np.ndarray:
        return self.psi_t if self.config.small_side == "r" else self.psi_r

    @property
    def lam(self) -> np.ndarray:
        return self.eig_r if self.config.small_side == "r" else self.eig_t

    @property
    def sigma(self) -> np.ndarray:
        return self.eig_t if self.config.small_side == "r" else self.eig_r

    @property
    def min_rel_gap_small(self) -> float:
        return _min_gap(self.lam)

    @property
    def min_rel_gap_large(self) -> float:
        return _min_gap(self.sigma)

    def is_degenerate(self, threshold: float = DEFAULT_GAP_THRESHOLD) -> bool:
        """True if either spectrum has two eigenvalues closer than ``threshold``."""
        return self.min_rel_gap_small < threshold or self.min_rel_gap_large < threshold

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.psi_t, np.eye(self.config.n_t))
                    and np.array_equal(self.psi_r, np.eye(self.config.n_r)))

    def with_config(self, config: ChannelConfig) -> "CorrelationPair":
        """Same matrices under another SNR (antenna counts must match)."""
        if (config.n_t, config.n_r) != (self.config.n_t, self.config.n_r):
            raise DimensionMismatchError("antenna counts differ")
        return replace(self, config=config)


@dataclass(frozen=True)
class SpectrumReport:
    min_rel_gap_small: float
    min_rel_gap_large: float
    regularized: bool
    epsilon_used: float


def make_exponential_correlation(n: int, rho: float) -> np.ndarray:
    """Exponential correlation matrix ``[rho^|i-j|]`` of size ``n``.

    >>> make_exponential_correlation(3, 0.5)
    array([[1.  , 0.5 , 0.25],
           [0.5 , 1.  , 0.5 ],
           [0.25, 0.5 , 1.  ]])
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    if not (0.0 <= rho < 1.0):
        raise DomainError(f"rho must lie in [0, 1), got {rho}")
    idx = np.arange(int(n))
    lag = np.abs(idx[:, None] - idx[None, :])
    return np.where(lag == 0, 1.0, float(rho) ** lag)


def _check_matrix(name, m, n, require_unit_diagonal):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {m.shape}")
    if m.shape[0] != n:
        raise DimensionMismatchError(f"{name} must be {n}x{n}, got {m.shape[0]}x{m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    m = m.astype(complex) if np.iscomplexobj(m) else m.astype(float)
    asym = float(np.max(np.abs(m - m.conj().T)))
    if asym > HERMITIAN_TOL:
        raise NotHermitianError(f"{name} is not Hermitian (max |A - A^H| = {asym:.3e})")
    m = 0.5 * (m + m.conj().T)
    if np.iscomplexobj(m) and not np.any(m.imag):
        m = m.real.copy()
    diag_dev = float(np.max(np.abs(np.diag(m).real - 1.0)))
    if diag_dev > UNIT_DIAGONAL_TOL:
        msg = f"{name} diagonal deviates from 1 by {diag_dev:.3e}"
        if require_unit_diagonal:
            raise ValidationError(msg + " (pass require_unit_diagonal=False to accept)")
        warnings.warn(msg, SpectrumWarning, stacklevel=3)
    eig, vec = np.linalg.eigh(m)
    if eig[0] <= 0:
        raise NotPositiveDefiniteError(f"{name} is not positive definite (min eigenvalue {eig[0]:.3e})")
    m.setflags(write=False)
    eig.setflags(write=False)
    vec.setflags(write=False)
    return m, eig, vec


def validate_and_decompose(psi_t, psi_r, config: ChannelConfig,
                           require_unit_diagonal: bool = True) -> CorrelationPair:
    """Validate both correlation matrices and compute their spectra.

    Raises
    ------
    DimensionMismatchError, NotHermitianError, NotPositiveDefiniteError
        For the corresponding defects.  A diagonal away from one raises
        :class:`ValidationError` unless ``require_unit_diagonal`` is False, in
        which case only a warning is issued.
    """
    mt, et, vt = _check_matrix("psi_t", psi_t, config.n_t, require_unit_diagonal)
    mr, er, vr = _check_matrix("psi_r", psi_r, config.n_r, require_unit_diagonal)
    return CorrelationPair(config, mt, mr, et, vt, er, vr)


def iid_pair(config: ChannelConfig) -> CorrelationPair:
    return validate_and_decompose(np.eye(config.n_t), np.eye(config.n_r), config)


def exponential_pair(config: ChannelConfig, rho_t: float, rho_r: float) -> CorrelationPair:
    return validate_and_decompose(make_exponential_correlation(config.n_t, rho_t),
                                  make_exponential_correlation(config.n_r, rho_r), config)


def _spread(eigs, epsilon, threshold):
    eigs = np.array(eigs, dtype=float)
    gaps = relative_gaps(eigs)
    if not np.any(gaps < threshold):
        return eigs, False
    out = eigs.copy()
    start = 0
    for k in range(1, eigs.size + 1):
        if k == eigs.size or gaps[k - 1] >= threshold:
            size = k - start
            if size > 1:
                mu = eigs[start:k].mean()
                offs = np.arange(size) / (size - 1) - 0.5
                out[start:k] = mu + epsilon * mu * offs
            start = k
    return out, True


def _rebuild(vec, eig):
    m = (vec * eig) @ vec.conj().T
    return 0.5 * (m + m.conj().T)


def regularize_spectrum(pair: CorrelationPair, epsilon: float = DEFAULT_EPSILON,
                        threshold: float | None = None):
    """Split clustered eigenvalues so that the exact engines apply.

    Every run of adjacent eigenvalues whose relative gaps fall below
    ``threshold`` (default ``epsilon``) is replaced by ``m`` equally spaced
    values ``mu * (1 + epsilon * (k/(m-1) - 1/2))`` around the cluster mean
    ``mu``.  The cluster sum, hence the trace, is unchanged, and the matrices
    are rebuilt from the original eigenvectors.

    Returns
    -------
    (CorrelationPair, SpectrumReport)
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    threshold = epsilon if threshold is None else threshold
    et, ct = _spread(pair.eig_t, epsilon, threshold)
    er, cr = _spread(pair.eig_r, epsilon, threshold)
    if not (ct or cr):
        return pair, SpectrumReport(pair.min_rel_gap_small, pair.min_rel_gap_large, False, 0.0)
    mt = _rebuild(pair.vec_t, et) if ct else pair.psi_t
    mr = _rebuild(pair.vec_r, er) if cr else pair.psi_r
    for a in (mt, mr, et, er):
        if isinstance(a, np.ndarray) and a.flags.writeable:
            a.setflags(write=False)
    new = replace(pair, psi_t=mt, psi_r=mr, eig_t=et, eig_r=er)
    return new, SpectrumReport(new.min_rel_gap_small, new.min_rel_gap_large, True, float(epsilon))


def ensure_distinct(pair: CorrelationPair, threshold: float = DEFAULT_GAP_THRESHOLD,
                    epsilon: float = DEFAULT_EPSILON, auto_regularize: bool = True):
    """Return a pair usable by the exact correlated engine.

    Spectra with a relative gap under ``threshold`` are regularised with
    ``epsilon`` (and a :class:`SpectrumWarning`) unless ``auto_regularize`` is
    False, in which case a :class:`~mimocap.errors.NumericalDegeneracyError`
    is raised.
    """
    from .errors import NumericalDegeneracyError

    if not pair.is_degenerate(threshold):
        return pair, SpectrumReport(pair.min_rel_gap_small, pair.min_rel_gap_large, False, 0.0)
    if not auto_regularize:
        raise NumericalDegeneracyError(
            f"eigenvalue gap below {threshold:g}; enable regularisation or use distinct spectra")
    warnings.warn(f"clustered eigenvalues regularised with epsilon={epsilon:g}",
                  SpectrumWarning, stacklevel=3)
    return regularize_spectrum(pair, epsilon, threshold=max(threshold, epsilon))


# ---------------------------------------------------------------------------
# correlation matrix files
# ---------------------------------------------------------------------------

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX_RE = re.compile(rf"^(?:(?P<re>{_NUM})(?P<im>[+-](?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)i"
                         rf"|(?P<real>{_NUM})|(?P<pure>{_NUM})i)$")
_HEADER_RE = re.compile(r"^CORRMAT\s+v1\s+(\d+)\s+(\d+)$")


def parse_complex(token: str, lineno: int | None = None) -> complex:
    """Parse ``a``, ``a+bi``, ``a-bi`` or ``bi``."""
    m = _COMPLEX_RE.match(token)
    if m is None:
        raise ParseError(f"bad complex literal {token!r}", lineno)
    if m.group("real") is not None:
        return complex(float(m.group("real")), 0.0)
    if m.group("pure") is not None:
        return complex(0.0, float(m.group("pure")))
    return complex(float(m.group("re")), float(m.group("im")))


def format_complex(z: complex) -> str:
    z = complex(z)
    if z.imag == 0:
        return f"{z.real:.17g}"
    return f"{z.real:.17g}{z.imag:+.17g}i"


def loads_correlation(text: str):
    """Parse the text of a correlation file; see :func:`ingest_correlation_file`."""
    header = None
    blocks: list[list[list[complex]]] = []
    current: list[list[complex]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        is_comment = raw.lstrip().startswith("#")
        line = raw.split("#", 1)[0].strip()
        if header is None:
            if not line:
                continue
            m = _HEADER_RE.match(line)
            if m is None:
                raise ParseError("missing 'CORRMAT v1 <n_t> <n_r>' header", lineno)
            header = (int(m.group(1)), int(m.group(2)), lineno)
            if header[0] < 1 or header[1] < 1:
                raise ParseError("antenna counts must be positive", lineno)
            continue
        if not line:
            if not is_comment and current:
                blocks.append(current)
                current = []
            continue
        current.append([(parse_complex(tok, lineno), lineno) for tok in line.split()])
    if current:
        blocks.append(current)
    if header is None:
        raise ParseError("missing 'CORRMAT v1 <n_t> <n_r>' header", 1)
    n_t, n_r, hline = header
    if len(blocks) != 2:
        raise ParseError(f"expected 2 matrix blocks separated by a blank line, found {len(blocks)}",
                         hline)
    mats = []
    for name, n, block in (("psi_t", n_t, blocks[0]), ("psi_r", n_r, blocks[1])):
        if len(block) != n:
            raise ParseError(f"{name} needs {n} rows, found {len(block)}", block[0][0][1])
        for row in block:
            if len(row) != n:
                raise ParseError(f"{name} row has {len(row)} entries, expected {n}", row[0][1])
        mats.append(np.array([[v for v, _ in row] for row in block], dtype=complex))
    return mats[0], mats[1]


def ingest_correlation_file(path):
    """Read ``(psi_t, psi_r)`` from a ``CORRMAT v1`` text file.

    Format: a header line ``CORRMAT v1 <n_t> <n_r>``, then ``n_t`` rows of
    ``Psi_T``, a blank line and ``n_r`` rows of ``Psi_R``.  Entries are
    whitespace separated complex literals (``0.5``, ``0.5+0.3i``,
    ``0.5-0.3i``).  ``#`` starts a comment.  Errors carry the line number.
    """
    return loads_correlation(Path(path).read_text())


def dumps_correlation(psi_t, psi_r, comment: str | None = None) -> str:
    psi_t, psi_r = np.asarray(psi_t), np.asarray(psi_r)
    lines = []
    if comment:
        lines += [f"# {c}" for c in comment.splitlines()]
    lines.append(f"CORRMAT v1 {psi_t.shape[0]} {psi_r.shape[0]}")
    for k, m in enumerate((psi_t, psi_r)):
        if k:
            lines.append("")
        lines += [" ".join(format_complex(z) for z in row) for row in m]
    return "\n".join(lines) + "\n"


def write_correlation_file(path, psi_t, psi_r, comment: str | None = None) -> None:
    """Write matrices in ``CORRMAT v1`` format with 17 significant digits."""
    Path(path).write_text(dumps_correlation(psi_t, psi_r, comment))
