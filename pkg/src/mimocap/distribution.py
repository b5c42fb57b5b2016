"""PDF, CDF and outage capacity by inverting the characteristic function.

Sampling ``phi`` at ``omega_k = k h`` with ``h = 2 pi / L`` gives the Fourier
coefficients of the density folded with period ``L``.  The window
``[c_min, c_max]`` holds essentially all of the mass and ``L = 2 (c_max -
c_min)`` so the fold never overlaps itself.  On that window::

    f(x) = (1/L) [1 + 2 Re sum_k phi_k exp(-j omega_k x)]
    F(x) = 1/2 + (x - m_1)/L - (1/pi) sum_k Im[phi_k exp(-j omega_k x)] / k

The second line is the trapezoidal rule applied to the Gil-Pelaez integral
with the exact limit ``m_1 - x`` on the first panel.  ``fft_grid`` evaluates
both sums with one FFT each, anchoring the CDF at ``c_min`` instead of at the
mean; ``gil_pelaez`` sums the CDF series directly.
"""

from __future__ import annotations

import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize

from .cf import CapacityCF
from .errors import BracketingError, DomainError, OutageRangeError, TruncationError

TAIL_TARGET = 1e-8
TAIL_LIMIT = 1e-6
MAX_TERMS = 1 << 20
MASS_LIMIT = 0.005
METHODS = ("fft_grid", "gil_pelaez")


class RippleWarning(UserWarning):
    pass


@dataclass(frozen=True)
class InversionSpec:
    """Settings for :func:`invert_cf`.

    ``None`` for ``omega_max``, ``c_min`` or ``c_max`` means choose
    automatically: the window is ``[max(0, k1 - 10 sqrt(k2)), k1 + 8 sqrt(k2)]``
    and ``omega_max`` grows until ``|phi| < 1e-8``.
    """

    omega_max: float | None = None
    n_points: int = 4096
    c_min: float | None = None
    c_max: float | None = None
    method: str = "fft_grid"

    def __post_init__(self):
        if self.omega_max is not None and not self.omega_max > 0:
            raise DomainError("omega_max must be positive")
        n = self.n_points
        if int(n) != n or n < 256 or (int(n) & (int(n) - 1)):
            raise DomainError("n_points must be a power of two >= 256")
        if self.c_min is not None and self.c_max is not None and not self.c_min < self.c_max:
            raise DomainError("c_min must be below c_max")
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}")


@dataclass(frozen=True)
class DistributionGrid:
    """Sampled density and distribution function on ``capacity_axis``.

    ``tail_mass`` estimates the probability outside the window and
    ``ripple`` the largest negative density before clipping, relative to the
    peak.  The CF samples are kept so that :meth:`cdf_at` can evaluate the
    distribution function anywhere in the window.
    """

    capacity_axis: np.ndarray
    pdf: np.ndarray
    cdf: np.ndarray
    spec: InversionSpec
    tail_mass: float
    ripple: float
    mean_hint: float
    omega_step: float = field(repr=False)
    phi: np.ndarray = field(repr=False)

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega_step

    def cdf_at(self, x):
        """Gil-Pelaez series for ``F(x)`` (scalar or array)."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        k = np.arange(1, self.phi.size + 1)
        out = np.empty(flat.shape)
        step = max(1, 2 ** 22 // max(k.size, 1))
        for s in range(0, flat.size, step):
            xs = flat[s:s + step]
            ph = np.exp(-1j * self.omega_step * np.outer(xs, k))
            series = (ph * self.phi).imag @ (1.0 / k)
            out[s:s + step] = 0.5 + (xs - self.mean_hint) / self.period - series / math.pi
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    def to_csv(self, path=None, bits: bool = False) -> str:
        """CSV with header ``capacity_nats,pdf,cdf`` (``capacity_bits`` with
        ``bits``).  Returns the text and writes it to ``path`` when given."""
        scale = 1 / math.log(2) if bits else 1.0
        buf = io.StringIO()
        buf.write("capacity_bits,pdf,cdf\n" if bits else "capacity_nats,pdf,cdf\n")
        for c, p, f in zip(self.capacity_axis * scale, self.pdf / scale, self.cdf):
            buf.write(f"{c:.10g},{p:.10g},{f:.10g}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _evaluate(cf, omegas, workers):
    if workers and workers > 1 and omegas.size > 4096:
        parts = np.array_split(omegas, workers)
        with ThreadPoolExecutor(workers) as pool:
            return np.concatenate(list(pool.map(cf, parts)))
    return np.asarray(cf(omegas), dtype=complex)


def _sample_cf(cf, h, omega_max, workers):
    """``phi(k h)`` for ``k = 1..K``; adaptive in ``K`` unless ``omega_max`` is set."""
    if omega_max is not None:
        kmax = max(1, int(math.ceil(omega_max / h)))
        phi = _evaluate(cf, h * np.arange(1, kmax + 1), workers)
        if abs(phi[-1]) > TAIL_LIMIT:
            raise TruncationError(f"|phi| = {abs(phi[-1]):.2e} at omega_max = {omega_max:g}; "
                                  "increase omega_max")
        return phi
    chunks = []
    k0, size = 1, 1024
    while True:
        ks = np.arange(k0, k0 + size)
        part = _evaluate(cf, h * ks, workers)
        chunks.append(part)
        tail = float(np.max(np.abs(part[-min(size, 64):])))
        if tail < TAIL_TARGET:
            break
        k0 += size
        if k0 > MAX_TERMS:
            if tail > TAIL_LIMIT:
                raise TruncationError(f"CF has not decayed below {TAIL_LIMIT:g} after "
                                      f"{MAX_TERMS} terms (|phi| = {tail:.2e})")
            break
        size = min(2 * size, 1 << 16)
    phi = np.concatenate(chunks)
    # drop the negligible tail
    big = np.flatnonzero(np.abs(phi) >= TAIL_TARGET * 1e-2)
    return phi[: big[-1] + 1] if big.size else phi[:1]


def _window(kappa1, kappa2, spec, nonnegative):
    sd = math.sqrt(max(kappa2, 0.0))
    lo = kappa1 - 10 * sd if spec.c_min is None else spec.c_min
    if nonnegative and spec.c_min is None:
        lo = max(0.0, lo)
    hi = kappa1 + 8 * sd if spec.c_max is None else spec.c_max
    if not hi > lo:
        raise DomainError("empty capacity window")
    return lo, hi


def invert_cf(cf, spec: InversionSpec | None = None, cumulants=None, workers: int | None = None,
              nonnegative: bool | None = None) -> DistributionGrid:
    """Recover the capacity PDF and CDF on a grid.

    Parameters
    ----------
    cf : CapacityCF or callable
        ``cf(omega)`` must accept an array of real frequencies.
    spec : InversionSpec, optional
    cumulants : CumulantSet or (kappa1, kappa2), optional
        Needed for a plain callable; computed from the CF bundle otherwise.
    workers : int, optional
        Threads used for CF evaluation.
    nonnegative : bool, optional
        Clamp the automatic window at zero (default: True for a CapacityCF).

    Raises
    ------
    TruncationError
        The CF is still above 1e-6 at the last frequency used.
    BracketingError
        More than 0.5 % of the probability lies outside the window.
    """
    spec = spec or InversionSpec()
    if cumulants is None:
        if not isinstance(cf, CapacityCF):
            raise DomainError("pass cumulants when inverting a plain callable")
        from .cumulants import cumulants_from_cf

        cumulants = cumulants_from_cf(cf, 2)
    if hasattr(cumulants, "kappa"):
        k1, k2 = float(cumulants.kappa[0]), float(cumulants.kappa[1])
    else:
        k1, k2 = float(cumulants[0]), float(cumulants[1])
    if nonnegative is None:
        nonnegative = isinstance(cf, CapacityCF)
    lo, hi = _window(k1, k2, spec, nonnegative)
    length = 2 * (hi - lo)
    h = 2 * math.pi / length
    phi = _sample_cf(cf, h, spec.omega_max, workers)
    n_fft = 2 * spec.n_points
    k = np.arange(1, phi.size + 1)
    coef = phi * np.exp(-1j * h * k * lo)
    folded = np.zeros(n_fft, dtype=complex)
    np.add.at(folded, k % n_fft, coef)
    folded_k = np.zeros(n_fft, dtype=complex)
    np.add.at(folded_k, k % n_fft, coef / k)
    axis = lo + (hi - lo) * np.arange(spec.n_points + 1) / spec.n_points
    m = np.arange(spec.n_points + 1)
    pdf = (1.0 + 2.0 * np.fft.fft(folded)[m].real) / length

    grid = DistributionGrid(axis, pdf, pdf, spec, 0.0, 0.0, k1, h, phi)
    f_lo, f_hi = grid.cdf_at(np.array([lo, hi]))
    tail = max(f_lo, 0.0) + max(1.0 - f_hi, 0.0)
    if tail > MASS_LIMIT:
        raise BracketingError(f"window [{lo:.4g}, {hi:.4g}] misses {tail:.2e} of the probability")
    if spec.method == "fft_grid":
        anchored = (np.fft.fft(folded_k)[m] - np.sum(coef / k)).imag
        cdf = f_lo + (axis - lo) / length - anchored / math.pi
    else:
        cdf = grid.cdf_at(axis)

    peak = float(pdf.max())
    ripple = float(max(0.0, -pdf.min()) / peak) if peak > 0 else 0.0
    if ripple > 1e-4:
        warnings.warn(f"negative density ripple {ripple:.1e} of the peak clipped", RippleWarning,
                      stacklevel=2)
    pdf = np.clip(pdf, 0.0, None)
    cdf = np.clip(np.maximum.accumulate(cdf), 0.0, 1.0)
    eff = replace(spec, omega_max=float(h * phi.size), c_min=lo, c_max=hi)
    return DistributionGrid(axis, pdf, cdf, eff, float(tail), ripple, k1, h, phi)


def outage_capacity(source, q: float, spec: InversionSpec | None = None,
                    xtol: float = 1e-6) -> float:
    """Capacity ``x`` with ``F(x) = q``.

    ``source`` is a :class:`DistributionGrid` or a CF (inverted with
    ``spec``).  The grid CDF gives a bracket that is refined with Brent's
    method on the Gil-Pelaez series.
    """
    if not 0.0 < q < 1.0:
        raise OutageRangeError(f"outage probability must lie in (0, 1), got {q}")
    grid = source if isinstance(source, DistributionGrid) else invert_cf(source, spec)
    cdf, axis = grid.cdf, grid.capacity_axis
    if not cdf[0] < q < cdf[-1]:
        raise OutageRangeError(f"q = {q:g} outside the resolved CDF range "
                               f"[{cdf[0]:.3g}, {cdf[-1]:.6g}]")
    i = int(np.searchsorted(cdf, q))
    a, b = axis[max(i - 1, 0)], axis[min(i, axis.size - 1)]
    fa, fb = grid.cdf_at(a) - q, grid.cdf_at(b) - q
    step = axis[1] - axis[0]
    while fa > 0 and a > axis[0]:
        a = max(axis[0], a - step)
        fa = grid.cdf_at(a) - q
    while fb < 0 and b < axis[-1]:
        b = min(axis[-1], b + step)
        fb = grid.cdf_at(b) - q
    if fa * fb > 0:
        return float(np.interp(q, cdf, axis))
    return float(optimize.brentq(lambda x: grid.cdf_at(x) - q, a, b, xtol=xtol))


def moments_from_grid(grid: DistributionGrid):
    """Trapezoidal mean and variance of the sampled density."""
    x, p = grid.capacity_axis, grid.pdf
    mass = integrate.trapezoid(p, x)
    mean = integrate.trapezoid(x * p, x) / mass
    var = integrate.trapezoid((x - mean) ** 2 * p, x) / mass
    return float(mean), float(var)


def gil_pelaez_cdf(cf, x: float, mean: float | None = None, omega_max: float | None = None) -> float:
    """``F(x) = 1/2 - (1/pi) int_0^inf Im[phi(w) exp(-j w x)] / w dw`` by
    adaptive quadrature (slow; intended as an independent check)."""
    def integrand(w):
        if w == 0.0:
            return (mean - x) if mean is not None else 0.0
        return (cf(np.array([w]))[0] * np.exp(-1j * w * x)).imag / w

    upper = omega_max if omega_max is not None else 200.0
    val, _ = integrate.quad(integrand, 0.0, upper, limit=2000, epsabs=1e-11, epsrel=1e-10)
    return 0.5 - val / math.pi
