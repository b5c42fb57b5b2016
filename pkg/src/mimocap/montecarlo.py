"""Monte Carlo oracle for the capacity distribution.

Channels are drawn as ``H = Psi_R^{1/2} H_uc Psi_T^{1/2}`` with Hermitian
square roots, and each realisation gives
``C = sum_k ln(1 + eta_bar e_k)`` over the eigenvalues of the smaller Gram
matrix.  The trial range is cut into fixed-size shards, each with its own
child of ``SeedSequence(seed)``, so results do not depend on how many
workers run the shards.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import ChannelConfig, CorrelationPair
from .errors import ConfigurationMismatchError, DomainError, NotPositiveDefiniteError

SHARD_SIZE = 8192


@dataclass(frozen=True)
class SimulationSpec:
    config: ChannelConfig
    pair: CorrelationPair
    n_trials: int
    seed: int

    def __post_init__(self):
        if int(self.n_trials) != self.n_trials or self.n_trials < 1:
            raise DomainError("n_trials must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if (self.pair.config.n_t, self.pair.config.n_r) != (self.config.n_t, self.config.n_r):
            raise ConfigurationMismatchError("correlation pair does not match the antenna counts")


def hermitian_sqrt(m) -> np.ndarray:
    """Principal square root of a Hermitian positive semi-definite matrix."""
    m = np.asarray(m)
    w, v = np.linalg.eigh(m)
    if w.min() < -1e-12:
        raise NotPositiveDefiniteError(f"negative eigenvalue {w.min():.3e}")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def draw_channels(rng: np.random.Generator, count: int, sqrt_t, sqrt_r) -> np.ndarray:
    """``count`` channel matrices of shape ``(n_r, n_t)``."""
    n_r, n_t = sqrt_r.shape[0], sqrt_t.shape[0]
    g = rng.standard_normal((count, n_r, n_t, 2))
    h_uc = (g[..., 0] + 1j * g[..., 1]) * math.sqrt(0.5)
    return sqrt_r @ h_uc @ sqrt_t


def capacity_from_channels(h, eta_bar: float, method: str = "eig") -> np.ndarray:
    """``ln det(I + eta_bar Theta)`` for a stack of channels.

    ``Theta`` is ``H H^H`` when ``n_r <= n_t`` and ``H^H H`` otherwise.
    ``method="det"`` uses a log-determinant instead of eigenvalues.
    """
    n_r, n_t = h.shape[-2:]
    theta = h @ h.conj().swapaxes(-1, -2) if n_r <= n_t else h.conj().swapaxes(-1, -2) @ h
    if method == "det":
        eye = np.eye(theta.shape[-1])
        sign, logdet = np.linalg.slogdet(eye + eta_bar * theta)
        return logdet
    ev = np.clip(np.linalg.eigvalsh(theta), 0.0, None)
    return np.sum(np.log1p(eta_bar * ev), axis=-1)


def _shard(args):
    seed_seq, count, sqrt_t, sqrt_r, eta_bar = args
    rng = np.random.default_rng(seed_seq)
    return capacity_from_channels(draw_channels(rng, count, sqrt_t, sqrt_r), eta_bar)


def sample_capacity(spec: SimulationSpec, workers: int | None = None) -> np.ndarray:
    """Capacity realisations in nats/s/Hz, reproducible for a given spec."""
    sqrt_t = hermitian_sqrt(spec.pair.psi_t)
    sqrt_r = hermitian_sqrt(spec.pair.psi_r)
    n_shards = -(-spec.n_trials // SHARD_SIZE)
    seeds = np.random.SeedSequence(int(spec.seed)).spawn(n_shards)
    sizes = [min(SHARD_SIZE, spec.n_trials - i * SHARD_SIZE) for i in range(n_shards)]
    jobs = [(s, c, sqrt_t, sqrt_r, spec.config.eta_bar) for s, c in zip(seeds, sizes)]
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(_shard, jobs))
    else:
        parts = [_shard(j) for j in jobs]
    return np.concatenate(parts)


def sample_channel_matrices(spec: SimulationSpec, count: int) -> np.ndarray:
    """Raw channel draws from the first shard's stream (for sampler checks)."""
    rng = np.random.default_rng(np.random.SeedSequence(int(spec.seed)).spawn(1)[0])
    return draw_channels(rng, count, hermitian_sqrt(spec.pair.psi_t), hermitian_sqrt(spec.pair.psi_r))


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

@dataclass
class MomentAccumulator:
    """Count, mean and central sums ``M2..M4`` with a pairwise merge."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    @classmethod
    def from_samples(cls, x) -> "MomentAccumulator":
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return cls()
        mu = float(x.mean())
        d = x - mu
        d2 = d * d
        return cls(x.size, mu, float(d2.sum()), float((d2 * d).sum()), float((d2 * d2).sum()))

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        na, nb = self.n, other.n
        n = na + nb
        delta = other.mean - self.mean
        mean = self.mean + delta * nb / n
        m2 = self.m2 + other.m2 + delta ** 2 * na * nb / n
        m3 = (self.m3 + other.m3 + delta ** 3 * na * nb * (na - nb) / n ** 2
              + 3 * delta * (na * other.m2 - nb * self.m2) / n)
        m4 = (self.m4 + other.m4
              + delta ** 4 * na * nb * (na * na - na * nb + nb * nb) / n ** 3
              + 6 * delta ** 2 * (na * na * other.m2 + nb * nb * self.m2) / n ** 2
              + 4 * delta * (na * other.m3 - nb * self.m3) / n)
        return MomentAccumulator(n, mean, m2, m3, m4)


def accumulate(x, chunk: int = 65536) -> MomentAccumulator:
    """Moments of ``x`` from chunk accumulators merged pairwise."""
    x = np.asarray(x, dtype=float)
    accs = [MomentAccumulator.from_samples(x[i:i + chunk]) for i in range(0, max(x.size, 1), chunk)]
    while len(accs) > 1:
        accs = [accs[i].merge(accs[i + 1]) if i + 1 < len(accs) else accs[i]
                for i in range(0, len(accs), 2)]
    return accs[0]


def _shape(x):
    acc = accumulate(x)
    if acc.n < 2 or acc.m2 == 0:
        return math.nan, math.nan
    m2 = acc.m2 / acc.n
    return (acc.m3 / acc.n) / m2 ** 1.5, (acc.m4 / acc.n) / m2 ** 2 - 3.0


@dataclass(frozen=True)
class EmpiricalStats:
    """Sample statistics with standard errors.

    Standard errors: ``s / sqrt(N)`` for the mean, ``sqrt((m4 - m2^2)/N)``
    for the variance, and a grouped jackknife (50 groups) for skewness and
    excess kurtosis.  ``flags`` lists statistics that could not be formed.
    """

    mean: float
    variance: float
    skewness: float
    kurtosis_excess: float
    standard_errors: dict
    histogram: tuple
    samples_retained: int
    flags: tuple = ()
    config: ChannelConfig | None = field(default=None, compare=False)

    def as_dict(self) -> dict:
        edges, counts = self.histogram
        return {"mean": self.mean, "variance": self.variance, "skewness": self.skewness,
                "kurtosis_excess": self.kurtosis_excess,
                "standard_errors": dict(self.standard_errors),
                "samples_retained": self.samples_retained, "flags": list(self.flags),
                "histogram": {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}}


def empirical_statistics(samples, bins: int = 100, groups: int = 50,
                         config: ChannelConfig | None = None) -> EmpiricalStats:
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise DomainError("no samples")
    flags = []
    acc = accumulate(x)
    mean = acc.mean
    se = {"mean": math.nan, "variance": math.nan, "skewness": math.nan, "kurtosis_excess": math.nan}
    variance = skew = kurt = math.nan
    if n >= 2:
        variance = acc.m2 / (n - 1)
        m2, m4 = acc.m2 / n, acc.m4 / n
        se["mean"] = math.sqrt(variance / n)
        se["variance"] = math.sqrt(max(m4 - m2 * m2, 0.0) / n)
        skew, kurt = _shape(x)
    else:
        flags.append("variance")
    if math.isnan(skew) and n >= 2:
        flags += ["skewness", "kurtosis_excess"]
    elif n >= 2:
        if n >= 2 * groups:
            parts = np.array_split(x, groups)
            loo = []
            for i in range(groups):
                rest = np.concatenate(parts[:i] + parts[i + 1:])
                loo.append(_shape(rest))
            loo = np.array(loo)
            fac = (groups - 1) / groups
            se["skewness"] = float(math.sqrt(fac * np.sum((loo[:, 0] - loo[:, 0].mean()) ** 2)))
            se["kurtosis_excess"] = float(math.sqrt(fac * np.sum((loo[:, 1] - loo[:, 1].mean()) ** 2)))
        else:
            se["skewness"] = math.sqrt(6.0 / n)
            se["kurtosis_excess"] = math.sqrt(24.0 / n)
    counts, edges = np.histogram(x, bins=bins)
    return EmpiricalStats(float(mean), float(variance), float(skew), float(kurt), se,
                          (edges, counts), n, tuple(flags), config)


def empirical_cf(samples, omegas, return_se: bool = False):
    """``(1/N) sum_k exp(j omega C_k)`` for each ``omega``.

    With ``return_se`` also returns the standard error of each value, which
    never exceeds ``1/sqrt(N)``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    if x.size == 0 or w.size == 0:
        raise DomainError("need samples and frequencies")
    vals = np.empty(w.size, dtype=complex)
    ses = np.empty(w.size)
    for i, om in enumerate(w):
        e = np.exp(1j * om * x)
        vals[i] = e.mean()
        ses[i] = math.sqrt(max(0.0, 1.0 - abs(vals[i]) ** 2) / x.size)
    if np.ndim(omegas) == 0:
        vals, ses = vals[0], ses[0]
    return (vals, ses) if return_se else vals


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonReport:
    z_scores: dict
    ks_distance: float
    ks_threshold: float
    quantiles: list
    z_threshold: float
    passed: bool

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.as_dict(), indent=2, sort_keys=True, default=float)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def bootstrap_quantile_se(samples, q: float, n_boot: int = 200, seed: int = 0) -> float:
    x = np.asarray(samples, dtype=float)
    rng = np.random.default_rng(seed)
    est = [np.quantile(x[rng.integers(0, x.size, x.size)], q) for _ in range(n_boot)]
    return float(np.std(est, ddof=1))


def compare_report(analytic, empirical: EmpiricalStats, grid=None, samples=None,
                   analytic_config: ChannelConfig | None = None, z_threshold: float = 3.0,
                   ks_alpha: float = 0.01, quantile_levels=(0.1,), outage=None,
                   seed: int = 0) -> ComparisonReport:
    """Compare analytic cumulants (and optionally a distribution grid) with
    Monte Carlo statistics.

    Parameters
    ----------
    analytic : CumulantSet
    empirical : EmpiricalStats
    grid : DistributionGrid, optional
        Enables the CDF sup-distance and quantile checks (needs ``samples``).
    analytic_config : ChannelConfig, optional
        Checked against ``empirical.config``; any difference raises
        :class:`ConfigurationMismatchError`.
    outage : callable, optional
        ``outage(q)`` returning the analytic quantile; defaults to
        :func:`mimocap.distribution.outage_capacity` on ``grid``.
    """
    if analytic_config is not None and empirical.config is not None and analytic_config != empirical.config:
        raise ConfigurationMismatchError(f"analytic {analytic_config} vs empirical {empirical.config}")
    k = np.asarray(analytic.kappa, dtype=float)
    z = {"mean": (empirical.mean - k[0]) / empirical.standard_errors["mean"]}
    if k.size > 1:
        z["variance"] = (empirical.variance - k[1]) / empirical.standard_errors["variance"]
    if k.size > 3 and not math.isnan(analytic.skewness):
        z["skewness"] = (empirical.skewness - analytic.skewness) / empirical.standard_errors["skewness"]
        z["kurtosis_excess"] = ((empirical.kurtosis_excess - analytic.kurtosis_excess)
                                / empirical.standard_errors["kurtosis_excess"])
    z = {key: float(v) for key, v in z.items()}
    ks = math.nan
    ks_thr = math.nan
    quants = []
    ok = all(abs(v) <= z_threshold for v in z.values())
    if grid is not None and samples is not None:
        from .distribution import outage_capacity

        x = np.sort(np.asarray(samples, dtype=float))
        n = x.size
        f = np.interp(x, grid.capacity_axis, grid.cdf, left=0.0, right=1.0)
        ecdf_hi = np.arange(1, n + 1) / n
        ecdf_lo = np.arange(0, n) / n
        ks = float(max(np.max(np.abs(ecdf_hi - f)), np.max(np.abs(f - ecdf_lo))))
        ks_thr = math.sqrt(-0.5 * math.log(ks_alpha / 2)) / math.sqrt(n)
        ok = ok and ks <= ks_thr
        outage = outage or (lambda q: outage_capacity(grid, q))
        for i, q in enumerate(quantile_levels):
            a = float(outage(q))
            e = float(np.quantile(x, q))
            se = bootstrap_quantile_se(x, q, seed=seed + i)
            zq = (e - a) / se if se > 0 else math.inf
            quants.append({"q": q, "analytic": a, "empirical": e, "bootstrap_se": se, "z": zq})
            ok = ok and abs(zq) <= z_threshold
    return ComparisonReport(z, ks, ks_thr, quants, z_threshold, bool(ok))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def samples_to_csv(samples, path=None, bits: bool = False) -> str:
    scale = 1 / math.log(2) if bits else 1.0
    buf = io.StringIO()
    buf.write("trial,capacity_bits\n" if bits else "trial,capacity_nats\n")
    for i, c in enumerate(np.asarray(samples) * scale):
        buf.write(f"{i},{c:.17g}\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def stats_to_json(stats: EmpiricalStats, path=None, extra: dict | None = None) -> str:
    d = stats.as_dict()
    if extra:
        d.update(extra)
    text = json.dumps(d, indent=2, sort_keys=True, default=float)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def simulate(config: ChannelConfig, pair: CorrelationPair, n_trials: int = 100_000, seed: int = 0,
             workers: int | None = None):
    """Convenience wrapper returning ``(samples, EmpiricalStats)``."""
    spec = SimulationSpec(config, pair, n_trials, seed)
    x = sample_capacity(spec, workers)
    return x, empirical_statistics(x, config=config)
