"""Tabular outputs shared by the command line and library users.

Each function returns a list of flat dicts; :func:`rows_to_csv` and
:func:`rows_to_json` render them.  Capacities are in nats unless
``bits=True``, in which case the ``n``-th cumulant is scaled by
``(1/ln 2)^n`` and the shape statistics are unchanged.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .channel import ChannelConfig, CorrelationPair, exponential_pair, iid_pair
from .cumulants import CumulantSet, cumulants_for

STAT_COLUMNS = ("kappa1", "kappa2", "kappa3", "kappa4", "mean", "variance", "skewness",
                "kurtosis_excess")


def _fmt(v):
    if isinstance(v, float):
        return float(f"{v:.12g}")
    return v


def cumulant_row(cs: CumulantSet, config: ChannelConfig, engine: str, bits: bool = False) -> dict:
    s = 1 / math.log(2) if bits else 1.0
    k = list(cs.kappa) + [math.nan] * (4 - len(cs.kappa))
    row = {"engine": engine, "nt": config.n_t, "nr": config.n_r, "snr_db": config.snr_db}
    for i in range(4):
        row[f"kappa{i + 1}"] = k[i] * s ** (i + 1)
    row.update(mean=k[0] * s, variance=k[1] * s * s, skewness=cs.skewness,
               kurtosis_excess=cs.kurtosis_excess)
    return {key: _fmt(v) for key, v in row.items()}


def stats_table(config: ChannelConfig, pair: CorrelationPair | None, high_snr: bool = False,
                bits: bool = False, precision: str = "auto", **regularize) -> list:
    """Exact statistics, plus the high-SNR asymptotics when requested.

    ``regularize`` is forwarded to the engines (``gap_threshold``,
    ``epsilon``, ``auto_regularize``).
    """
    exact = cumulants_for(config, pair, 4, precision=precision, **regularize)
    rows = [cumulant_row(exact, config, "exact", bits)]
    if high_snr:
        hs = cumulants_for(config, pair, 4, high_snr=True, **regularize)
        rows.append(cumulant_row(hs, config, "high_snr", bits))
    return rows


def parse_range(text: str, integer: bool = False):
    """``start:stop:count`` into an evenly spaced list (``count >= 1``)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must look like start:stop:count, got {text!r}")
    start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1:
        raise ValueError("a sweep needs at least one point")
    vals = np.linspace(start, stop, count) if count > 1 else np.array([start])
    if integer:
        return [int(round(v)) for v in vals]
    return [float(v) for v in vals]


def pair_for(config: ChannelConfig, source: tuple) -> CorrelationPair:
    """``source`` is ``("iid",)``, ``("exp", rho_t, rho_r)`` or ``("pair", CorrelationPair)``."""
    kind = source[0]
    if kind == "iid":
        return iid_pair(config)
    if kind == "exp":
        return exponential_pair(config, source[1], source[2])
    return source[1].with_config(config)


def sweep_table(axis: str, values, config: ChannelConfig, source: tuple, high_snr: bool = False,
                bits: bool = False, **regularize) -> list:
    """Long-format rows ``axis, value, engine, statistic, number`` per sweep point.

    ``snr`` varies ``snr_db``; ``rho`` sets ``rho_t = rho_r = value`` with
    exponential correlation; ``antennas`` sets ``n_t = n_r = value``.
    """
    rows = []
    for v in values:
        if axis == "snr":
            cfg, src = config.with_snr(float(v)), source
        elif axis == "rho":
            cfg, src = config, ("exp", float(v), float(v))
        elif axis == "antennas":
            cfg, src = ChannelConfig(int(v), int(v), config.snr_db), source
        else:
            raise ValueError(f"unknown sweep axis {axis!r}")
        pair = pair_for(cfg, src)
        for r in stats_table(cfg, pair, high_snr, bits, **regularize):
            for stat in STAT_COLUMNS:
                rows.append({"axis": axis, "value": _fmt(v), "engine": r["engine"],
                             "statistic": stat, "number": r[stat]})
    return rows


def rows_to_csv(rows) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def rows_to_json(rows) -> str:
    return json.dumps(rows, indent=2) + "\n"


def simulation_report(config: ChannelConfig, pair: CorrelationPair, n_trials: int, seed: int,
                      compare: bool = False, workers: int | None = None,
                      seed_generated: bool = False, bits: bool = False):
    """Monte Carlo statistics (and optionally the analytic comparison) as a dict.

    Returns ``(report, samples)``; the seed is always recorded so a run can
    be repeated exactly.
    """
    from .cf import build_cf
    from .distribution import invert_cf
    from .montecarlo import compare_report, simulate

    samples, stats = simulate(config, pair, n_trials, seed, workers)
    report = {"nt": config.n_t, "nr": config.n_r, "snr_db": config.snr_db,
              "trials": int(n_trials), "seed": int(seed), "seed_generated": bool(seed_generated),
              "empirical": stats.as_dict()}
    if compare:
        analytic = cumulants_for(config, pair, 4)
        grid = invert_cf(build_cf(config, pair), cumulants=analytic)
        cmp = compare_report(analytic, stats, grid, samples, analytic_config=config, seed=seed)
        report["analytic"] = analytic.as_dict()
        report["comparison"] = cmp.as_dict()
    if bits:
        _report_in_bits(report)
    report["unit"] = "bits" if bits else "nats"
    return report, samples


def _report_in_bits(report):
    s = 1 / math.log(2)
    emp = report["empirical"]
    emp["mean"] *= s
    emp["variance"] *= s * s
    emp["standard_errors"]["mean"] *= s
    emp["standard_errors"]["variance"] *= s * s
    emp["histogram"]["edges"] = [e * s for e in emp["histogram"]["edges"]]
    if "analytic" in report:
        a = report["analytic"]
        for i in range(1, 5):
            a[f"kappa{i}"] *= s ** i
        a["mean"] *= s
        a["variance"] *= s * s
        for q in report["comparison"]["quantiles"]:
            for key in ("analytic", "empirical", "bootstrap_se"):
                q[key] *= s


def report_to_json(report) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=float) + "\n"
