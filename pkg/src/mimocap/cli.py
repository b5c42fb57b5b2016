"""Command-line front end.

Commands
--------
stats          cumulants and shape statistics (exact, optionally high-SNR)
dist           capacity PDF/CDF grid and outage quantiles
sim            Monte Carlo statistics, optionally compared with the analytic results
sweep          statistics along an SNR, correlation or antenna-count axis
validate-corr  check a correlation-matrix file and report its spectra

Exit codes: 0 success, 2 usage or invalid input, 3 numerical failure,
4 file I/O or parse failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import tables
from .cf import build_cf
from .channel import (ChannelConfig, exponential_pair, iid_pair, ingest_correlation_file,
                      validate_and_decompose)
from .distribution import InversionSpec, invert_cf, outage_capacity
from .errors import (BracketingError, ConfigurationMismatchError, DomainError, MimoCapError,
                     NumericalDegeneracyError, OutageRangeError, ParseError, TruncationError,
                     ValidationError)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------

def _open_unit(text):
    q = float(text)
    if not 0.0 < q < 1.0:
        raise argparse.ArgumentTypeError(f"outage probability must lie in (0, 1), got {text}")
    return q


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return n


def _range(text):
    try:
        tables.parse_range(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _common(sub):
    g = sub.add_argument_group("scenario")
    g.add_argument("--nt", type=_positive_int, help="transmit antennas (default 2)")
    g.add_argument("--nr", type=_positive_int, help="receive antennas (default 2)")
    g.add_argument("--snr-db", type=float, default=15.0, help="average SNR in dB (default 15)")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--iid", action="store_true", help="uncorrelated antennas (default)")
    src.add_argument("--exp", nargs=2, type=float, metavar=("RHO_T", "RHO_R"),
                     help="exponential correlation rho^|i-j| on each side")
    src.add_argument("--corr-file", metavar="PATH", help="CORRMAT v1 correlation file")
    g.add_argument("--permissive", action="store_true",
                   help="accept correlation matrices without a unit diagonal")
    g.add_argument("--strict-spectrum", action="store_true",
                   help="fail instead of regularising clustered eigenvalues")
    out = sub.add_argument_group("output")
    fmt = out.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv")
    out.add_argument("--bits", action="store_true", help="report capacity in bits instead of nats")
    out.add_argument("-o", "--output", metavar="PATH", help="write to PATH instead of stdout")
    out.add_argument("--seed", type=int, help="random seed (generated and recorded if omitted)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mimocap",
                                description="Capacity statistics of correlated MIMO Rayleigh channels.")
    subs = p.add_subparsers(dest="command", required=True)

    s = subs.add_parser("stats", help="cumulants, mean, variance, skewness, kurtosis")
    _common(s)
    s.add_argument("--high-snr", action="store_true", help="add the high-SNR asymptotic row")

    d = subs.add_parser("dist", help="PDF/CDF grid and outage capacity")
    _common(d)
    d.add_argument("--outage", type=_open_unit, action="append", metavar="Q",
                   help="print the capacity with outage probability Q (repeatable)")
    d.add_argument("--n-points", type=_positive_int, default=4096)
    d.add_argument("--omega-max", type=float)
    d.add_argument("--high-snr", action="store_true", help="invert the high-SNR CF instead")

    m = subs.add_parser("sim", help="Monte Carlo statistics")
    _common(m)
    m.add_argument("--trials", type=_positive_int, default=100_000)
    m.add_argument("--compare", action="store_true", help="add the analytic comparison report")
    m.add_argument("--sweep-rho", type=_range, metavar="A:B:K",
                   help="repeat for rho_t = rho_r over K evenly spaced values in [A, B]")
    m.add_argument("--samples", metavar="PATH", help="also write the raw samples as CSV")
    m.add_argument("--workers", type=_positive_int)

    w = subs.add_parser("sweep", help="statistics along one axis (long-format CSV)")
    _common(w)
    w.add_argument("--axis", choices=("snr", "rho", "antennas"), required=True)
    w.add_argument("--range", dest="sweep_range", type=_range, required=True, metavar="A:B:K")
    w.add_argument("--high-snr", action="store_true")

    v = subs.add_parser("validate-corr", help="validate a correlation-matrix file")
    v.add_argument("path")
    v.add_argument("--permissive", action="store_true")
    v.add_argument("-o", "--output", metavar="PATH")
    return p


# ---------------------------------------------------------------------------
# scenario assembly
# ---------------------------------------------------------------------------

def _scenario(args):
    """``(config, source)`` where ``source`` is understood by :func:`tables.pair_for`."""
    if args.corr_file:
        psi_t, psi_r = ingest_correlation_file(args.corr_file)
        nt, nr = psi_t.shape[0], psi_r.shape[0]
        if (args.nt not in (None, nt)) or (args.nr not in (None, nr)):
            raise UsageError(f"--nt/--nr disagree with {args.corr_file} ({nt}x{nr})")
        config = ChannelConfig(nt, nr, args.snr_db)
        pair = validate_and_decompose(psi_t, psi_r, config,
                                      require_unit_diagonal=not args.permissive)
        return config, ("pair", pair)
    config = ChannelConfig(args.nt or 2, args.nr or 2, args.snr_db)
    if args.exp:
        return config, ("exp", args.exp[0], args.exp[1])
    return config, ("iid",)


def _regularize(args):
    return {"auto_regularize": not args.strict_spectrum}


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _seed(args):
    if args.seed is not None:
        return args.seed, False
    return int(np.random.SeedSequence().entropy % (2 ** 63)), True


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_stats(args):
    config, source = _scenario(args)
    rows = tables.stats_table(config, tables.pair_for(config, source), args.high_snr, args.bits,
                              **_regularize(args))
    render = tables.rows_to_json if args.fmt == "json" else tables.rows_to_csv
    _emit(render(rows), args.output)


def cmd_dist(args):
    config, source = _scenario(args)
    pair = tables.pair_for(config, source)
    kind = "high_snr" if args.high_snr else "auto"
    cf = build_cf(config, pair, kind=kind, **_regularize(args))
    grid = invert_cf(cf, InversionSpec(omega_max=args.omega_max, n_points=args.n_points))
    scale = 1 / np.log(2) if args.bits else 1.0
    quantiles = [{"q": q, "capacity": outage_capacity(grid, q) * scale} for q in args.outage or []]
    if args.fmt == "json":
        payload = {"unit": "bits" if args.bits else "nats", "outage": quantiles,
                   "tail_mass": grid.tail_mass, "ripple": grid.ripple,
                   "capacity": (grid.capacity_axis * scale).tolist(),
                   "pdf": (grid.pdf / scale).tolist(), "cdf": grid.cdf.tolist()}
        _emit(json.dumps(payload) + "\n", args.output)
        return
    if quantiles:
        unit = "bits" if args.bits else "nats"
        lines = [f"q,outage_capacity_{unit}"] + [f"{r['q']:.10g},{r['capacity']:.10g}" for r in quantiles]
        sys.stdout.write("\n".join(lines) + "\n")
        if args.output:
            grid.to_csv(args.output, bits=args.bits)
        return
    _emit(grid.to_csv(bits=args.bits), args.output)


def cmd_sim(args):
    config, source = _scenario(args)
    seed, generated = _seed(args)
    if args.sweep_rho:
        if source[0] == "pair":
            raise UsageError("--sweep-rho replaces the correlation source; drop --corr-file")
        reports = []
        for i, rho in enumerate(tables.parse_range(args.sweep_rho)):
            pair = exponential_pair(config, rho, rho)
            rep, _ = tables.simulation_report(config, pair, args.trials, seed + i, args.compare,
                                              args.workers, generated, args.bits)
            rep["rho"] = rho
            reports.append(rep)
        _emit(tables.report_to_json(reports), args.output)
        return
    pair = tables.pair_for(config, source)
    rep, samples = tables.simulation_report(config, pair, args.trials, seed, args.compare,
                                            args.workers, generated, args.bits)
    if args.samples:
        from .montecarlo import samples_to_csv

        samples_to_csv(samples, args.samples, bits=args.bits)
    _emit(tables.report_to_json(rep), args.output)


def cmd_sweep(args):
    config, source = _scenario(args)
    if args.axis == "antennas" and source[0] == "pair":
        raise UsageError("an antenna sweep needs --iid or --exp")
    values = tables.parse_range(args.sweep_range, integer=args.axis == "antennas")
    rows = tables.sweep_table(args.axis, values, config, source, args.high_snr, args.bits,
                              **_regularize(args))
    render = tables.rows_to_json if args.fmt == "json" else tables.rows_to_csv
    _emit(render(rows), args.output)


def cmd_validate(args):
    psi_t, psi_r = ingest_correlation_file(args.path)
    config = ChannelConfig(psi_t.shape[0], psi_r.shape[0], 0.0)
    pair = validate_and_decompose(psi_t, psi_r, config, require_unit_diagonal=not args.permissive)
    report = {"path": args.path, "nt": config.n_t, "nr": config.n_r, "valid": True,
              "eig_t": pair.eig_t.tolist(), "eig_r": pair.eig_r.tolist(),
              "min_rel_gap_small": pair.min_rel_gap_small,
              "min_rel_gap_large": pair.min_rel_gap_large,
              "degenerate": pair.is_degenerate(), "identity": pair.is_identity}
    _emit(tables.report_to_json(report), args.output)


COMMANDS = {"stats": cmd_stats, "dist": cmd_dist, "sim": cmd_sim, "sweep": cmd_sweep,
            "validate-corr": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except (UsageError, ValidationError, DomainError, OutageRangeError,
            ConfigurationMismatchError) as exc:
        print(f"mimocap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalDegeneracyError, TruncationError, BracketingError) as exc:
        print(f"mimocap: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ParseError, OSError) as exc:
        print(f"mimocap: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MimoCapError as exc:
        print(f"mimocap: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
