"""Capacity statistics of doubly correlated MIMO Rayleigh-fading channels.

The capacity ``C = ln det(I + (eta/n_t) H H^H)`` of a Kronecker-correlated
Rayleigh channel is characterised through its moment generating function.
This package evaluates that function in closed form, derives cumulants of
any order from it, inverts it to a PDF/CDF, and checks everything against a
Monte Carlo simulator.
"""

from .cf import CapacityCF, build_cf, build_correlated_cf, build_high_snr_cf, build_iid_cf
from .channel import (ChannelConfig, CorrelationPair, exponential_pair, iid_pair,
                      ingest_correlation_file, make_exponential_correlation,
                      validate_and_decompose, write_correlation_file)
from .cumulants import (CumulantSet, PolymatrixSet, compute_polymatrices, cumulants_correlated,
                        cumulants_for, cumulants_from_cf, cumulants_high_snr, cumulants_iid)
from .distribution import DistributionGrid, InversionSpec, invert_cf, outage_capacity
from .errors import (BracketingError, ConfigurationMismatchError, DimensionMismatchError,
                     DomainError, MimoCapError, NotHermitianError, NotPositiveDefiniteError,
                     NumericalDegeneracyError, OutageRangeError, ParseError, TruncationError,
                     ValidationError)
from .montecarlo import (ComparisonReport, EmpiricalStats, SimulationSpec, compare_report,
                         empirical_cf, empirical_statistics, sample_capacity, simulate)
from .special import IntegralParams, integral_G, integral_J, polygamma

__version__ = "0.1.0"

__all__ = [
    "BracketingError", "CapacityCF", "ChannelConfig", "ComparisonReport", "ConfigurationMismatchError",
    "CorrelationPair", "CumulantSet", "DimensionMismatchError", "DistributionGrid", "DomainError",
    "EmpiricalStats", "IntegralParams", "InversionSpec", "MimoCapError", "NotHermitianError",
    "NotPositiveDefiniteError", "NumericalDegeneracyError", "OutageRangeError", "ParseError",
    "PolymatrixSet", "SimulationSpec", "TruncationError", "ValidationError", "build_cf",
    "build_correlated_cf", "build_high_snr_cf", "build_iid_cf", "compare_report",
    "compute_polymatrices", "cumulants_correlated", "cumulants_for", "cumulants_from_cf",
    "cumulants_high_snr", "cumulants_iid", "empirical_cf", "empirical_statistics",
    "exponential_pair", "iid_pair", "ingest_correlation_file", "integral_G", "integral_J",
    "invert_cf", "make_exponential_correlation", "outage_capacity", "polygamma", "sample_capacity",
    "simulate", "validate_and_decompose", "write_correlation_file",
]
