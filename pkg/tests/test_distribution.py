import math
import warnings

import numpy as np
import pytest
from scipy import special as sps

from mimocap.cf import build_cf
from mimocap.channel import ChannelConfig, exponential_pair
from mimocap.cumulants import cumulants_for
from mimocap.distribution import (InversionSpec, RippleWarning, gil_pelaez_cdf, invert_cf,
                                  moments_from_grid, outage_capacity)
from mimocap.errors import BracketingError, DomainError, OutageRangeError, TruncationError

# SISO mean at 15 dB: exp(1/eta) E1(1/eta)
SISO_MEAN = 3.001466153048103


@pytest.fixture(scope="module")
def siso():
    cf = build_cf(ChannelConfig(1, 1, 15.0))
    return cf, invert_cf(cf)


@pytest.fixture(scope="module")
def corr3():
    cfg = ChannelConfig(3, 3, 15.0)
    cf = build_cf(cfg, exponential_pair(cfg, 0.5, 0.7))
    return cfg, cf, invert_cf(cf)


def test_siso_median_and_mean(siso):
    cf, grid = siso
    med = outage_capacity(grid, 0.5)
    assert abs(grid.cdf_at(med) - 0.5) < 1e-4
    mean, _ = moments_from_grid(grid)
    assert mean == pytest.approx(SISO_MEAN, abs=1e-3)
    eta = 10 ** 1.5
    assert SISO_MEAN == pytest.approx(math.exp(1 / eta) * sps.exp1(1 / eta), rel=1e-12)


def test_siso_cdf_matches_closed_form(siso):
    # P(C <= x) = 1 - exp(-(e^x - 1)/eta) for |h|^2 ~ Exp(1)
    _, grid = siso
    eta = 10 ** 1.5
    x = np.linspace(1.0, 5.0, 9)
    np.testing.assert_allclose(grid.cdf_at(x), -np.expm1(-np.expm1(x) / eta), atol=1e-6)


def test_grid_invariants(corr3):
    _, _, grid = corr3
    x, p, f = grid.capacity_axis, grid.pdf, grid.cdf
    assert np.all(np.diff(x) > 0) and np.all(p >= 0)
    assert 0.99 <= np.trapezoid(p, x) <= 1.01
    assert np.all(np.diff(f) >= -1e-9) and f[-1] >= 0.995
    assert grid.ripple < 1e-4


def test_correlated_mass_above_four(corr3):
    _, _, grid = corr3
    assert grid.cdf_at(4.0) < 0.05


def test_iid_mass_above_five():
    grid = invert_cf(build_cf(ChannelConfig(3, 3, 15.0)))
    assert grid.cdf_at(5.0) < 0.05


def test_grid_refinement(corr3):
    _, cf, grid = corr3
    fine = invert_cf(cf, InversionSpec(n_points=2 * grid.spec.n_points))
    probes = np.linspace(5.0, 11.0, 10)
    np.testing.assert_allclose(grid.cdf_at(probes), fine.cdf_at(probes), atol=1e-6)
    # the tabulated columns differ only by linear interpolation error
    coarse_f = np.interp(probes, grid.capacity_axis, grid.cdf)
    fine_f = np.interp(probes, fine.capacity_axis, fine.cdf)
    np.testing.assert_allclose(coarse_f, fine_f, atol=1e-4)


@pytest.mark.parametrize("q", [0.01, 0.1, 0.5, 0.9])
def test_quantile_inverse(corr3, q):
    _, _, grid = corr3
    assert abs(grid.cdf_at(outage_capacity(grid, q)) - q) < 1e-4


def test_fft_and_gil_pelaez_agree(corr3):
    _, cf, grid = corr3
    gp = invert_cf(cf, InversionSpec(method="gil_pelaez"))
    np.testing.assert_allclose(grid.cdf, gp.cdf, atol=2e-4)
    probes = np.linspace(5.0, 11.0, 20)
    direct = [gil_pelaez_cdf(cf, x, mean=grid.mean_hint, omega_max=grid.spec.omega_max)
              for x in probes]
    np.testing.assert_allclose(np.interp(probes, grid.capacity_axis, grid.cdf), direct, atol=2e-4)


@pytest.mark.parametrize("cfg,rho", [(ChannelConfig(2, 2, 15.0), (0.5, 0.7)),
                                     (ChannelConfig(2, 4, 5.0), None),
                                     (ChannelConfig(4, 3, 25.0), (0.3, 0.8))])
def test_grid_moments_match_cumulants(cfg, rho):
    pair = None if rho is None else exponential_pair(cfg, *rho)
    cf = build_cf(cfg, pair)
    kappa = cumulants_for(cfg, pair, 2).kappa
    mean, var = moments_from_grid(invert_cf(cf))
    assert mean == pytest.approx(kappa[0], abs=5e-3)
    assert var == pytest.approx(kappa[1], abs=1e-2)


def test_gaussian_transform_pair():
    mu, s2 = 3.0, 0.49
    cf = lambda w: np.exp(1j * mu * np.asarray(w) - 0.5 * s2 * np.asarray(w) ** 2)
    grid = invert_cf(cf, cumulants=(mu, s2))
    mean, var = moments_from_grid(grid)
    assert mean == pytest.approx(mu, abs=1e-6)
    assert var == pytest.approx(s2, abs=1e-6)
    assert outage_capacity(grid, 0.5) == pytest.approx(mu, abs=1e-6)


def test_plain_callable_needs_cumulants():
    with pytest.raises(DomainError):
        invert_cf(lambda w: np.exp(-np.asarray(w) ** 2))


def test_truncation_error():
    with pytest.raises(TruncationError):
        invert_cf(build_cf(ChannelConfig(2, 2, 15.0)), InversionSpec(omega_max=0.5))


def test_bracketing_error():
    with pytest.raises(BracketingError):
        invert_cf(build_cf(ChannelConfig(2, 2, 15.0)), InversionSpec(c_min=6.0, c_max=9.0))


def test_negative_density_is_clipped_and_reported():
    # signed Gaussian mixture with unit mass that dips below zero at the origin
    def cf(w):
        w = np.asarray(w)
        return (np.exp(-0.5 * w ** 2) - 0.5 * np.exp(-0.005 * w ** 2)
                + 0.5 * np.exp(-4.5 * w ** 2))

    with pytest.warns(RippleWarning):
        grid = invert_cf(cf, cumulants=(0.0, 4.0))
    assert grid.ripple > 0.1 and np.all(grid.pdf >= 0)


@pytest.mark.parametrize("q", [0.0, 1.0, -0.1, 1.5])
def test_outage_rejects_closed_interval(siso, q):
    with pytest.raises(OutageRangeError):
        outage_capacity(siso[1], q)


def test_outage_from_cf_directly():
    cfg = ChannelConfig(2, 2, 15.0)
    cf = build_cf(cfg, exponential_pair(cfg, 0.5, 0.7))
    assert outage_capacity(cf, 0.1) == pytest.approx(outage_capacity(invert_cf(cf), 0.1), abs=1e-6)


@pytest.mark.parametrize("kw", [dict(n_points=100), dict(n_points=3000), dict(omega_max=-1.0),
                                dict(c_min=2.0, c_max=1.0), dict(method="simpson")])
def test_spec_validation(kw):
    with pytest.raises(DomainError):
        InversionSpec(**kw)


def test_csv_export(siso, tmp_path):
    _, grid = siso
    path = tmp_path / "grid.csv"
    text = grid.to_csv(path)
    lines = text.splitlines()
    assert lines[0] == "capacity_nats,pdf,cdf"
    assert path.read_text() == text
    cdf = np.array([float(line.split(",")[2]) for line in lines[1:]])
    assert np.all(np.diff(cdf) >= 0)
    assert grid.to_csv(bits=True).splitlines()[0] == "capacity_bits,pdf,cdf"


def test_high_snr_cf_inverts():
    cfg = ChannelConfig(2, 2, 40.0)
    cf = build_cf(cfg, exponential_pair(cfg, 0.9, 0.9), kind="high_snr")
    with warnings.catch_warnings():
        warnings.simplefilter("error", RippleWarning)
        grid = invert_cf(cf)
    _, var = moments_from_grid(grid)
    assert var == pytest.approx(2.2899, abs=1e-2)
