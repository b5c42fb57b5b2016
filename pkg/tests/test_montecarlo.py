import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sst
from scipy.stats import unitary_group

from mimocap.channel import (ChannelConfig, SpectrumWarning, exponential_pair, iid_pair,
                             validate_and_decompose)
from mimocap.cumulants import cumulants_for
from mimocap.errors import ConfigurationMismatchError, DomainError, NotPositiveDefiniteError
from mimocap.montecarlo import (MomentAccumulator, SimulationSpec, accumulate,
                                capacity_from_channels, compare_report, draw_channels,
                                empirical_cf, empirical_statistics, hermitian_sqrt,
                                sample_capacity, sample_channel_matrices, samples_to_csv, simulate,
                                stats_to_json)

SISO_MEAN_15DB = 3.001466153048103


def _spec(nt=2, nr=2, snr=15.0, rho=None, n=1000, seed=7):
    cfg = ChannelConfig(nt, nr, snr)
    pair = iid_pair(cfg) if rho is None else exponential_pair(cfg, *rho)
    return SimulationSpec(cfg, pair, n, seed)


class TestSampler:
    def test_determinism(self):
        a = sample_capacity(_spec(n=20_000))
        b = sample_capacity(_spec(n=20_000))
        assert np.array_equal(a[:10], b[:10]) and np.array_equal(a, b)
        assert not np.array_equal(a, sample_capacity(_spec(n=20_000, seed=8)))

    def test_workers_do_not_change_stream(self):
        spec = _spec(n=30_000)
        np.testing.assert_array_equal(sample_capacity(spec), sample_capacity(spec, workers=4))

    def test_prefix_stable_across_trial_counts(self):
        short = sample_capacity(_spec(n=100))
        long = sample_capacity(_spec(n=50_000))
        np.testing.assert_array_equal(short, long[:100])

    def test_kronecker_covariance(self):
        spec = _spec(3, 2, rho=(0.6, 0.8), n=1)
        n = 100_000
        h = sample_channel_matrices(spec, n)
        v = h.reshape(n, -1)                     # row-major: index (i, j) -> i * n_t + j
        emp = v.T @ v.conj() / n                 # E[H_ij conj(H_kl)]
        ref = np.kron(spec.pair.psi_r, spec.pair.psi_t.T)
        assert np.max(np.abs(emp - ref)) < 5 / math.sqrt(n)

    def test_unit_power_entries(self):
        h = sample_channel_matrices(_spec(2, 2, n=1), 50_000)
        assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.02)
        assert abs(np.mean(h.real ** 2) - 0.5) < 0.01

    def test_det_and_eig_paths_agree(self):
        rng = np.random.default_rng(3)
        for nt, nr in [(2, 3), (3, 2), (4, 4)]:
            cfg = ChannelConfig(nt, nr, 20.0)
            pair = exponential_pair(cfg, 0.7, 0.4)
            h = draw_channels(rng, 1000, hermitian_sqrt(pair.psi_t), hermitian_sqrt(pair.psi_r))
            np.testing.assert_allclose(capacity_from_channels(h, cfg.eta_bar, "det"),
                                       capacity_from_channels(h, cfg.eta_bar), rtol=0, atol=1e-10)

    def test_unitary_invariance(self):
        cfg = ChannelConfig(3, 2, 15.0)
        pt = exponential_pair(cfg, 0.5, 0.7).psi_t
        pr = exponential_pair(cfg, 0.5, 0.7).psi_r
        ut = unitary_group.rvs(3, random_state=1)
        ur = unitary_group.rvs(2, random_state=2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SpectrumWarning)
            rot = validate_and_decompose(ut @ pt @ ut.conj().T, ur @ pr @ ur.conj().T, cfg,
                                         require_unit_diagonal=False)
        a = sample_capacity(SimulationSpec(cfg, exponential_pair(cfg, 0.5, 0.7), 100_000, 1))
        b = sample_capacity(SimulationSpec(cfg, rot, 100_000, 2))
        assert sst.ks_2samp(a, b).pvalue > 0.01

    def test_low_snr_scaling(self):
        # C ~ eta_bar tr(Theta) and E tr(Theta) = n_t n_r
        spec = _spec(3, 2, snr=-30.0, n=50_000, seed=11)
        x = sample_capacity(spec)
        assert np.mean(x) / spec.config.eta_bar == pytest.approx(3 * 2, rel=0.05)

    @pytest.mark.slow
    def test_siso_mean(self):
        x = sample_capacity(_spec(1, 1, n=1_000_000, seed=5))
        se = x.std(ddof=1) / math.sqrt(x.size)
        assert abs(x.mean() - SISO_MEAN_15DB) < 3 * se

    def test_hermitian_sqrt(self):
        m = exponential_pair(ChannelConfig(3, 3, 0.0), 0.5, 0.9).psi_r
        r = hermitian_sqrt(m)
        np.testing.assert_allclose(r @ r, m, atol=1e-14)
        with pytest.raises(NotPositiveDefiniteError):
            hermitian_sqrt(np.array([[1.0, 2.0], [2.0, 1.0]]))

    @pytest.mark.parametrize("kw", [dict(n_trials=0), dict(n_trials=2.5), dict(seed=-1),
                                    dict(seed=2 ** 64)])
    def test_spec_validation(self, kw):
        cfg = ChannelConfig(2, 2, 0.0)
        args = dict(config=cfg, pair=iid_pair(cfg), n_trials=10, seed=0) | kw
        with pytest.raises(DomainError):
            SimulationSpec(**args)

    def test_pair_must_match_config(self):
        with pytest.raises(ConfigurationMismatchError):
            SimulationSpec(ChannelConfig(2, 3, 0.0), iid_pair(ChannelConfig(2, 2, 0.0)), 10, 0)


class TestStatistics:
    def test_constant_samples(self):
        s = empirical_statistics(np.full(500, 2.5))
        assert s.mean == 2.5 and s.variance == 0.0
        assert "skewness" in s.flags

    def test_single_sample_is_flagged(self):
        s = empirical_statistics([1.0])
        assert math.isnan(s.variance) and "variance" in s.flags

    def test_gaussian_shape(self):
        x = np.random.default_rng(0).standard_normal(1_000_000)
        s = empirical_statistics(x)
        assert abs(s.skewness) < 3 * s.standard_errors["skewness"]
        assert abs(s.kurtosis_excess) < 3 * s.standard_errors["kurtosis_excess"]
        # a 50-group jackknife has about 10 % relative spread around sqrt(6/N)
        assert s.standard_errors["skewness"] == pytest.approx(math.sqrt(6e-6), rel=0.4)
        assert sum(s.histogram[1]) == x.size and s.samples_retained == x.size

    def test_unbiased_variance(self):
        x = np.array([1.0, 2.0, 4.0])
        s = empirical_statistics(x)
        assert s.variance == pytest.approx(np.var(x, ddof=1), rel=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 400), st.integers(1, 400), st.integers(0, 2 ** 32 - 1))
    def test_pairwise_merge(self, na, nb, seed):
        x = np.random.default_rng(seed).gamma(2.0, size=na + nb) * 3 + 10
        merged = MomentAccumulator.from_samples(x[:na]).merge(MomentAccumulator.from_samples(x[na:]))
        whole = MomentAccumulator.from_samples(x)
        for f in ("mean", "m2", "m3", "m4"):
            assert getattr(merged, f) == pytest.approx(getattr(whole, f), rel=1e-9, abs=1e-9)

    def test_chunked_accumulation(self):
        x = np.random.default_rng(1).exponential(size=10_001)
        acc = accumulate(x, chunk=1000)
        assert acc.n == x.size and acc.m2 / acc.n == pytest.approx(np.var(x), rel=1e-12)

    def test_correlated_matches_cumulants(self):
        cfg = ChannelConfig(3, 3, 15.0)
        pair = exponential_pair(cfg, 0.5, 0.7)
        x, s = simulate(cfg, pair, 100_000, seed=2024)
        k = cumulants_for(cfg, pair).kappa
        assert abs(s.mean - k[0]) < 3 * s.standard_errors["mean"]
        assert abs(s.variance - k[1]) < 3 * s.standard_errors["variance"]


class TestEmpiricalCF:
    def test_zero_and_symmetry(self):
        x = sample_capacity(_spec(n=5000))
        assert empirical_cf(x, 0.0) == 1.0
        w = np.array([0.3, 1.7])
        np.testing.assert_allclose(empirical_cf(x, -w), np.conj(empirical_cf(x, w)), atol=1e-15)
        _, se = empirical_cf(x, w, return_se=True)
        assert np.all(se <= 1 / math.sqrt(x.size))

    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            empirical_cf([], [1.0])


class TestComparison:
    def test_split_half_self_comparison(self):
        # each half against the cumulants of the other half's moments
        from mimocap.cumulants import CumulantSet, cumulants_from_moments

        x = sample_capacity(_spec(3, 3, rho=(0.5, 0.7), n=200_000, seed=99))
        a, b = x[::2], x[1::2]
        raw = [np.mean(b ** k) for k in range(1, 5)]
        ref = CumulantSet.from_kappa(cumulants_from_moments(raw), "monte_carlo")
        rep = compare_report(ref, empirical_statistics(a))
        assert all(abs(z) < 3 * math.sqrt(2) for z in rep.z_scores.values())

    def test_wrong_snr_fails(self):
        cfg = ChannelConfig(2, 2, 15.0)
        x, s = simulate(cfg, iid_pair(cfg), 50_000, seed=3)
        good = compare_report(cumulants_for(cfg), s)
        bad = compare_report(cumulants_for(cfg.with_snr(16.0)), s)
        assert good.passed and not bad.passed

    def test_config_mismatch(self):
        cfg = ChannelConfig(2, 2, 15.0)
        _, s = simulate(cfg, iid_pair(cfg), 1000, seed=3)
        with pytest.raises(ConfigurationMismatchError):
            compare_report(cumulants_for(cfg), s, analytic_config=cfg.with_snr(10.0))

    def test_outage_quantile_against_grid(self):
        from mimocap.cf import build_cf
        from mimocap.distribution import invert_cf

        cfg = ChannelConfig(4, 4, 15.0)
        pair = exponential_pair(cfg, 0.5, 0.7)
        x, s = simulate(cfg, pair, 100_000, seed=41)
        grid = invert_cf(build_cf(cfg, pair))
        rep = compare_report(cumulants_for(cfg, pair), s, grid=grid, samples=x)
        q = rep.quantiles[0]
        assert q["q"] == 0.1 and abs(q["z"]) < 3
        assert rep.ks_distance < rep.ks_threshold
        assert rep.passed


def test_exports(tmp_path):
    x = np.array([1.0, 2.0])
    text = samples_to_csv(x, tmp_path / "s.csv")
    assert text.splitlines() == ["trial,capacity_nats", "0,1", "1,2"]
    assert samples_to_csv(x, bits=True).splitlines()[0] == "trial,capacity_bits"
    s = empirical_statistics(np.arange(10.0))
    d = json.loads(stats_to_json(s, tmp_path / "s.json", extra={"seed": 1}))
    assert d["seed"] == 1 and d["mean"] == 4.5
