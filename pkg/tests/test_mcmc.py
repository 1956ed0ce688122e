import math

import numpy as np
import pytest
from scipy import stats

from arfimabayes.draws import PosteriorDraws
from arfimabayes.likelihood import log_likelihood
from arfimabayes.mcmc import (
    McmcConfig,
    TruncatedNormalProposal,
    autocorrelation,
    dic,
    effective_sample_size,
    run_filtered_mcmc,
    run_mcmc,
    run_simultaneous_mcmc,
)
from arfimabayes.mle import MleFit
from arfimabayes.model import ArfimaParams, simulate_arfima


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            McmcConfig(iterations=10, thin=50)
        with pytest.raises(ValueError):
            McmcConfig(sigma_d=0.0)
        with pytest.raises(ValueError):
            McmcConfig(algorithm="gibbs")


class TestProposal:
    def test_draws_inside_box(self, rng):
        prop = TruncatedNormalProposal(np.diag([0.3, 0.3]), [-0.5, -1], [0.5, 1])
        x = np.array([prop.draw(np.array([0.45, -0.95]), rng) for _ in range(500)])
        assert np.all((x[:, 0] > -0.5) & (x[:, 0] < 0.5) & (x[:, 1] > -1) & (x[:, 1] < 1))

    def test_log_mass_diagonal(self):
        prop = TruncatedNormalProposal([[0.04]], [-0.5], [0.5])
        expected = math.log(stats.norm.cdf(0.5, 0.4, 0.2) - stats.norm.cdf(-0.5, 0.4, 0.2))
        assert prop.log_mass(np.array([0.4])) == pytest.approx(expected, rel=1e-12)

    def test_log_mass_correlated(self):
        cov = np.array([[0.04, -0.03], [-0.03, 0.09]])
        prop = TruncatedNormalProposal(cov, [-0.5, -1], [0.5, 1])
        c = np.array([0.4, 0.8])
        mc = stats.multivariate_normal(c, cov).rvs(200_000, random_state=1)
        inside = np.mean((np.abs(mc[:, 0]) < 0.5) & (np.abs(mc[:, 1]) < 1))
        assert math.exp(prop.log_mass(c)) == pytest.approx(inside, abs=4e-3)

    def test_far_from_faces(self):
        prop = TruncatedNormalProposal(np.eye(2) * 1e-4, [-0.5, -1], [0.5, 1])
        assert prop.log_mass(np.zeros(2)) == 0.0


class TestSamplers:
    def test_draw_count_and_support(self, series_0d1):
        cfg = McmcConfig(iterations=600, thin=10, order="0d1", seed=1)
        draws = run_simultaneous_mcmc(series_0d1, cfg)
        assert len(draws) == 60
        assert np.all(np.abs(draws.column("d")) < 0.5)
        assert np.all(np.abs(draws.column("theta")) < 1)
        assert np.all(draws.column("phi") == 0)
        assert np.all(draws.column("sigma2") > 0)
        assert draws.provenance == "mcmc-simultaneous"

    def test_burn_in(self, series_0d1):
        cfg = McmcConfig(iterations=600, thin=10, burn_in=100, order="0d1", seed=1)
        assert len(run_simultaneous_mcmc(series_0d1, cfg)) == 50

    @pytest.mark.parametrize("algorithm", ["simultaneous", "filtered"])
    def test_determinism(self, series_0d1, algorithm):
        cfg = McmcConfig(iterations=200, thin=5, order="0d1", seed=4, algorithm=algorithm)
        a, b = run_mcmc(series_0d1, cfg), run_mcmc(series_0d1, cfg)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_filtered_blocks(self, series_1d1):
        cfg = McmcConfig(iterations=300, thin=3, order="1d1", seed=2, algorithm="filtered")
        draws = run_filtered_mcmc(series_1d1, cfg)
        assert len(draws) == 100
        assert set(draws.acceptance_rates) == {"d", "phi+theta"}
        assert draws.provenance == "mcmc-filtered"

    def test_fallback_proposal_warns(self, series_0d1, caplog):
        broken = MleFit(ArfimaParams(0.1, theta=0.1), np.full((3, 3), np.nan), 0.0, True, 1,
                        ("d", "theta", "sigma2"))
        cfg = McmcConfig(iterations=50, thin=5, order="0d1", seed=2, mle_fit=broken)
        with caplog.at_level("WARNING"):
            draws = run_simultaneous_mcmc(series_0d1, cfg)
        assert "falling back" in caplog.text
        assert len(draws) == 10

    def test_filtered_matches_simultaneous_on_0d0(self):
        y = simulate_arfima(ArfimaParams(d=0.25), 200, seed=21)
        a = run_mcmc(y, McmcConfig(iterations=20_000, thin=20, order="0d0", seed=1, algorithm="simultaneous",
                                   proposal_cov=[[0.06**2]]))
        b = run_mcmc(y, McmcConfig(iterations=20_000, thin=20, order="0d0", seed=2, algorithm="filtered",
                                   sigma_d=0.06))
        assert stats.ks_2samp(a.column("d"), b.column("d")).pvalue > 0.01

    def test_posterior_tracks_truth(self, series_0d1):
        draws = run_mcmc(series_0d1, McmcConfig(iterations=3000, thin=10, order="0d1", seed=8))
        s = draws.summary()
        assert s["d"]["lb"] < 0.2 < s["d"]["ub"]
        assert s["theta"]["lb"] < 0.2 < s["theta"]["ub"]


class TestEss:
    def test_iid(self, rng):
        assert 8500 <= effective_sample_size(rng.standard_normal(10_000)) <= 11_500

    def test_ar1(self, rng):
        rho, n = 0.9, 10_000
        x = np.empty(n)
        x[0] = rng.standard_normal() / math.sqrt(1 - rho**2)
        e = rng.standard_normal(n)
        for t in range(1, n):
            x[t] = rho * x[t - 1] + e[t]
        target = n * (1 - rho) / (1 + rho)
        assert 0.7 * target <= effective_sample_size(x) <= 1.3 * target

    def test_constant(self):
        assert effective_sample_size(np.ones(500)) == 1.0

    def test_autocorrelation_lag0(self, rng):
        assert autocorrelation(rng.standard_normal(100))[0] == pytest.approx(1.0)


class TestDic:
    def test_point_mass(self, series_0d1):
        p = ArfimaParams(0.2, theta=0.2, sigma2=1.1)
        draws = PosteriorDraws.point_mass(p, 10)
        assert dic(series_0d1, draws) == pytest.approx(-2 * log_likelihood(series_0d1, p), rel=1e-12)

    def test_extra_column_ignored(self, series_0d1, rng):
        samples = np.column_stack([rng.uniform(0.1, 0.3, 20), np.zeros(20), rng.uniform(0.1, 0.3, 20),
                                   rng.uniform(0.9, 1.1, 20)])
        base = dic(series_0d1, samples, order="0d1")
        extra = dic(series_0d1, np.column_stack([samples, np.full(20, 7.0)]), order="0d1")
        assert base == extra

    def test_definition(self, series_0d1, rng):
        samples = np.column_stack([rng.uniform(0.1, 0.3, 15), np.zeros(15), rng.uniform(0.1, 0.3, 15),
                                   rng.uniform(0.9, 1.1, 15)])
        dev = [-2 * log_likelihood(series_0d1, ArfimaParams(s[0], None, s[2], s[3])) for s in samples]
        m = samples.mean(axis=0)
        d_bar = np.mean(dev)
        p_d = d_bar + 2 * log_likelihood(series_0d1, ArfimaParams(m[0], None, m[2], m[3]))
        assert dic(series_0d1, samples, order="0d1") == pytest.approx(d_bar + p_d, rel=1e-12)
