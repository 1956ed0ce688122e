import numpy as np
import pytest
from scipy import linalg, signal, special

from arfimabayes.errors import ParameterDomainError
from arfimabayes.model import (
    ArfimaParams,
    Series,
    acvf_arfima0d0,
    acvf_arfima_exact,
    acvf_arma11,
    acvf_convolution,
    arma_filter,
    arma_unfilter,
    frac_diff,
    frac_diff_weights,
    parse_order,
    simulate_arfima,
)


def gamma_form_acvf(d, sigma2, lags):
    """Closed gamma-function form, evaluated in log space."""
    h = np.arange(lags, dtype=float)
    num_sign, num = special.gammasgn(h + d) * special.gammasgn(d), special.gammaln(h + d) - special.gammaln(d)
    logv = special.gammaln(1 - 2 * d) + num - special.gammaln(1 - d) - special.gammaln(1 + h - d)
    return sigma2 * num_sign * np.exp(logv)


class TestParams:
    def test_order_consistency(self):
        p = ArfimaParams.from_order("0d1", 0.2, phi=0.7, theta=0.3)
        assert p.order == "0d1"
        assert p.ar == 0.0 and p.ma == 0.3

    @pytest.mark.parametrize("kwargs", [dict(d=0.5), dict(d=-0.5), dict(d=0.1, phi=1.0),
                                        dict(d=0.1, theta=-1.0), dict(d=0.1, sigma2=0.0)])
    def test_domain(self, kwargs):
        with pytest.raises(ParameterDomainError):
            ArfimaParams(**kwargs)

    def test_parse_order_aliases(self):
        assert parse_order("(1,d,0)") == "1d0"
        with pytest.raises(ValueError):
            parse_order("2d0")

    def test_series_demeaned(self):
        s = Series.from_values([1.0, 3.0])
        assert s.demeaned and np.allclose(s.values, [-1.0, 1.0])
        with pytest.raises(ValueError):
            Series.from_values([1.0])


class TestArfima0d0:
    def test_white_noise_limit(self):
        g = acvf_arfima0d0(0.0, 1.0, 5).gamma
        assert g[0] == 1.0 and np.all(g[1:] == 0.0)

    @pytest.mark.parametrize("d", [-0.4, -0.1, 0.1, 0.3, 0.45])
    def test_matches_gamma_form(self, d):
        g = acvf_arfima0d0(d, 1.0, 60).gamma
        np.testing.assert_allclose(g, gamma_form_acvf(d, 1.0, 60), rtol=1e-11)

    def test_variance_against_ma_weights(self):
        # var = sum psi_k^2 with psi_k = Gamma(k+d)/(Gamma(d) Gamma(k+1)), 1e6 terms
        d, K = 0.3, 10**6
        k = np.arange(1, K)
        psi = np.concatenate([[1.0], np.exp(np.cumsum(np.log((k - 1 + d) / k)))])
        total = np.sum(psi**2)
        # tail of psi_k^2 ~ k^{2d-2} / Gamma(d)^2
        tail = K ** (2 * d - 1) / ((1 - 2 * d) * special.gamma(d) ** 2)
        expected = special.gamma(0.4) / special.gamma(0.7) ** 2
        assert acvf_arfima0d0(d, 1.0, 1).gamma[0] == pytest.approx(expected, rel=1e-12)
        assert total + tail == pytest.approx(expected, rel=2e-4)

    def test_sigma2_linear(self):
        np.testing.assert_allclose(acvf_arfima0d0(0.2, 2.0, 30).gamma, 2 * acvf_arfima0d0(0.2, 1.0, 30).gamma,
                                   rtol=1e-15)

    def test_domain(self):
        with pytest.raises(ParameterDomainError):
            acvf_arfima0d0(0.5, 1.0, 3)

    def test_hyperbolic_decay(self):
        d = 0.4
        g = acvf_arfima0d0(d, 1.0, 101).gamma
        rho100 = g[100] / g[0]
        asym = special.gamma(1 - d) / special.gamma(d) * 100.0 ** (2 * d - 1)
        assert rho100 > 0.8 * asym


class TestArma11:
    def test_white_noise(self):
        np.testing.assert_array_equal(acvf_arma11(0, 0, 1, 4).gamma, [1, 0, 0, 0])

    def test_gamma0_formula(self):
        assert acvf_arma11(0.5, 0.5, 1.0, 1).gamma[0] == pytest.approx(7 / 3, rel=1e-15)

    def test_monte_carlo(self):
        phi, theta, n = 0.5, 0.2, 10**7
        e = np.random.default_rng(3).standard_normal(n + 1000)
        x = signal.lfilter([1, theta], [1, -phi], e)[1000:]
        g = acvf_arma11(phi, theta, 1.0, 6).gamma
        for h in range(6):
            prod = x[: n - h] * x[h:]
            se = prod.std() / np.sqrt(n - h) * np.sqrt((1 + phi) / (1 - phi))
            assert abs(prod.mean() - g[h]) < 3 * se

    def test_domain(self):
        with pytest.raises(ParameterDomainError):
            acvf_arma11(1.0, 0.0, 1.0, 3)


class TestConvolutionAndExact:
    def test_degenerate_arma(self):
        np.testing.assert_allclose(acvf_convolution(ArfimaParams(d=0.2), 40).gamma,
                                   acvf_arfima0d0(0.2, 1.0, 40).gamma, rtol=1e-12, atol=0)

    def test_exact_vs_convolution(self):
        p = ArfimaParams(d=0.2, phi=0.5, theta=0.5)
        np.testing.assert_allclose(acvf_arfima_exact(p, 51).gamma, acvf_convolution(p, 51).gamma, rtol=1e-6)

    def test_exact_arma_limit(self):
        target = acvf_arma11(0.5, 0.5, 1.0, 10).gamma
        gaps = [np.abs(acvf_arfima_exact(ArfimaParams(d=d, phi=0.5, theta=0.5), 10).gamma - target).max()
                for d in (1e-3, 1e-4, 1e-5)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-4

    def test_exact_sigma2_linear(self):
        p = ArfimaParams(d=0.1, phi=-0.3, theta=0.4)
        np.testing.assert_allclose(acvf_arfima_exact(p.replace(sigma2=3.0), 20).gamma,
                                   3.0 * acvf_arfima_exact(p, 20).gamma, rtol=1e-13)

    def test_exact_rejects_singular_points(self):
        with pytest.raises(ValueError):
            acvf_arfima_exact(ArfimaParams(d=0.2, theta=0.3), 5)
        with pytest.raises(ValueError):
            acvf_arfima_exact(ArfimaParams(d=1e-9, phi=0.3), 5)

    def test_pd_size_200(self):
        g = acvf_convolution(ArfimaParams(d=0.4, phi=-0.5, theta=0.2), 200).gamma
        linalg.cholesky(linalg.toeplitz(g), lower=True)

    def test_convolution_vs_dense_ma_weights(self):
        # independent oracle: MA(inf) weights of the ARMA part convolved by brute force
        d, phi, theta = 0.3, 0.5, -0.4
        g0 = acvf_arfima0d0(d, 1.0, 800).gamma
        gfull = np.concatenate([g0[:0:-1], g0])
        psi = np.r_[1.0, (phi + theta) * phi ** np.arange(200)]
        out = []
        for h in range(10):
            s = 0.0
            for j, pj in enumerate(psi):
                k = np.arange(psi.size)
                s += pj * np.sum(psi * gfull[h + j - k + 799])
            out.append(s)
        np.testing.assert_allclose(acvf_convolution(ArfimaParams(d, phi, theta), 10).gamma, out, rtol=1e-10)


class TestFilters:
    def test_frac_diff_identity_and_first_difference(self):
        y = np.array([1.0, 2, 3, 4])
        np.testing.assert_allclose(frac_diff(y, 0.0), y)
        np.testing.assert_allclose(frac_diff(y, 1.0), [1, 1, 1, 1])

    def test_frac_diff_round_trip(self):
        y = np.random.default_rng(1).standard_normal(512)
        np.testing.assert_allclose(frac_diff(frac_diff(y, 0.3), -0.3), y, atol=1e-8)

    def test_weights_recursion(self):
        w = frac_diff_weights(0.3, 5)
        np.testing.assert_allclose(w, [1, -0.3, -0.3 * 0.7 / 2, -0.3 * 0.7 * 1.7 / 6, -0.3 * 0.7 * 1.7 * 2.7 / 24])

    def test_arma_filter_identity_and_round_trip(self):
        y = np.random.default_rng(2).standard_normal(300)
        np.testing.assert_array_equal(arma_filter(y, 0, 0), y)
        np.testing.assert_allclose(arma_unfilter(arma_filter(y, 0.6, -0.7), 0.6, -0.7), y, atol=1e-10)

    def test_arma_filter_recursion(self):
        y = np.array([1.0, 2.0, -1.0])
        z = arma_filter(y, 0.5, 0.4)
        assert z[0] == 1.0
        assert z[1] == pytest.approx(2.0 - 0.5 * 1.0 - 0.4 * 1.0)
        assert z[2] == pytest.approx(-1.0 - 0.5 * 2.0 - 0.4 * z[1])

    def test_whitening(self):
        phi, theta, n = 0.5, 0.5, 20000
        e = np.random.default_rng(4).standard_normal(n + 500)
        y = signal.lfilter([1, theta], [1, -phi], e)[500:]
        z = arma_filter(y, phi, theta)[50:]
        r1 = np.corrcoef(z[:-1], z[1:])[0, 1]
        assert abs(r1) < 3 / np.sqrt(z.size)


class TestSimulate:
    def test_white_noise_variance(self):
        y = simulate_arfima(ArfimaParams(d=0.0), 10**5, seed=1)
        assert 0.99 <= y.var(ddof=1) <= 1.01

    def test_determinism(self):
        p = ArfimaParams(d=0.3, phi=0.2)
        np.testing.assert_array_equal(simulate_arfima(p, 200, seed=5), simulate_arfima(p, 200, seed=5))

    def test_methods_agree_in_distribution(self):
        # Levinson and Cholesky both multiply the same normals by a lower-triangular root
        p = ArfimaParams(d=0.3, phi=0.2, theta=-0.3)
        a = simulate_arfima(p, 150, seed=9, method="levinson")
        b = simulate_arfima(p, 150, seed=9, method="cholesky")
        np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-10)

    def test_acvf_monte_carlo(self):
        d, n, reps = 0.3, 256, 400
        g = acvf_arfima0d0(d, 1.0, 6).gamma
        rng = np.random.default_rng(17)
        est = np.empty((reps, 6))
        for r in range(reps):
            y = simulate_arfima(ArfimaParams(d=d), n, seed=rng)
            est[r] = [np.mean(y[: n - h] * y[h:]) for h in range(6)]
        se = est.std(axis=0, ddof=1) / np.sqrt(reps)
        assert np.all(np.abs(est.mean(axis=0) - g) < 3 * se)

    def test_rejects_short(self):
        with pytest.raises(ValueError):
            simulate_arfima(ArfimaParams(d=0.1), 1, seed=0)
