"""Property-based checks of the core invariants."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import linalg

from arfimabayes.model import (
    ArfimaParams,
    acvf_arfima0d0,
    acvf_arfima_exact,
    acvf_arma11,
    acvf_convolution,
    arma_filter,
    arma_unfilter,
    frac_diff,
)
from arfimabayes.spectral import periodogram

d_st = st.floats(-0.45, 0.45)
coef = st.floats(-0.9, 0.9)
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
SETTINGS = settings(max_examples=60, deadline=None)


@SETTINGS
@given(arrays(np.float64, st.integers(2, 300), elements=finite))
def test_parseval(y):
    total = periodogram(y, full=True).ordinates.sum()
    assert np.isclose(total, y @ y, rtol=1e-8, atol=1e-8)


@SETTINGS
@given(arrays(np.float64, st.integers(2, 200), elements=finite))
def test_periodogram_nonnegative(y):
    assert np.all(periodogram(y).ordinates >= 0)


@SETTINGS
@given(d_st, coef, coef, st.integers(2, 256))
def test_acvf_positive_definite(d, phi, theta, size):
    g = acvf_convolution(ArfimaParams(d, phi, theta), size).gamma
    assert g[0] > 0 and np.all(np.abs(g) <= g[0] * (1 + 1e-12))
    linalg.cholesky(linalg.toeplitz(g), lower=True)


@SETTINGS
@given(d_st, coef, coef, st.floats(0.01, 100.0))
def test_acvf_sigma2_linear(d, phi, theta, c):
    p = ArfimaParams(d, phi, theta)
    np.testing.assert_allclose(acvf_convolution(p.replace(sigma2=c), 30).gamma,
                               c * acvf_convolution(p, 30).gamma, rtol=1e-12)
    np.testing.assert_allclose(acvf_arfima0d0(d, c, 30).gamma, c * acvf_arfima0d0(d, 1.0, 30).gamma, rtol=1e-12)
    np.testing.assert_allclose(acvf_arma11(phi, theta, c, 30).gamma, c * acvf_arma11(phi, theta, 1.0, 30).gamma,
                               rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 0.4).flatmap(lambda a: st.sampled_from([a, -a])), st.floats(0.05, 0.85).flatmap(lambda a: st.sampled_from([a, -a])), coef)
def test_exact_matches_convolution(d, phi, theta):
    p = ArfimaParams(d, phi, theta)
    np.testing.assert_allclose(acvf_arfima_exact(p, 51).gamma, acvf_convolution(p, 51).gamma, rtol=1e-6)


@SETTINGS
@given(arrays(np.float64, st.integers(2, 400), elements=st.floats(-10, 10)), d_st)
def test_frac_diff_round_trip(y, d):
    np.testing.assert_allclose(frac_diff(frac_diff(y, d), -d), y, atol=1e-8 * max(1.0, np.abs(y).max()))


@SETTINGS
@given(arrays(np.float64, st.integers(2, 400), elements=st.floats(-10, 10)), coef, coef)
def test_arma_filter_round_trip(y, phi, theta):
    np.testing.assert_allclose(arma_unfilter(arma_filter(y, phi, theta), phi, theta), y,
                               atol=1e-10 * max(1.0, np.abs(y).max()))
