import numpy as np
import pytest

from arfimabayes.model import ArfimaParams, simulate_arfima
from arfimabayes.spectral import (
    gph_estimate,
    periodogram,
    periodogram_ordinates,
    pooled_indices,
    pooled_log_periodogram,
)


def dft_periodogram(y):
    """Direct O(n^2) DFT oracle."""
    n = y.size
    t = np.arange(n)
    k = 2 * np.pi * np.arange(n) / n
    return np.abs(np.exp(-1j * np.outer(k, t)) @ y) ** 2 / n


def test_unit_impulse():
    p = periodogram([1.0, 0.0, 0.0, 0.0], full=True)
    np.testing.assert_allclose(p.ordinates, 0.25)
    assert len(periodogram([1.0, 0.0, 0.0, 0.0])) == 2


def test_matches_direct_dft(rng):
    y = rng.standard_normal(37)
    np.testing.assert_allclose(periodogram(y, full=True).ordinates, dft_periodogram(y), rtol=1e-10, atol=1e-12)
    assert len(periodogram(y)) == 18


def test_frequencies_start_at_zero():
    f = periodogram(np.ones(8)).frequencies
    np.testing.assert_allclose(f, 2 * np.pi * np.arange(4) / 8)


def test_parseval(rng):
    y = rng.standard_normal(128)
    assert periodogram(y, full=True).ordinates.sum() == pytest.approx(y @ y, rel=1e-10)


def test_batch_matches_single(rng):
    batch = rng.standard_normal((3, 50))
    np.testing.assert_allclose(periodogram_ordinates(batch)[1], periodogram(batch[1]).ordinates, rtol=1e-12)


def test_long_memory_has_larger_low_frequencies():
    wins = 0
    for seed in range(100):
        lm = simulate_arfima(ArfimaParams(d=0.4), 1024, seed=seed)
        wn = simulate_arfima(ArfimaParams(d=0.0), 1024, seed=10_000 + seed)
        low_lm = periodogram(lm - lm.mean()).ordinates[1:6].mean()
        low_wn = periodogram(wn - wn.mean()).ordinates[1:6].mean()
        wins += low_lm > low_wn
    assert wins >= 95


class TestPooled:
    def test_index_set(self):
        idx = pooled_indices(100, 2, 0, 50)
        np.testing.assert_array_equal(idx, np.arange(2, 51, 2))
        assert idx.size == 25

    def test_j1_is_log_periodogram(self, rng):
        y = rng.standard_normal(64)
        np.testing.assert_allclose(pooled_log_periodogram(y, J=1), np.log(periodogram(y).ordinates), rtol=1e-12)

    def test_pairs_summed(self, rng):
        y = rng.standard_normal(20)
        I = periodogram(y).ordinates
        np.testing.assert_allclose(pooled_log_periodogram(y, J=2), np.log(I[0::2] + I[1::2]), rtol=1e-12)

    def test_scaling(self, rng):
        y = rng.standard_normal(64)
        np.testing.assert_allclose(pooled_log_periodogram(3 * y), pooled_log_periodogram(y) + 2 * np.log(3),
                                   rtol=1e-12)

    def test_zero_sum_dropped(self, caplog):
        y = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
        with caplog.at_level("WARNING"):
            out = pooled_log_periodogram(y, J=1)
        assert out.size < 3
        assert "dropping" in caplog.text

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            pooled_indices(10, 0)
        with pytest.raises(ValueError):
            pooled_indices(10, 2, 0, 6)


def test_gph_recovers_d():
    est = [gph_estimate(simulate_arfima(ArfimaParams(d=0.3), 2048, seed=s)) for s in range(10)]
    assert np.mean(est) == pytest.approx(0.3, abs=0.08)
