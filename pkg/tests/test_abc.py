import math

import numpy as np
import pytest

from arfimabayes.abc import (
    AbcConfig,
    SummaryStats,
    abc_distances,
    abc_parallel_driver,
    accept,
    nearest_rank_quantile,
    observed_summaries,
    read_scratch,
    run_abc,
    simulate_records,
)
from arfimabayes.model import ArfimaParams, simulate_arfima


def stats_from(periodogram, pooled, arma, var):
    return SummaryStats(np.asarray(periodogram, float), np.asarray(pooled, float), np.asarray(arma, float), var)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(q=0.0), dict(q=1.5), dict(q_sigma2=0.0), dict(variant=4),
                                    dict(M=-1), dict(workers=0), dict(arma_summary="ols")])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            AbcConfig(seed=1, **kw)

    def test_missing_seed_is_drawn(self, caplog):
        with caplog.at_level("WARNING"):
            cfg = AbcConfig()
        assert isinstance(cfg.seed, int)
        assert "no seed" in caplog.text

    def test_provenance(self):
        assert AbcConfig(seed=1, variant=3).provenance == "abc-logp"


class TestDistances:
    def test_identical(self):
        s = stats_from(np.arange(30.0), [1, 2], [0.1, 0.2], 1.3)
        for v in (1, 2, 3):
            assert abc_distances(s, s, v) == (0.0, 0.0, 0.0)

    def test_hand_computed(self):
        a = stats_from(np.zeros(25), [0.0, 0.0, 0.0], [0.5, 0.1], 2.0)
        p = np.zeros(25)
        p[[0, 5, 22]] = [1.0, 2.0, 2.0]
        b = stats_from(p, [1.0, 2.0, 2.0], [0.2, 0.5], 1.5)
        h1, h_arma, h_s2 = abc_distances(a, b, 1)
        assert h1 == pytest.approx(3.0)
        assert abc_distances(a, b, 2)[0] == pytest.approx(math.sqrt(5.0))
        assert abc_distances(a, b, 3)[0] == pytest.approx(3.0)
        assert h_arma == pytest.approx(0.5)
        assert h_s2 == pytest.approx(0.5)

    def test_first20_bounded_by_full(self, rng):
        a = stats_from(rng.random(60), rng.random(30), [0, 0], 1.0)
        b = stats_from(rng.random(60), rng.random(30), [0, 0], 1.0)
        assert abc_distances(a, b, 2)[0] <= abc_distances(a, b, 1)[0]

    def test_length_mismatch(self):
        a = stats_from(np.zeros(10), [0.0], [0, 0], 1.0)
        b = stats_from(np.zeros(12), [0.0], [0, 0], 1.0)
        with pytest.raises(ValueError):
            abc_distances(a, b)


class TestQuantileAndAccept:
    def test_nearest_rank(self):
        x = np.arange(1.0, 101.0)
        assert nearest_rank_quantile(x, 0.01) == 1.0
        assert nearest_rank_quantile(x, 0.5) == 50.0
        assert nearest_rank_quantile(x, 0.015) == 2.0
        assert nearest_rank_quantile(x, 1.0) == math.inf

    def test_strict_inequality(self):
        rec = np.zeros((10, 7))
        rec[:, 4] = np.arange(10.0)
        rec[:, 6] = 0.0
        rec[:, 5] = 0.0
        draws = accept(rec, "0d0", q=0.3, q_sigma2=1.0)
        # threshold is the third smallest value (2.0); "< 2.0" keeps 0 and 1
        assert len(draws) == 2

    def test_arma_distance_ignored_without_arma_terms(self):
        rec = np.zeros((10, 7))
        rec[:, 4] = np.arange(10.0)
        rec[:, 5] = np.inf
        assert len(accept(rec, "0d0", 0.5, 1.0)) == 4
        assert len(accept(rec, "0d1", 0.5, 1.0)) == 0

    def test_exchangeable(self, rng):
        rec = rng.random((500, 7))
        rec[:, 0] = np.arange(500)
        perm = rng.permutation(500)
        a = accept(rec, "1d1", 0.2, 0.5)
        b = accept(rec[perm], "1d1", 0.2, 0.5)
        assert set(a.column("d")) == set(b.column("d"))
        assert len(a) <= 0.2 * 500

    def test_empty_acceptance_diagnostic(self, rng):
        rec = rng.random((100, 7))
        rec[:, 4] = 1.0
        draws = accept(rec, "1d1", 0.01, 0.5)
        assert len(draws) == 0 and "diagnostic" in draws.meta


@pytest.fixture(scope="module")
def observed():
    return simulate_arfima(ArfimaParams(d=0.2, theta=0.2), 200, seed=31)


class TestSimulation:
    def test_observed_summaries(self, observed):
        s = observed_summaries(observed, AbcConfig(seed=1, order="0d1"))
        assert s.periodogram.size == 100
        assert s.pooled_logperiodogram.size == 50
        assert np.all(np.isfinite(s.pooled_logperiodogram))
        assert s.arma_mle[0] == 0.0
        assert s.sample_variance == pytest.approx(np.var(observed, ddof=1))

    def test_records_shape_and_positive(self, observed, tmp_path):
        path = tmp_path / "rec.bin"
        cfg = AbcConfig(M=250, seed=3, order="1d1", chunk_size=100, scratch_path=str(path))
        run = simulate_records(observed, cfg)
        assert run.records.shape == (250, 9)
        assert np.all(run.records[:, 4:] >= 0)
        assert path.stat().st_size == 250 * 56
        np.testing.assert_array_equal(read_scratch(path), run.variant_records())

    def test_driver_matches_records(self, observed):
        cfg = AbcConfig(M=120, seed=3, order="0d1", chunk_size=50)
        recs = list(abc_parallel_driver(observed, cfg))
        run = simulate_records(observed, cfg)
        assert len(recs) == 120
        np.testing.assert_array_equal(recs[7].proposal, run.records[7, :4])
        assert recs[7].distances == tuple(run.variant_records()[7, 4:])

    def test_zero_simulations(self, observed):
        assert list(abc_parallel_driver(observed, AbcConfig(M=0, seed=1))) == []

    def test_worker_count_invariance(self, observed):
        a = simulate_records(observed, AbcConfig(M=300, seed=9, order="1d0", chunk_size=64, workers=1))
        b = simulate_records(observed, AbcConfig(M=300, seed=9, order="1d0", chunk_size=64, workers=2))
        np.testing.assert_array_equal(a.records, b.records)

    def test_same_seed_same_draws(self, observed):
        cfg = AbcConfig(M=400, seed=5, order="0d1", q=0.1)
        np.testing.assert_array_equal(run_abc(observed, cfg).samples, run_abc(observed, cfg).samples)

    def test_prior_draws(self, observed):
        run = simulate_records(observed, AbcConfig(M=2000, seed=2, order="1d1", chunk_size=500))
        p = run.records[:, :4]
        assert np.all(np.abs(p[:, 0]) < 0.5) and np.all(np.abs(p[:, 1]) < 1) and np.all(np.abs(p[:, 2]) < 1)
        # IG(28, 30) mean is 30/27
        assert p[:, 3].mean() == pytest.approx(30 / 27, rel=0.02)

    def test_accepted_fraction_bound(self, observed):
        draws = run_abc(observed, AbcConfig(M=1000, seed=4, order="0d1", q=0.05))
        assert len(draws) <= 50

    def test_refinement_lowers_error(self):
        # smaller q on a fixed record set should not move accepted d away from the truth
        better = 0
        for rep in range(10):
            y = simulate_arfima(ArfimaParams(d=0.3), 200, seed=100 + rep)
            run = simulate_records(y, AbcConfig(M=3000, seed=rep, order="0d0", variant=2))
            errs = []
            for q in (0.5, 0.05):
                d = accept(run.variant_records(), "0d0", q, 1.0).column("d")
                errs.append(math.sqrt(np.mean((d - 0.3) ** 2)))
            better += errs[1] <= errs[0]
        assert better >= 8
