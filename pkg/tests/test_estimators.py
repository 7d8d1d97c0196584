"""Batch-means estimation and the statistical comparison operations."""
import numpy as np
import pytest

from fadingmem import estimators
from fadingmem.params import make_rng
from fadingmem.sim import Trace


def synthetic_trace(choice_time, reward_integral, horizon, burn_in, n_batches=4):
    choice_time = np.asarray(choice_time, dtype=float)
    reward_integral = np.asarray(reward_integral, dtype=float)
    K = len(choice_time)
    return Trace(
        K=K,
        choice_time=choice_time,
        reward_time_integral=reward_integral,
        horizon=horizon,
        burn_in=burn_in,
        n_batches=n_batches,
        batch_choice_time=np.tile(choice_time / n_batches, (n_batches, 1)),
        batch_reward_integral=np.tile(reward_integral / n_batches, (n_batches, 1)),
        events=0,
    )


class TestEstimate:
    def test_arithmetic(self):
        tr = synthetic_trace([75.0, 25.0], [200.0, 100.0], 110.0, 10.0)
        est = estimators.estimate(tr, m=2)
        assert np.allclose(est.choice_frac, [0.75, 0.25])
        assert np.allclose(est.qbar_scaled, [1.0, 0.5])
        assert np.allclose(est.choice_se, 0.0)  # identical batches

    def test_point_estimate_independent_of_batching(self):
        a = estimators.estimate(synthetic_trace([75.0, 25.0], [200.0, 100.0], 110.0, 10.0, 4), 2)
        b = estimators.estimate(synthetic_trace([75.0, 25.0], [200.0, 100.0], 110.0, 10.0, 8), 2)
        assert np.array_equal(a.choice_frac, b.choice_frac)
        assert np.array_equal(a.qbar_scaled, b.qbar_scaled)

    def test_se_scaling_on_iid_batches(self):
        rng = make_rng(1)
        for n in (8, 32):
            vals = rng.normal(10.0, 1.0, (n, 1))
            tr = Trace(
                K=1, choice_time=vals.sum(axis=0), reward_time_integral=vals.sum(axis=0),
                horizon=float(n), burn_in=0.0, n_batches=n,
                batch_choice_time=vals, batch_reward_integral=vals, events=0,
            )
            est = estimators.estimate(tr, 1)
            # batch-means s.e. of an i.i.d. batch mean is about sigma/sqrt(n)
            assert est.choice_se[0] == pytest.approx(1.0 / np.sqrt(n), rel=0.5)

    def test_degenerate_trace(self):
        with pytest.raises(ValueError):
            estimators.estimate(synthetic_trace([1.0], [1.0], 10.0, 10.0), 1)


class TestCompare:
    def test_exact_match_passes(self):
        est = estimators.estimate(
            synthetic_trace([60.0, 40.0], [120.0, 80.0], 100.0, 0.0), 2
        )
        rep = estimators.compare_to_theory(est, [0.6, 0.4], [0.6, 0.4])
        assert rep.all_pass

    def test_large_deviation_fails_without_allowance(self):
        est = estimators.estimate(
            synthetic_trace([60.0, 40.0], [120.0, 80.0], 100.0, 0.0), 2
        )
        rep = estimators.compare_to_theory(
            est, [0.9, 0.1], [0.6, 0.4], choice_allowance=0.0
        )
        assert not rep.choice_pass.all()

    def test_monotone_in_allowance(self):
        est = estimators.estimate(
            synthetic_trace([60.0, 40.0], [120.0, 80.0], 100.0, 0.0), 2
        )
        small = estimators.compare_to_theory(est, [0.7, 0.3], [0.6, 0.4],
                                             choice_allowance=0.01, qbar_allowance=0.01)
        big = estimators.compare_to_theory(est, [0.7, 0.3], [0.6, 0.4],
                                           choice_allowance=0.5, qbar_allowance=0.5)
        assert (big.choice_pass >= small.choice_pass).all()
        assert (big.qbar_pass >= small.qbar_pass).all()


class TestPool:
    def test_single_passthrough(self):
        est = estimators.estimate(
            synthetic_trace([60.0, 40.0], [120.0, 80.0], 100.0, 0.0), 2
        )
        assert estimators.pool([est]) is est

    def test_average(self):
        a = estimators.estimate(synthetic_trace([60.0, 40.0], [120.0, 80.0], 100.0, 0.0), 2)
        b = estimators.estimate(synthetic_trace([80.0, 20.0], [160.0, 40.0], 100.0, 0.0), 2)
        p = estimators.pool([a, b])
        assert np.allclose(p.choice_frac, [0.7, 0.3])


class TestDominance:
    def test_dominated_passes(self):
        rng = make_rng(2)
        samples = rng.poisson(100 * 4.0, size=50_000)
        ok, worst = estimators.dominance_check(samples, 100, 8.0)
        assert ok and worst <= 0

    def test_dominating_fails(self):
        rng = make_rng(3)
        samples = rng.poisson(2 * 100 * 8.0, size=50_000)
        ok, _ = estimators.dominance_check(samples, 100, 8.0)
        assert not ok

    def test_equal_rate_passes_with_band(self):
        rng = make_rng(4)
        samples = rng.poisson(100 * 8.0, size=50_000)
        ok, _ = estimators.dominance_check(samples, 100, 8.0)
        assert ok

    def test_insufficient_samples(self):
        with pytest.raises(ValueError):
            estimators.dominance_check(np.zeros(100, dtype=int), 100, 8.0)
