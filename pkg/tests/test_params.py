"""Parameterization, weight rules, and the choice sampler."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fadingmem.params import (
    LINEAR,
    DegenerateChoiceError,
    ModelParams,
    ScaledInstance,
    WeightFn,
    choice_distribution,
    effective_reward_rates,
    make_rng,
    sample_choice,
)

POLY2 = WeightFn("poly", eta=2.0)


class TestChoiceDistribution:
    def test_uniform_at_zero(self):
        p = choice_distribution(np.zeros(4), 1.0, LINEAR)
        assert np.allclose(p, 0.25)

    def test_linear_direct(self):
        p = choice_distribution(np.array([8.0, 2.0]), 2.0, LINEAR)
        assert np.allclose(p, [0.8, 0.2])

    def test_poly_direct(self):
        p = choice_distribution(np.array([4.0, 1.0]), 1.0, POLY2)
        assert np.allclose(p, [16 / 17, 1 / 17])

    def test_rejects_nan_and_negative(self):
        with pytest.raises(ValueError):
            choice_distribution(np.array([np.nan, 1.0]), 1.0, LINEAR)
        with pytest.raises(ValueError):
            choice_distribution(np.array([-1.0, 1.0]), 1.0, LINEAR)

    def test_degenerate_all_zero(self):
        with pytest.raises(DegenerateChoiceError):
            choice_distribution(np.zeros(3), 0.0, LINEAR)

    def test_exp_weight_no_overflow(self):
        p = choice_distribution(np.array([5000.0, 1.0]), 1.0, WeightFn("exp", c=1.0))
        assert np.isfinite(p).all() and p[0] > 0.999


@st.composite
def q_alpha(draw, K_max=6):
    K = draw(st.integers(2, K_max))
    Q = draw(
        st.lists(st.floats(0.0, 1e6, allow_nan=False), min_size=K, max_size=K)
    )
    alpha = draw(st.floats(1e-6, 1e3, allow_nan=False))
    return np.array(Q), alpha


@given(q_alpha())
@settings(max_examples=200, deadline=None)
def test_sums_to_one(qa):
    Q, alpha = qa
    for w in (LINEAR, WeightFn("poly", eta=0.5), POLY2):
        p = choice_distribution(Q, alpha, w)
        assert abs(p.sum() - 1.0) < 1e-12
        assert (p > 0).all()


@given(q_alpha(), st.floats(0.1, 10.0), st.integers(0, 5))
@settings(max_examples=200, deadline=None)
def test_monotone_in_own_reward(qa, bump, idx):
    Q, alpha = qa
    k = idx % len(Q)
    for w in (LINEAR, WeightFn("poly", eta=0.5), POLY2):
        p0 = choice_distribution(Q, alpha, w)
        Q2 = Q.copy()
        Q2[k] += bump
        p1 = choice_distribution(Q2, alpha, w)
        assert p1[k] >= p0[k] - 1e-12


@given(q_alpha(), st.floats(1e-3, 1e3))
@settings(max_examples=200, deadline=None)
def test_linear_scale_invariance(qa, c):
    Q, alpha = qa
    p0 = choice_distribution(Q, alpha, LINEAR)
    p1 = choice_distribution(c * Q, c * alpha, LINEAR)
    assert np.allclose(p0, p1, atol=1e-9)


@given(q_alpha())
@settings(max_examples=200, deadline=None)
def test_alpha_floor(qa):
    Q, alpha = qa
    p = choice_distribution(Q, alpha, LINEAR)
    floor = alpha / (len(Q) * alpha + Q.sum())
    assert (p >= floor - 1e-12).all()


class TestSampleChoice:
    def test_deterministic(self):
        Q = np.array([3.0, 1.0, 2.0])
        a = sample_choice(Q, 1.0, LINEAR, make_rng(7))
        b = sample_choice(Q, 1.0, LINEAR, make_rng(7))
        assert a == b

    def test_frequencies(self):
        rng = make_rng(11)
        Q = np.array([8.0, 2.0])
        n = 100_000
        hits = sum(sample_choice(Q, 2.0, LINEAR, rng) == 0 for _ in range(n))
        # 4-sigma binomial band around 0.8
        assert abs(hits / n - 0.8) < 4 * np.sqrt(0.8 * 0.2 / n)


class TestModelParams:
    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            ModelParams(2, [6.0, 8.0], [1.0, 1.0], 1.0, 1.0)

    def test_rejects_top_tie(self):
        with pytest.raises(ValueError):
            ModelParams(2, [8.0, 8.0], [1.0, 1.0], 1.0, 1.0)

    def test_allow_unsorted_records_permutation(self):
        p = ModelParams(2, [6.0, 8.0], [1.0, 2.0], 1.0, 1.0, allow_unsorted=True)
        assert tuple(p.lam) == (8.0, 6.0)
        assert tuple(p.mu) == (2.0, 1.0)
        assert p.permutation == (1, 0)

    def test_scaling(self):
        inst = ScaledInstance(K=2, lam=(8.0, 6.0), alpha0=1.5, m=100, mu0=(2.0, 1.0))
        params = inst.materialize()
        assert np.allclose(params.mu, [0.02, 0.01])
        assert params.alpha == 150.0


class TestEffectiveRates:
    def test_uniform_identity(self):
        lam = np.array([8.0, 6.0, 4.0, 2.0])
        assert np.array_equal(effective_reward_rates(lam, np.ones(4)), lam)

    def test_reordering_case(self):
        assert np.allclose(
            effective_reward_rates([8.0, 6.0], [2.0, 1.0]), [4.0, 6.0]
        )

    def test_three_actions(self):
        assert np.allclose(
            effective_reward_rates([8.0, 6.0, 4.0], [1.0, 2.0, 4.0]), [8.0, 3.0, 1.0]
        )


def test_rng_streams_independent():
    a = make_rng(5, 0, 0).random(4)
    b = make_rng(5, 1, 0).random(4)
    c = make_rng(5, 0, 0).random(4)
    assert not np.allclose(a, b)
    assert np.array_equal(a, c)
