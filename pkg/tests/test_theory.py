"""Closed-form limits, invariant-state solvers, and the embedded chain."""
import numpy as np
import pytest

from fadingmem import fluid, theory
from fadingmem.params import LINEAR, WeightFn, make_rng
from fadingmem.theory import Regime, Stability

LAM4 = np.array([8.0, 6.0, 4.0, 2.0])


class TestLimitChoiceProbs:
    def test_abundant_concentrating(self):
        c = theory.limit_choice_probs(LAM4, 0.5, Regime.ABUNDANT)
        assert np.allclose(c, [0.8125, 0.0625, 0.0625, 0.0625])

    def test_abundant_uniform(self):
        c = theory.limit_choice_probs(LAM4, 3.0, Regime.ABUNDANT)
        assert np.allclose(c, 0.25)

    def test_deficient(self):
        c = theory.limit_choice_probs(LAM4, 0.5, Regime.DEFICIENT)
        assert np.allclose(c, np.array([9.5, 7.5, 5.5, 3.5]) / 26)

    def test_sums_to_one_randomized(self):
        rng = make_rng(1)
        for _ in range(50):
            K = int(rng.integers(2, 9))
            lam = np.sort(rng.uniform(0.5, 10, K))[::-1]
            lam[0] = lam[1] + 0.5
            a0 = float(rng.uniform(0.05, 5))
            for reg in Regime:
                c = theory.limit_choice_probs(lam, a0, reg)
                assert abs(c.sum() - 1) < 1e-12 and (c > 0).all()


class TestLimitRewards:
    def test_abundant(self):
        q = theory.limit_rewards(LAM4, 1.0, Regime.ABUNDANT)
        assert np.allclose(q, [5.0, 0.75, 0.5, 0.25])

    def test_abundant_uniform(self):
        q = theory.limit_rewards(LAM4, 3.0, Regime.ABUNDANT)
        assert np.allclose(q, LAM4 / 4)

    def test_deficient(self):
        q = theory.limit_rewards(LAM4, 1.0, Regime.DEFICIENT)
        assert np.allclose(q, [2.75, 1.6875, 0.875, 0.3125])

    def test_matches_invariant_state(self):
        for a0 in (0.5, 1.0, 2.0, 3.0):
            q = theory.limit_rewards(LAM4, a0, Regime.ABUNDANT)
            qI = theory.invariant_state_linear(LAM4, a0).single()
            assert np.array_equal(q, qI)


class TestInvariantStateLinear:
    def test_three_action_example(self):
        rep = theory.invariant_state_linear(np.array([8.0, 6.0, 4.0]), 1.0)
        assert np.allclose(rep.single(), [6.0, 0.75, 0.5])
        assert rep.residuals[0] < 1e-10

    def test_branches_agree_at_boundary(self):
        # alpha0 = lam_1 / K: both formulas give lam_k / K
        rep = theory.invariant_state_linear(LAM4, 2.0)
        assert np.allclose(rep.single(), LAM4 / 4)

    def test_winner_insensitive_to_runner_ups(self):
        a = theory.invariant_state_linear(np.array([8.0, 6.0, 4.0]), 1.0).single()
        b = theory.invariant_state_linear(np.array([8.0, 7.0, 2.0]), 1.0).single()
        assert a[0] == b[0]
        ca = theory.limit_choice_probs(np.array([8.0, 6.0, 4.0]), 1.0, Regime.ABUNDANT)
        cb = theory.limit_choice_probs(np.array([8.0, 7.0, 2.0]), 1.0, Regime.ABUNDANT)
        assert ca[0] == cb[0]

    def test_residuals_randomized(self):
        rng = make_rng(2)
        for _ in range(30):
            K = int(rng.integers(2, 7))
            lam = np.sort(rng.uniform(1, 10, K))[::-1]
            lam[0] = lam[1] + 0.3
            rep = theory.invariant_state_linear(lam, float(rng.uniform(0.1, 4)))
            assert rep.residuals[0] < 1e-10


class TestInvariantStatePoly:
    def test_case1(self):
        rep = theory.invariant_state_poly(LAM4, 3.0, 0.5)
        assert np.allclose(rep.single(), LAM4 / 4)
        assert rep.case == "oblivious"

    def test_case2(self):
        rep = theory.invariant_state_poly(np.array([8.0, 6.0]), 1.0, 0.5)
        assert np.allclose(rep.single(), [64 / 14, 36 / 14], atol=1e-12)
        assert rep.residuals[0] < 1e-10

    def test_case3_vs_fixed_point_oracle(self):
        lam = np.array([8.0, 6.0])
        rep = theory.invariant_state_poly(lam, 2.8, 0.5)
        oracle = theory.poly_case3_fixed_point_oracle(lam, 2.8, 0.5, 1)
        assert abs(rep.single()[0] - oracle) < 1e-9
        assert rep.residuals[0] < 1e-10

    def test_case3_drift_residual_randomized(self):
        rng = make_rng(9)
        n_split = 0
        for _ in range(40):
            K = int(rng.integers(2, 6))
            lam = np.sort(rng.uniform(1, 10, K))[::-1]
            lam[0] = lam[1] + 0.5
            eta = float(rng.uniform(0.2, 0.9))
            a0 = float(rng.uniform(0.05, lam[0] / K))
            rep = theory.invariant_state_poly(lam, a0, eta)
            assert rep.residuals[0] < 1e-10, (lam, a0, eta, rep.case)
            n_split += rep.case.startswith("split")
        assert n_split > 0  # the scan branch must actually be exercised

    def test_rejects_eta_out_of_range(self):
        with pytest.raises(ValueError):
            theory.invariant_state_poly(LAM4, 1.0, 1.5)

    def test_concentration_increases_toward_linear(self):
        lam = np.array([8.0, 6.0])
        shares = []
        for eta in (0.5, 0.7, 0.9, 0.99):
            a0 = 0.5 * theory.poly_case2_threshold(lam, eta)
            q = theory.invariant_state_poly(lam, a0, eta).single()
            shares.append(q[0] / q.sum())
        assert all(a < b for a, b in zip(shares, shares[1:]))


class TestEtaGreaterThanOne:
    def test_three_states_with_stability(self):
        rep = theory.invariant_states_eta_gt1_K2(8.0, 6.0, 2.0, 1.0)
        assert len(rep.states) == 3
        labels = [s.value for _, s in rep.states]
        assert labels == ["unstable", "stable", "stable"]
        assert np.allclose(rep.states[0][0], [2.88, 3.84], atol=1e-10)
        assert rep.states[1][0][0] == pytest.approx(4 + np.sqrt(15), abs=1e-10)
        assert rep.states[1][0][1] == pytest.approx(6 / (8 * (4 + np.sqrt(15))), abs=1e-9)
        assert max(rep.residuals) < 1e-10

    def test_mirrored_state(self):
        rep = theory.invariant_states_eta_gt1_K2(8.0, 6.0, 2.0, 1.0)
        q3 = rep.states[2][0]
        # action 2 dominant: its coordinate solves the same scalar equation with lam_2
        assert abs(6.0 * q3[1] ** 2 / (q3[1] ** 2 + 1.0) - q3[1]) < 1e-9

    def test_precondition_rejected(self):
        with pytest.raises(ValueError):
            theory.invariant_states_eta_gt1_K2(8.0, 6.0, 2.0, 3.0)  # above threshold


class TestDeficientChain:
    def test_two_action_matrix(self):
        R = theory.deficient_transition_matrix(np.array([8.0, 6.0]), 1.0)
        assert np.allclose(R, [[8 / 9, 1 / 9], [1 / 7, 6 / 7]], atol=1e-15)

    def test_rows_sum_to_one(self):
        R = theory.deficient_transition_matrix(LAM4, 0.5)
        assert np.allclose(R.sum(axis=1), 1.0, atol=1e-14)

    def test_stationary_matches_closed_form(self):
        R = theory.deficient_transition_matrix(LAM4, 0.5)
        x = theory.stationary_distribution(R)
        assert np.allclose(x, np.array([9.5, 7.5, 5.5, 3.5]) / 26, atol=1e-13)

    def test_two_action_stationary(self):
        R = np.array([[8 / 9, 1 / 9], [1 / 7, 6 / 7]])
        assert np.allclose(theory.stationary_distribution(R), [9 / 16, 7 / 16])

    def test_uniform_kernel(self):
        assert np.allclose(theory.stationary_distribution(np.full((4, 4), 0.25)), 0.25)

    def test_random_kernel_fixed_point(self):
        rng = make_rng(13)
        R = rng.uniform(0.05, 1.0, (5, 5))
        R /= R.sum(axis=1, keepdims=True)
        x = theory.stationary_distribution(R)
        assert np.abs(x @ R - x).max() < 1e-12

    def test_rejects_non_stochastic(self):
        with pytest.raises(ValueError):
            theory.stationary_distribution(np.array([[0.5, 0.6], [0.5, 0.5]]))

    def test_general_weight_transform(self):
        # squared weights: diagonal floored at alpha0 uses w(lam), not lam
        R = theory.deficient_transition_matrix(
            np.array([3.0, 2.0]), 1.0, WeightFn("poly", eta=2.0)
        )
        assert np.allclose(R, [[0.9, 0.1], [0.2, 0.8]])


class TestHeterogeneous:
    def test_uniform_reduces_to_homogeneous(self):
        c, q = theory.heterogeneous_limits(LAM4, np.ones(4), 1.0, Regime.ABUNDANT)
        assert np.allclose(c, theory.limit_choice_probs(LAM4, 1.0, Regime.ABUNDANT))
        assert np.allclose(q, theory.limit_rewards(LAM4, 1.0, Regime.ABUNDANT))

    def test_order_flip(self):
        c, _ = theory.heterogeneous_limits(
            np.array([8.0, 6.0]), np.array([2.0, 1.0]), 0.5, Regime.ABUNDANT
        )
        assert np.allclose(c, [1 / 12, 11 / 12])

    def test_tie_rejected(self):
        with pytest.raises(ValueError):
            theory.heterogeneous_limits(
                np.array([8.0, 4.0]), np.array([2.0, 1.0]), 0.5, Regime.ABUNDANT
            )


def test_invariant_states_pass_drift_oracle_linear_and_poly():
    rng = make_rng(21)
    for _ in range(20):
        K = int(rng.integers(2, 6))
        lam = np.sort(rng.uniform(1, 10, K))[::-1]
        lam[0] = lam[1] + 0.4
        a0 = float(rng.uniform(0.1, 4))
        q = theory.invariant_state_linear(lam, a0).single()
        assert np.abs(fluid.drift(q, lam, a0, LINEAR)).sum() < 1e-10
