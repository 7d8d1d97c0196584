"""Steady-state estimation from traces and the statistical comparisons.

Batch-means point estimates with standard errors, tolerance-band comparison
against theoretical values, and the infinite-server stochastic-dominance
check on update-point samples.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .sim import Trace


@dataclass(frozen=True)
class SteadyEstimate:
    """Point estimates with batch-means standard errors."""

    choice_frac: np.ndarray
    choice_se: np.ndarray
    qbar_scaled: np.ndarray
    qbar_se: np.ndarray
    n_batches: int
    effective_horizon: float


def estimate(trace: Trace, m: int) -> SteadyEstimate:
    """Time-average choice fractions and scaled rewards with batch-means s.e."""
    eff = trace.horizon - trace.burn_in
    if eff <= 0:
        raise ValueError("degenerate trace: zero effective horizon")
    if trace.n_batches < 2:
        raise ValueError("need at least 2 batches for standard errors")
    bw = eff / trace.n_batches
    cf_batches = trace.batch_choice_time / bw
    qb_batches = trace.batch_reward_integral / (m * bw)
    n = trace.n_batches
    return SteadyEstimate(
        choice_frac=trace.choice_time / eff,
        choice_se=cf_batches.std(axis=0, ddof=1) / np.sqrt(n),
        qbar_scaled=trace.reward_time_integral / (m * eff),
        qbar_se=qb_batches.std(axis=0, ddof=1) / np.sqrt(n),
        n_batches=n,
        effective_horizon=eff,
    )


def pool(estimates) -> SteadyEstimate:
    """Average independent replications; s.e. combined as root-mean-square / n."""
    ests = list(estimates)
    n = len(ests)
    if n == 0:
        raise ValueError("nothing to pool")
    if n == 1:
        return ests[0]
    cf = np.mean([e.choice_frac for e in ests], axis=0)
    qb = np.mean([e.qbar_scaled for e in ests], axis=0)
    cf_se = np.sqrt(np.mean([e.choice_se**2 for e in ests], axis=0) / n)
    qb_se = np.sqrt(np.mean([e.qbar_se**2 for e in ests], axis=0) / n)
    return SteadyEstimate(
        cf, cf_se, qb, qb_se,
        n_batches=sum(e.n_batches for e in ests),
        effective_horizon=sum(e.effective_horizon for e in ests),
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Per-coordinate tolerance-band verdicts for one estimate vs theory."""

    choice_pass: np.ndarray
    choice_dev: np.ndarray
    choice_tol: np.ndarray
    qbar_pass: np.ndarray
    qbar_dev: np.ndarray
    qbar_tol: np.ndarray

    @property
    def all_pass(self) -> bool:
        return bool(self.choice_pass.all() and self.qbar_pass.all())


def compare_to_theory(
    est: SteadyEstimate,
    c_theory,
    q_theory,
    z: float = 3.0,
    choice_allowance: float = 0.02,
    qbar_allowance: float | None = None,
) -> ComparisonReport:
    """Check |estimate - theory| <= z * s.e. + allowance per coordinate.

    The allowance absorbs the finite-memory-span bias that the z-band cannot
    see; the reward default scales with the largest reward rate.
    """
    c_theory = np.asarray(c_theory, dtype=float)
    q_theory = np.asarray(q_theory, dtype=float)
    if c_theory.shape != est.choice_frac.shape or q_theory.shape != est.qbar_scaled.shape:
        raise ValueError("theory vectors must match estimate dimensions")
    if qbar_allowance is None:
        qbar_allowance = 0.05 * float(q_theory.sum())
    c_dev = np.abs(est.choice_frac - c_theory)
    q_dev = np.abs(est.qbar_scaled - q_theory)
    c_tol = z * est.choice_se + choice_allowance
    q_tol = z * est.qbar_se + qbar_allowance
    return ComparisonReport(
        choice_pass=c_dev <= c_tol, choice_dev=c_dev, choice_tol=c_tol,
        qbar_pass=q_dev <= q_tol, qbar_dev=q_dev, qbar_tol=q_tol,
    )


def dominance_check(
    samples, m: int, lambda1: float, confidence: float = 0.99
) -> tuple[bool, float]:
    """Upper-tail dominance of update-point samples by a Poisson(m*lambda1).

    Passes when the empirical complementary CDF never exceeds the Poisson
    complementary CDF plus a DKW band at the given confidence.  Returns the
    verdict and the largest band-adjusted exceedance (negative = clear pass).
    """
    samples = np.asarray(samples)
    n = samples.size
    if n < 10_000:
        raise ValueError(f"need at least 10000 samples, got {n}")
    if not (0 < confidence < 1):
        raise ValueError("confidence must lie in (0, 1)")
    eps = np.sqrt(np.log(2.0 / (1.0 - confidence)) / (2.0 * n))
    rate = m * lambda1
    thresholds = np.arange(0, samples.max() + 1)
    # empirical P(X > x) at every integer threshold seen in the sample
    counts = np.bincount(samples, minlength=thresholds.size)
    emp_ccdf = 1.0 - np.cumsum(counts) / n
    pois_ccdf = stats.poisson.sf(thresholds, rate)
    excess = emp_ccdf - (pois_ccdf + eps)
    worst = float(excess.max())
    return worst <= 0.0, worst
