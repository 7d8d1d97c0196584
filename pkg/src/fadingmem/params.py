"""Problem parameterization, weight rules, and the reward-matching sampler.

Shared by the stochastic simulator and the fluid engine: a single source of
truth for how instances are described, how the memory-span scaling is
materialized, and how a choice is sampled from recallable-reward weights.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


class DegenerateChoiceError(ValueError):
    """All sampling weights are zero, so the choice distribution is undefined.

    Only reachable with alpha = 0 and an all-zero reward vector.
    """


@dataclass(frozen=True)
class WeightFn:
    """Non-decreasing weight rule w(x) applied to floored rewards.

    kind is one of "linear" (w(x) = x), "poly" (w(x) = x**eta), or
    "exp" (w(x) = exp(c*x), evaluated in log space to avoid overflow).
    """

    kind: str = "linear"
    eta: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "poly", "exp"):
            raise ValueError(f"unknown weight rule {self.kind!r}")
        if self.kind == "poly" and self.eta <= 0:
            raise ValueError("polynomial exponent must be positive")
        if self.kind == "exp" and self.c <= 0:
            raise ValueError("exponential weight constant must be positive")

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear" or (self.kind == "poly" and self.eta == 1.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return x
        if self.kind == "poly":
            return x ** self.eta
        return np.exp(self.c * x)

    def probabilities(self, floored) -> np.ndarray:
        """Normalized weights of an already alpha-floored vector."""
        floored = np.asarray(floored, dtype=float)
        if self.kind == "exp":
            # softmax in log space; subtracting the max keeps exp() finite
            logw = self.c * floored
            w = np.exp(logw - logw.max())
        else:
            w = self(floored)
        total = w.sum()
        if total <= 0.0:
            raise DegenerateChoiceError(
                "all choice weights are zero; distribution undefined"
            )
        return w / total


LINEAR = WeightFn("linear")


def _as_positive_vector(x, name: str, K: int) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (K,):
        raise ValueError(f"{name} must have length {K}, got shape {v.shape}")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise ValueError(f"{name} entries must be finite and strictly positive")
    return v


@dataclass(frozen=True, init=False)
class ModelParams:
    """Full unscaled problem instance.

    lam are reward rates per unit time, sorted non-increasing with a strict
    gap at the top (the standing assumption lambda_1 > lambda_2).  mu are
    per-reward decay rates, beta the update-point rate, alpha the unscaled
    exploration floor.
    """

    K: int
    lam: np.ndarray
    mu: np.ndarray
    beta: float
    alpha: float
    weight: WeightFn = LINEAR
    # set when allow_unsorted re-sorted lam: permutation[i] = original index of slot i
    permutation: tuple | None = None

    def __init__(self, K, lam, mu, beta, alpha, weight=LINEAR, allow_unsorted=False):
        if K < 1:
            raise ValueError("K must be a positive integer")
        lam = _as_positive_vector(lam, "lam", K)
        mu = _as_positive_vector(mu, "mu", K)
        perm = None
        if allow_unsorted:
            order = np.argsort(-lam, kind="stable")
            if not np.array_equal(order, np.arange(K)):
                perm = tuple(int(i) for i in order)
                lam = lam[order]
                mu = mu[order]
        if np.any(np.diff(lam) > 0):
            raise ValueError("lam must be sorted non-increasing")
        if K > 1 and lam[0] <= lam[1]:
            raise ValueError("lam[0] must strictly exceed lam[1]")
        if beta <= 0:
            raise ValueError("beta must be strictly positive")
        if alpha < 0 or not np.isfinite(alpha):
            raise ValueError("alpha must be finite and nonnegative")
        lam.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "K", int(K))
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "beta", float(beta))
        object.__setattr__(self, "alpha", float(alpha))
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "permutation", perm)


@dataclass(frozen=True)
class ScaledInstance:
    """Memory-span-m instance template.

    Holds the m-free base quantities (lam, alpha0, per-action decay constants
    mu0, and the update rate beta, taken as-is); materialize() builds the
    unscaled ModelParams with mu = mu0/m and alpha = alpha0*m.
    """

    K: int
    lam: tuple
    alpha0: float
    m: int
    mu0: tuple | None = None
    beta: float = 1.0
    weight: WeightFn = LINEAR

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("memory-span scale m must be a positive integer")
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be strictly positive")
        lam = tuple(float(x) for x in self.lam)
        if len(lam) != self.K:
            raise ValueError("lam must have K entries")
        if any(a < b for a, b in zip(lam, lam[1:])):
            raise ValueError("lam must be sorted non-increasing")
        if self.K > 1 and lam[0] == lam[1]:
            raise ValueError("the top reward rate must be strictly largest")
        if self.mu0 is None:
            object.__setattr__(self, "mu0", tuple(1.0 for _ in range(self.K)))

    def materialize(self) -> ModelParams:
        mu = np.asarray(self.mu0, dtype=float) / self.m
        return ModelParams(
            self.K, self.lam, mu, self.beta, self.alpha0 * self.m, self.weight
        )

    def with_m(self, m: int) -> "ScaledInstance":
        return replace(self, m=int(m))


def make_rng(seed: int, run_id: int = 0, stream_id: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, run, stream).

    Philox streams are independent for distinct keys, so parallel sweep cells
    reproduce identically regardless of scheduling.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(run_id), int(stream_id)))
    return np.random.Generator(np.random.Philox(ss))


def choice_distribution(Q, alpha: float, weight: WeightFn = LINEAR) -> np.ndarray:
    """Reward-matching probabilities: p_k proportional to w(Q_k v alpha)."""
    Q = np.asarray(Q, dtype=float)
    if not np.all(np.isfinite(Q)):
        raise ValueError("reward vector contains non-finite entries")
    if np.any(Q < 0):
        raise ValueError("reward vector contains negative entries")
    if alpha < 0 or not np.isfinite(alpha):
        raise ValueError("alpha must be finite and nonnegative")
    return weight.probabilities(np.maximum(Q, alpha))


def sample_choice(Q, alpha: float, weight: WeightFn, rng: np.random.Generator) -> int:
    """Draw one action index from the reward-matching distribution."""
    p = choice_distribution(Q, alpha, weight)
    u = rng.random()
    return int(np.searchsorted(np.cumsum(p), u, side="right").clip(0, len(p) - 1))


def effective_reward_rates(lam, mu0) -> np.ndarray:
    """Decay-weighted rates lam_k / mu0_k for heterogeneous-decay instances."""
    lam = np.asarray(lam, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    if lam.shape != mu0.shape:
        raise ValueError("lam and mu0 must have matching shapes")
    if np.any(mu0 <= 0):
        raise ValueError("mu0 entries must be strictly positive")
    return lam / mu0
