"""Closed-form and numerically solved limiting quantities.

Limiting choice probabilities and scaled rewards in both scaling regimes,
invariant states of the fluid drift for linear and polynomial weight rules,
the embedded update-point chain of the slow-update regime, and the
heterogeneous-decay reduction.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import fluid
from .params import LINEAR, WeightFn, effective_reward_rates


class Regime(enum.Enum):
    """Scaling of the update rate relative to memory decay.

    ABUNDANT: updates much faster than decay (beta_m * m -> infinity).
    DEFICIENT: updates much slower than decay (beta_m * m -> 0).
    The comparable-rate case is not covered by the theory and is rejected.
    """

    ABUNDANT = "abundant"
    DEFICIENT = "deficient"


class Stability(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class InvariantReport:
    """Invariant state(s) of the fluid drift with diagnostics."""

    states: tuple          # of (q vector, Stability)
    case: str              # which formula branch applied
    residuals: tuple       # L1 drift norm per state

    def single(self) -> np.ndarray:
        if len(self.states) != 1:
            raise ValueError(f"expected a unique invariant state, got {len(self.states)}")
        return self.states[0][0]


def _validated(lam, alpha0):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0) or np.any(np.diff(lam) > 0):
        raise ValueError("lam must be positive and sorted non-increasing")
    if len(lam) > 1 and lam[0] <= lam[1]:
        raise ValueError("lam[0] must strictly exceed lam[1]")
    if alpha0 <= 0:
        raise ValueError("alpha0 must be strictly positive")
    return lam


def limit_choice_probs(lam, alpha0: float, regime: Regime) -> np.ndarray:
    """Limiting steady-state choice probabilities c_k."""
    lam = _validated(lam, alpha0)
    K = len(lam)
    if regime is Regime.ABUNDANT:
        if alpha0 <= lam[0] / K:
            c = np.full(K, alpha0 / lam[0])
            c[0] = 1.0 - (K - 1) * alpha0 / lam[0]
        else:
            c = np.full(K, 1.0 / K)
        return c
    w = np.maximum(lam, alpha0) + (K - 1) * alpha0
    return w / w.sum()


def limit_rewards(lam, alpha0: float, regime: Regime) -> np.ndarray:
    """Limiting expected scaled recallable rewards q_k."""
    lam = _validated(lam, alpha0)
    K = len(lam)
    if regime is Regime.ABUNDANT:
        if alpha0 <= lam[0] / K:
            q = (lam / lam[0]) * alpha0
            q[0] = lam[0] - (K - 1) * alpha0
        else:
            q = lam / K
        return q
    w = np.maximum(lam, alpha0) + (K - 1) * alpha0
    return lam * w / w.sum()


def _residual(q, lam, alpha0, weight=LINEAR) -> float:
    return float(np.abs(fluid.drift(q, lam, alpha0, weight)).sum())


def invariant_state_linear(lam, alpha0: float) -> InvariantReport:
    """Unique invariant state of the linear-rule fluid drift."""
    lam = _validated(lam, alpha0)
    K = len(lam)
    if alpha0 <= lam[0] / K:
        q = (lam / lam[0]) * alpha0
        q[0] = lam[0] - (K - 1) * alpha0
        case = "winner-takes-all"
    else:
        q = lam / K
        case = "oblivious"
    return InvariantReport(
        ((q, Stability.STABLE),), case, (_residual(q, lam, alpha0),)
    )


def _bisect(f, lo: float, hi: float, rtol: float = 1e-12, max_iter: int = 200) -> float:
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise RuntimeError(f"root not bracketed on [{lo:g}, {hi:g}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or (hi - lo) <= rtol * max(1.0, abs(mid)):
            return mid
        if flo * fm < 0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def poly_case2_threshold(lam, eta: float) -> float:
    """alpha0 threshold below which every coordinate sits above the floor."""
    lam = np.asarray(lam, dtype=float)
    r = eta / (1.0 - eta)
    return float(lam[-1] * lam[-1] ** r / np.sum(lam**r))


def invariant_state_poly(lam, alpha0: float, eta: float) -> InvariantReport:
    """Unique invariant state of the polynomial rule with exponent in (0,1).

    Case boundaries follow the floor structure of the fixed point: all
    coordinates below the floor, all above it, or a split at an index found by
    scanning the threshold function; the split case reduces to a scalar
    monotone equation solved by bisection.
    """
    if not (0.0 < eta < 1.0):
        raise ValueError("eta must lie in (0, 1)")
    lam = _validated(lam, alpha0)
    K = len(lam)
    weight = WeightFn("poly", eta=eta)
    r = eta / (1.0 - eta)

    if alpha0 > lam[0] / K:
        q = lam / K
        case = "oblivious"
    elif alpha0 <= poly_case2_threshold(lam, eta):
        q = lam * lam**r / np.sum(lam**r)
        case = "all-above-floor"
    else:
        # threshold scan: largest i with lam_i >= g(i), where
        # g(i) = alpha0 * [(K - i) + sum_{j<=i} (lam_j/lam_i)^r]
        def g(i):
            return alpha0 * ((K - i) + np.sum((lam[:i] / lam[i - 1]) ** r))

        candidates = [i for i in range(1, K) if lam[i - 1] >= g(i)]
        if not candidates:
            raise RuntimeError("no valid split index; threshold scan failed")
        i_star = max(candidates)
        S = np.sum((lam[:i_star] / lam[i_star - 1]) ** r)
        lam_star = lam[i_star - 1]

        def f(x):
            return x ** (1.0 - eta) * ((K - i_star) * alpha0**eta + x**eta * S) - lam_star

        q_star = _bisect(f, alpha0, lam[0])
        q = np.empty(K)
        q[:i_star] = q_star * (lam[:i_star] / lam_star) ** (1.0 / (1.0 - eta))
        q[i_star:] = q_star ** (1.0 - eta) * (lam[i_star:] / lam_star) * alpha0**eta
        case = f"split(i*={i_star})"
    return InvariantReport(
        ((q, Stability.STABLE),), case, (_residual(q, lam, alpha0, weight),)
    )


def poly_case3_fixed_point_oracle(
    lam, alpha0: float, eta: float, i_star: int, damping: float = 0.5, tol: float = 1e-13
) -> float:
    """Damped fixed-point iteration for the split-case scalar equation.

    Independent of the bisection path: iterates
    x <- (1-d)*x + d * (lam_i* / ((K-i*)*a^eta + x^eta * S))^(1/(1-eta)).
    """
    lam = np.asarray(lam, dtype=float)
    K = len(lam)
    r = eta / (1.0 - eta)
    S = np.sum((lam[:i_star] / lam[i_star - 1]) ** r)
    lam_star = lam[i_star - 1]
    x = max(alpha0, 1.0)
    for _ in range(100_000):
        nxt = (lam_star / ((K - i_star) * alpha0**eta + x**eta * S)) ** (1.0 / (1.0 - eta))
        new = (1.0 - damping) * x + damping * nxt
        if abs(new - x) <= tol * max(1.0, abs(new)):
            return new
        x = new
    raise RuntimeError("fixed-point iteration did not converge")


def _probe_stability(q, lam, alpha0, weight, eps=1e-3, T=50.0, return_tol=1e-4):
    """Perturb along (eps, -eps) and (-eps, eps), integrate, check return."""
    q = np.asarray(q, dtype=float)
    for direction in (np.array([eps, -eps]), np.array([-eps, eps])):
        start = np.maximum(q + direction, 0.0)
        traj = fluid.integrate(start, lam, alpha0, T=T, dt=1e-3, weight=weight)
        if np.abs(traj.final - q).sum() > return_tol:
            return Stability.UNSTABLE
    return Stability.STABLE


def invariant_states_eta_gt1_K2(
    lam1: float, lam2: float, eta: float, alpha0: float
) -> InvariantReport:
    """The three invariant states of the two-action super-linear rule.

    Requires alpha0 below the interior-state threshold; the interior state is
    closed-form, the two boundary states come from a scalar bisection each.
    Stability labels are assigned by a perturb-and-integrate probe.
    """
    if eta <= 1.0:
        raise ValueError("eta must exceed 1")
    r = eta / (1.0 - eta)
    denom = lam1**r + lam2**r
    threshold = lam1 ** (1.0 / (1.0 - eta)) / denom
    if not (0 < alpha0 < threshold):
        raise ValueError(
            f"alpha0 must lie in (0, {threshold:.6g}) for three invariant states"
        )
    lam = np.asarray([lam1, lam2], dtype=float)
    weight = WeightFn("poly", eta=eta)

    q1_interior = np.array(
        [lam1 ** (1.0 / (1.0 - eta)) / denom, lam2 ** (1.0 / (1.0 - eta)) / denom]
    )

    def boundary_state(lam_hi, lam_lo):
        # dominant coordinate solves lam_hi * x^eta / (x^eta + a^eta) = x on (a, lam_hi]
        def f(x):
            return lam_hi * x**eta / (x**eta + alpha0**eta) - x

        x = _bisect(f, alpha0 * (1 + 1e-12), lam_hi)
        other = lam_lo * alpha0**eta / (x**eta + alpha0**eta)
        return x, other

    x2, y2 = boundary_state(lam1, lam2)
    q2 = np.array([x2, y2])
    x3, y3 = boundary_state(lam2, lam1)
    q3 = np.array([y3, x3])

    states = []
    residuals = []
    for q in (q1_interior, q2, q3):
        states.append((q, _probe_stability(q, lam, alpha0, weight)))
        residuals.append(_residual(q, lam, alpha0, weight))
    return InvariantReport(tuple(states), "eta>1,K=2", tuple(residuals))


def deficient_transition_matrix(lam, alpha0: float, weight: WeightFn = LINEAR) -> np.ndarray:
    """Transition kernel of the embedded update-point choice chain.

    Row k floors the diagonal entry w(lam_k) and every off-diagonal entry at
    alpha0, then normalizes.  Non-linear weights follow the sketch-level
    replacement of lam_k by w(lam_k); exact for the linear rule.
    """
    lam = _validated(lam, alpha0)
    K = len(lam)
    wl = np.asarray(weight(lam), dtype=float)
    R = np.full((K, K), alpha0)
    np.fill_diagonal(R, np.maximum(wl, alpha0))
    return R / R.sum(axis=1, keepdims=True)


def stationary_distribution(R: np.ndarray, verify: bool = True) -> np.ndarray:
    """Stationary vector of a row-stochastic kernel by direct elimination.

    Solves x^T R = x^T with sum(x) = 1; optionally cross-checked against
    power iteration to 1e-12.
    """
    R = np.asarray(R, dtype=float)
    K = R.shape[0]
    if R.shape != (K, K):
        raise ValueError("R must be square")
    if np.any(R < 0) or not np.allclose(R.sum(axis=1), 1.0, atol=1e-12):
        raise ValueError("R must be row-stochastic")
    A = R.T - np.eye(K)
    A[-1, :] = 1.0
    b = np.zeros(K)
    b[-1] = 1.0
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("singular stationary system") from exc
    if verify:
        y = np.full(K, 1.0 / K)
        for _ in range(100_000):
            nxt = y @ R
            if np.abs(nxt - y).max() < 1e-16:
                y = nxt
                break
            y = nxt
        if np.abs(x - y).max() > 1e-12:
            raise RuntimeError("direct solve and power iteration disagree")
    return x


def heterogeneous_limits(lam, mu0, alpha0: float, regime: Regime):
    """Limits under action-dependent decay: apply the theory to lam/mu0.

    Effective rates are re-sorted; results are mapped back to the original
    action order.  A tie at the top of the effective rates violates the
    standing strict-gap assumption and is rejected.
    """
    eff = effective_reward_rates(lam, mu0)
    order = np.argsort(-eff, kind="stable")
    sorted_eff = eff[order]
    if len(sorted_eff) > 1 and sorted_eff[0] <= sorted_eff[1]:
        raise ValueError(
            "top two effective rates are equal; the limit theory requires a strict gap"
        )
    c_sorted = limit_choice_probs(sorted_eff, alpha0, regime)
    q_sorted = limit_rewards(sorted_eff, alpha0, regime)
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    return c_sorted[inv], q_sorted[inv]
