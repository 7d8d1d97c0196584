"""Deterministic fluid model of the scaled recallable-reward process.

Drift evaluation, fixed-step RK4 integration, the piecewise-linear potential
diagnostic, and empirical convergence-rate fits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import LINEAR, WeightFn


class IntegrationError(RuntimeError):
    pass


class FitWindowError(RuntimeError):
    """Trajectory never enters the log-distance fit window."""


def fluid_choice_probs(q, alpha0: float, weight: WeightFn = LINEAR) -> np.ndarray:
    """p_k(q) proportional to w(q_k v alpha0); alpha0 > 0 keeps it defined."""
    q = np.asarray(q, dtype=float)
    if alpha0 <= 0:
        raise ValueError("alpha0 must be strictly positive")
    return weight.probabilities(np.maximum(q, alpha0))


def drift(q, lam, alpha0: float, weight: WeightFn = LINEAR) -> np.ndarray:
    """Coordinate drifts lam_k * p_k(q) - q_k."""
    q = np.asarray(q, dtype=float)
    lam = np.asarray(lam, dtype=float)
    return lam * fluid_choice_probs(q, alpha0, weight) - q


def potential(q, alpha0: float) -> float:
    """Total sampling weight sum_k (q_k v alpha0); floor is K*alpha0."""
    return float(np.maximum(np.asarray(q, dtype=float), alpha0).sum())


def lipschitz_bound(lam, alpha0: float) -> float:
    """Documented L1 Lipschitz constant of the linear-rule drift.

    Each p_k is (2/(K*alpha0))-Lipschitz in L1 (numerator plus denominator
    variation), so ||drift(x)-drift(y)||_1 <= (1 + 2*sum(lam)/(K*alpha0)) ||x-y||_1.
    """
    lam = np.asarray(lam, dtype=float)
    return 1.0 + 2.0 * lam.sum() / (len(lam) * alpha0)


@dataclass(frozen=True)
class FluidTrajectory:
    """Sampled fluid solution: states[i] = q(times[i])."""

    times: np.ndarray
    states: np.ndarray
    dt: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv_rows(self):
        for t, q in zip(self.times, self.states):
            yield [t, *q]


_CLAMP = 1e-12


def integrate(
    q0,
    lam,
    alpha0: float,
    T: float,
    dt: float = 1e-3,
    weight: WeightFn = LINEAR,
) -> FluidTrajectory:
    """Classic RK4 with fixed step, clamping float-error negatives to zero.

    The drift has a Lipschitz kink at q_k = alpha0, so formal 4th order is
    lost crossing it; step-halving bounds the realized error in tests.
    """
    if T <= 0:
        raise ValueError("horizon T must be positive")
    if not (0 < dt <= 0.01):
        raise ValueError("dt must lie in (0, 0.01]")
    q = np.asarray(q0, dtype=float).copy()
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        raise ValueError("initial state must be finite and nonnegative")
    lam = np.asarray(lam, dtype=float)

    n_steps = int(np.ceil(T / dt))
    stride = max(1, int(np.ceil(0.01 / dt)))
    times = [0.0]
    states = [q.copy()]
    t = 0.0
    for step in range(1, n_steps + 1):
        h = min(dt, T - t)
        k1 = drift(q, lam, alpha0, weight)
        k2 = drift(q + 0.5 * h * k1, lam, alpha0, weight)
        k3 = drift(q + 0.5 * h * k2, lam, alpha0, weight)
        k4 = drift(q + h * k3, lam, alpha0, weight)
        q = q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
        if not np.all(np.isfinite(q)):
            raise IntegrationError(f"non-finite state at t={t:.6g}")
        low = q.min()
        if low < 0.0:
            if low < -_CLAMP:
                raise IntegrationError(
                    f"negative coordinate {low:.3e} at t={t:.6g} exceeds clamp threshold"
                )
            q = np.maximum(q, 0.0)
        if step % stride == 0 or step == n_steps:
            times.append(t)
            states.append(q.copy())
    return FluidTrajectory(np.asarray(times), np.asarray(states), dt)


def convergence_rate(
    traj: FluidTrajectory,
    qI,
    window=(1e-8, 1e-1),
) -> tuple[float, float]:
    """Least-squares slope of log ||q(t)-qI||_1 inside the distance window.

    Returns (slope, R^2).  Raises FitWindowError when the trajectory never
    produces distances inside the window (e.g. started at the invariant state).
    """
    qI = np.asarray(qI, dtype=float)
    dist = np.abs(traj.states - qI).sum(axis=1)
    if dist[-1] >= 1e-6:
        raise ValueError("trajectory has not converged; extend the horizon")
    lo, hi = window
    mask = (dist >= lo) & (dist <= hi)
    if mask.sum() < 3:
        raise FitWindowError("log-distance fit window never entered")
    t = traj.times[mask]
    y = np.log(dist[mask])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(r2)
