"""Exact event-driven simulation of the joint reward-choice process.

Two engines: an aggregate-rate engine for exponential reward lifespans
(memorylessness removes the need to track individual rewards) and a
scheduled-departure engine with a min-heap for general lifespans.  Long runs
go through numba kernels when the weight rule is linear; other weight rules
fall back to a pure-Python loop built on the single-step operations.
A separate embedded-chain sampler jumps directly between update points for
instances whose update rate is far below the event rate.
"""
from __future__ import annotations

import enum
import heapq
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .params import ModelParams, ScaledInstance, make_rng, sample_choice

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f

        return deco if not (args and callable(args[0])) else args[0]


class SimulationCapError(RuntimeError):
    """Event-count safety limit exceeded; carries partial-run diagnostics."""

    def __init__(self, msg, t_reached, events):
        super().__init__(msg)
        self.t_reached = t_reached
        self.events = events


class Event(enum.IntEnum):
    ARRIVAL = 0
    DEPARTURE = 1
    UPDATE = 2


@dataclass(frozen=True)
class LifespanDist:
    """Reward lifespan law: exponential, constant, or Pareto (shape > 1)."""

    kind: str
    p1: float
    p2: float = 0.0

    @staticmethod
    def exponential(mean: float) -> "LifespanDist":
        if mean <= 0:
            raise ValueError("exponential mean must be positive")
        return LifespanDist("exponential", float(mean))

    @staticmethod
    def constant(value: float) -> "LifespanDist":
        if value <= 0:
            raise ValueError("constant lifespan must be positive")
        return LifespanDist("constant", float(value))

    @staticmethod
    def pareto(scale: float, shape: float) -> "LifespanDist":
        if scale <= 0 or shape <= 1:
            raise ValueError("Pareto needs scale > 0 and shape > 1 for a finite mean")
        return LifespanDist("pareto", float(scale), float(shape))

    @property
    def mean(self) -> float:
        if self.kind == "exponential":
            return self.p1
        if self.kind == "constant":
            return self.p1
        return self.p1 * self.p2 / (self.p2 - 1.0)

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "exponential":
            return rng.standard_exponential() * self.p1
        if self.kind == "constant":
            return self.p1
        return self.p1 * rng.random() ** (-1.0 / self.p2)

    def _code(self):
        return {"exponential": 0, "constant": 1, "pareto": 2}[self.kind]


@dataclass
class SystemState:
    """Mutable stochastic state: clock, integer reward counts, current choice.

    departures is a heapq list of (time, action) pairs, present only under
    the scheduled engine; its length always equals Q.sum().
    """

    t: float
    Q: np.ndarray
    C: int
    departures: list | None = None

    def check(self):
        if np.any(self.Q < 0):
            raise AssertionError("negative reward count")
        if self.departures is not None and len(self.departures) != int(self.Q.sum()):
            raise AssertionError("departure schedule size differs from total rewards")


def initial_state(params: ModelParams, rng, scheduled: bool = False) -> SystemState:
    """Q(0) = 0 and C(0) sampled from the (uniform) zero-reward distribution."""
    Q = np.zeros(params.K, dtype=np.int64)
    C = sample_choice(Q, params.alpha, params.weight, rng)
    return SystemState(0.0, Q, C, [] if scheduled else None)


@dataclass
class Trace:
    """Time-weighted occupancy statistics of one run.

    batch_choice_time and batch_reward_integral split the post-burn-in
    accumulators into n_batches equal-time batches (shape (n_batches, K));
    the headline vectors are their sums.  update_samples optionally holds
    reward vectors observed just before update points (one row per update).
    """

    K: int
    choice_time: np.ndarray
    reward_time_integral: np.ndarray
    horizon: float
    burn_in: float
    n_batches: int
    batch_choice_time: np.ndarray
    batch_reward_integral: np.ndarray
    events: int
    updates_seen: int = 0
    update_samples: np.ndarray | None = None


# ---------------------------------------------------------------------------
# single-step operations (reference semantics; also the general-weight engine)
# ---------------------------------------------------------------------------


def step_exponential(state: SystemState, params: ModelParams, rng):
    """One aggregate-rate event: arrival to C, departure from some k, or update."""
    lamC = params.lam[state.C]
    dep_rates = params.mu * state.Q
    total_dep = dep_rates.sum()
    R = lamC + total_dep + params.beta
    state.t += rng.standard_exponential() / R
    u = rng.random() * R
    if u < lamC:
        state.Q[state.C] += 1
        return state, Event.ARRIVAL, state.C
    if u < lamC + total_dep:
        u -= lamC
        acc = 0.0
        k = params.K - 1
        for i in range(params.K):
            acc += dep_rates[i]
            if u < acc:
                k = i
                break
        state.Q[k] -= 1
        return state, Event.DEPARTURE, k
    state.C = sample_choice(state.Q, params.alpha, params.weight, rng)
    return state, Event.UPDATE, state.C


def step_scheduled(state: SystemState, params: ModelParams, lifespan: LifespanDist, rng):
    """One event of the scheduled-departure engine.

    Arrival and update candidates are redrawn each step; both are exponential,
    so discarding the losing candidate is exact by memorylessness.
    """
    if state.departures is None:
        raise ValueError("scheduled engine requires a departure schedule")
    if len(state.departures) != int(state.Q.sum()):
        raise AssertionError("departure schedule size differs from total rewards")
    t_arr = state.t + rng.standard_exponential() / params.lam[state.C]
    t_upd = state.t + rng.standard_exponential() / params.beta
    t_dep = state.departures[0][0] if state.departures else math.inf
    if t_dep <= t_arr and t_dep <= t_upd:
        _, k = heapq.heappop(state.departures)
        state.t = t_dep
        state.Q[k] -= 1
        return state, Event.DEPARTURE, k
    if t_arr <= t_upd:
        state.t = t_arr
        state.Q[state.C] += 1
        heapq.heappush(state.departures, (t_arr + lifespan.sample(rng), state.C))
        return state, Event.ARRIVAL, state.C
    state.t = t_upd
    state.C = sample_choice(state.Q, params.alpha, params.weight, rng)
    return state, Event.UPDATE, state.C


# ---------------------------------------------------------------------------
# batch accumulation
# ---------------------------------------------------------------------------


@njit(cache=True)
def _acc_interval(t0, t1, C, Q, burn_in, horizon, bw, ct, ri):
    """Spread the occupancy of [t0, t1) across equal-time batches."""
    a = t0 if t0 > burn_in else burn_in
    b = t1 if t1 < horizon else horizon
    if b <= a:
        return
    n_batches = ct.shape[0]
    K = ct.shape[1]
    i = int((a - burn_in) / bw)
    if i >= n_batches:
        i = n_batches - 1
    while a < b:
        edge = burn_in + (i + 1) * bw
        seg_end = b if b < edge else edge
        seg = seg_end - a
        if seg > 0.0:
            j = i if i < n_batches else n_batches - 1
            ct[j, C] += seg
            for k in range(K):
                ri[j, k] += Q[k] * seg
        a = seg_end
        i += 1


@njit(cache=True, nogil=True)
def _kernel_exponential(
    lam, mu, beta, alpha, Q, C, horizon, burn_in, bw, ct, ri,
    samples, sample_cap, event_cap, rng,
):
    t = 0.0
    events = 0
    updates = 0
    n_samples = 0
    K = lam.shape[0]
    status = 0
    while t < horizon:
        if events >= event_cap:
            status = 1
            break
        lamC = lam[C]
        total_dep = 0.0
        for k in range(K):
            total_dep += mu[k] * Q[k]
        R = lamC + total_dep + beta
        t_next = t + rng.standard_exponential() / R
        _acc_interval(t, t_next, C, Q, burn_in, horizon, bw, ct, ri)
        t = t_next
        events += 1
        if t >= horizon:
            break
        u = rng.random() * R
        if u < lamC:
            Q[C] += 1
        elif u < lamC + total_dep:
            u -= lamC
            acc = 0.0
            for k in range(K):
                acc += mu[k] * Q[k]
                if u < acc:
                    Q[k] -= 1
                    break
        else:
            if t > burn_in:
                updates += 1
                if n_samples < sample_cap:
                    for k in range(K):
                        samples[n_samples, k] = Q[k]
                    n_samples += 1
            total_w = 0.0
            for k in range(K):
                w = Q[k] if Q[k] > alpha else alpha
                total_w += w
            u2 = rng.random() * total_w
            acc = 0.0
            C = K - 1
            for k in range(K):
                w = Q[k] if Q[k] > alpha else alpha
                acc += w
                if u2 < acc:
                    C = k
                    break
    return t, C, events, updates, n_samples, status


@njit(cache=True)
def _heap_push(times, acts, size, t, a):
    i = size
    times[i] = t
    acts[i] = a
    while i > 0:
        p = (i - 1) // 2
        if times[p] <= times[i]:
            break
        times[p], times[i] = times[i], times[p]
        acts[p], acts[i] = acts[i], acts[p]
        i = p
    return size + 1


@njit(cache=True)
def _heap_pop(times, acts, size):
    t0 = times[0]
    a0 = acts[0]
    size -= 1
    times[0] = times[size]
    acts[0] = acts[size]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        s = i
        if l < size and times[l] < times[s]:
            s = l
        if r < size and times[r] < times[s]:
            s = r
        if s == i:
            break
        times[s], times[i] = times[i], times[s]
        acts[s], acts[i] = acts[i], acts[s]
        i = s
    return t0, a0, size


@njit(cache=True, nogil=True)
def _kernel_scheduled(
    lam, beta, alpha, Q, C, horizon, burn_in, bw, ct, ri,
    life_code, life_p1, life_p2, samples, sample_cap, event_cap, rng,
):
    t = 0.0
    events = 0
    updates = 0
    n_samples = 0
    K = lam.shape[0]
    status = 0
    cap = 1024
    dep_times = np.empty(cap, dtype=np.float64)
    dep_acts = np.empty(cap, dtype=np.int64)
    heap_size = 0
    while t < horizon:
        if events >= event_cap:
            status = 1
            break
        t_arr = t + rng.standard_exponential() / lam[C]
        t_upd = t + rng.standard_exponential() / beta
        t_dep = dep_times[0] if heap_size > 0 else 1.0e300
        if t_dep <= t_arr and t_dep <= t_upd:
            t_next = t_dep
        elif t_arr <= t_upd:
            t_next = t_arr
        else:
            t_next = t_upd
        _acc_interval(t, t_next, C, Q, burn_in, horizon, bw, ct, ri)
        t = t_next
        events += 1
        if t >= horizon:
            break
        if t_next == t_dep:
            _, a, heap_size = _heap_pop(dep_times, dep_acts, heap_size)
            Q[a] -= 1
        elif t_next == t_arr:
            Q[C] += 1
            if life_code == 0:
                life = rng.standard_exponential() * life_p1
            elif life_code == 1:
                life = life_p1
            else:
                life = life_p1 * rng.random() ** (-1.0 / life_p2)
            if heap_size == cap:
                cap *= 2
                nt = np.empty(cap, dtype=np.float64)
                na = np.empty(cap, dtype=np.int64)
                nt[:heap_size] = dep_times
                na[:heap_size] = dep_acts
                dep_times = nt
                dep_acts = na
            heap_size = _heap_push(dep_times, dep_acts, heap_size, t + life, C)
        else:
            if t > burn_in:
                updates += 1
                if n_samples < sample_cap:
                    for k in range(K):
                        samples[n_samples, k] = Q[k]
                    n_samples += 1
            total_w = 0.0
            for k in range(K):
                w = Q[k] if Q[k] > alpha else alpha
                total_w += w
            u2 = rng.random() * total_w
            acc = 0.0
            C = K - 1
            for k in range(K):
                w = Q[k] if Q[k] > alpha else alpha
                acc += w
                if u2 < acc:
                    C = k
                    break
    return t, C, events, updates, n_samples, status


# ---------------------------------------------------------------------------
# the long-run driver
# ---------------------------------------------------------------------------


def _accumulate_py(t0, t1, C, Q, burn_in, horizon, bw, ct, ri):
    a = max(t0, burn_in)
    b = min(t1, horizon)
    if b <= a:
        return
    n_batches = ct.shape[0]
    i = min(int((a - burn_in) / bw), n_batches - 1)
    while a < b:
        edge = burn_in + (i + 1) * bw
        seg_end = min(b, edge)
        seg = seg_end - a
        if seg > 0.0:
            j = min(i, n_batches - 1)
            ct[j, C] += seg
            ri[j] += Q * seg
        a = seg_end
        i += 1


def simulate(
    params: ModelParams,
    horizon: float,
    seed: int,
    run_id: int = 0,
    burn_in: float | None = None,
    n_batches: int = 32,
    lifespan: LifespanDist | None = None,
    collect_update_samples: int = 0,
    event_cap: int = 5_000_000_000,
    force_python: bool = False,
) -> Trace:
    """Run one trajectory from Q(0) = 0 and return its time-weighted trace.

    lifespan = None selects the aggregate-rate engine (exponential lifespans
    implied by params.mu); a LifespanDist selects the scheduled engine, which
    requires uniform decay with mean lifespan equal to the distribution mean.
    Deterministic given (seed, run_id) and the engine actually used.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if burn_in is None:
        burn_in = 0.1 * horizon
    if not (0 <= burn_in < horizon):
        raise ValueError("burn_in must lie in [0, horizon)")
    if n_batches < 2:
        raise ValueError("n_batches must be at least 2")
    if params.alpha <= 0:
        raise ValueError("simulation requires a positive exploration parameter")
    scheduled = lifespan is not None
    if scheduled:
        inv_mu = 1.0 / params.mu
        if not np.allclose(inv_mu, lifespan.mean, rtol=1e-9):
            raise ValueError(
                "scheduled engine requires uniform decay with mean lifespan "
                f"{lifespan.mean:g}; params imply {inv_mu}"
            )

    rng = make_rng(seed, run_id)
    state = initial_state(params, rng, scheduled=scheduled)
    K = params.K
    bw = (horizon - burn_in) / n_batches
    ct = np.zeros((n_batches, K))
    ri = np.zeros((n_batches, K))
    sample_cap = int(collect_update_samples)
    samples = np.zeros((max(sample_cap, 1), K), dtype=np.int64)

    use_kernel = HAVE_NUMBA and params.weight.is_linear and not force_python
    if use_kernel:
        if scheduled:
            t, C, events, updates, n_samples, status = _kernel_scheduled(
                params.lam, params.beta, params.alpha, state.Q, state.C,
                float(horizon), float(burn_in), bw, ct, ri,
                lifespan._code(), lifespan.p1, lifespan.p2,
                samples, sample_cap, int(event_cap), rng,
            )
        else:
            t, C, events, updates, n_samples, status = _kernel_exponential(
                params.lam, params.mu, params.beta, params.alpha, state.Q, state.C,
                float(horizon), float(burn_in), bw, ct, ri,
                samples, sample_cap, int(event_cap), rng,
            )
        if status != 0:
            raise SimulationCapError(
                f"event cap {event_cap} reached at t={t:.6g} after {events} events",
                t, events,
            )
    else:
        events = 0
        updates = 0
        n_samples = 0
        stepper = (
            (lambda: step_scheduled(state, params, lifespan, rng))
            if scheduled
            else (lambda: step_exponential(state, params, rng))
        )
        while state.t < horizon:
            if events >= event_cap:
                raise SimulationCapError(
                    f"event cap {event_cap} reached at t={state.t:.6g} "
                    f"after {events} events",
                    state.t, events,
                )
            t_prev = state.t
            C_prev = state.C
            Q_prev = state.Q.copy()
            _, ev, _k = stepper()
            _accumulate_py(t_prev, state.t, C_prev, Q_prev, burn_in, horizon, bw, ct, ri)
            events += 1
            if ev is Event.UPDATE and state.t > burn_in and state.t < horizon:
                updates += 1
                if n_samples < sample_cap:
                    samples[n_samples] = Q_prev
                    n_samples += 1

    return Trace(
        K=K,
        choice_time=ct.sum(axis=0),
        reward_time_integral=ri.sum(axis=0),
        horizon=float(horizon),
        burn_in=float(burn_in),
        n_batches=n_batches,
        batch_choice_time=ct,
        batch_reward_integral=ri,
        events=int(events),
        updates_seen=int(updates),
        update_samples=samples[:n_samples].copy() if sample_cap > 0 else None,
    )


# ---------------------------------------------------------------------------
# path sampling on a fixed time grid (fluid-comparison runs)
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _kernel_path(lam, mu, beta, alpha, Q, C, t_grid, out, rng):
    t = 0.0
    gi = 0
    n = t_grid.shape[0]
    K = lam.shape[0]
    while gi < n:
        lamC = lam[C]
        total_dep = 0.0
        for k in range(K):
            total_dep += mu[k] * Q[k]
        R = lamC + total_dep + beta
        t_next = t + rng.standard_exponential() / R
        while gi < n and t_grid[gi] < t_next:
            for k in range(K):
                out[gi, k] = Q[k]
            gi += 1
        t = t_next
        if gi >= n:
            break
        u = rng.random() * R
        if u < lamC:
            Q[C] += 1
        elif u < lamC + total_dep:
            u -= lamC
            acc = 0.0
            for k in range(K):
                acc += mu[k] * Q[k]
                if u < acc:
                    Q[k] -= 1
                    break
        else:
            total_w = 0.0
            for k in range(K):
                w = Q[k] if Q[k] > alpha else alpha
                total_w += w
            u2 = rng.random() * total_w
            acc = 0.0
            C = K - 1
            for k in range(K):
                w = Q[k] if Q[k] > alpha else alpha
                acc += w
                if u2 < acc:
                    C = k
                    break


def sample_path(params: ModelParams, t_grid, seed: int, run_id: int = 0) -> np.ndarray:
    """Record Q(t) on a fixed unscaled time grid along one trajectory.

    Returns an array of shape (len(t_grid), K); entries are the reward counts
    held just before each grid instant.  Grid must be non-decreasing.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be a non-decreasing 1-d array")
    if params.alpha <= 0:
        raise ValueError("simulation requires a positive exploration parameter")
    rng = make_rng(seed, run_id)
    state = initial_state(params, rng)
    out = np.zeros((t_grid.size, params.K), dtype=np.int64)
    if HAVE_NUMBA and params.weight.is_linear:
        _kernel_path(
            params.lam, params.mu, params.beta, params.alpha,
            state.Q, state.C, t_grid, out, rng,
        )
    else:
        gi = 0
        while gi < t_grid.size:
            Q_prev = state.Q.copy()
            step_exponential(state, params, rng)
            while gi < t_grid.size and t_grid[gi] < state.t:
                out[gi] = Q_prev
                gi += 1
    return out


# ---------------------------------------------------------------------------
# embedded update-point chain (slow-update instances)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SnapshotResult:
    """Paired (choice at update n, scaled rewards just before update n+1)."""

    choices: np.ndarray       # shape (n,), action active during each interval
    scaled_Q: np.ndarray      # shape (n, K), Q/m at the following update point
    counts: np.ndarray        # samples per conditioning class

    def conditional_mean(self, k: int) -> np.ndarray:
        mask = self.choices == k
        if not mask.any():
            raise ValueError(f"no samples with choice {k}")
        return self.scaled_Q[mask].mean(axis=0)


def conditional_update_snapshot(
    instance: ScaledInstance,
    seed: int,
    n_samples: int,
    warmup: int = 100,
    min_per_class: int = 1,
) -> SnapshotResult:
    """Sample the embedded chain at update points by exact inter-update jumps.

    Between updates the reward counts evolve as independent infinite-server
    queues, so over a gap of length d each existing reward survives with
    probability exp(-mu_k d) (binomial thinning) and the chosen action gains
    a Poisson-distributed batch with the transient infinite-server mean.
    This skips the event-level simulation entirely, which is what makes very
    small update rates tractable.
    """
    params = instance.materialize()
    if params.beta * instance.m > 0.1:
        warnings.warn(
            "update rate times memory span is not small; the embedded-chain "
            "limit being probed here may be a poor description",
            stacklevel=2,
        )
    rng = make_rng(seed)
    K = params.K
    Q = np.zeros(K, dtype=np.int64)
    C = sample_choice(Q, params.alpha, params.weight, rng)
    choices = np.empty(n_samples, dtype=np.int64)
    scaled = np.empty((n_samples, K))
    for n in range(-warmup, n_samples):
        gap = rng.standard_exponential() / params.beta
        surv = np.exp(-params.mu * gap)
        Q = rng.binomial(Q, surv)
        Q[C] += rng.poisson(params.lam[C] * (1.0 - surv[C]) / params.mu[C])
        if n >= 0:
            choices[n] = C
            scaled[n] = Q / instance.m
        C = sample_choice(Q, params.alpha, params.weight, rng)
    counts = np.bincount(choices, minlength=K)
    if np.any(counts < min_per_class):
        raise RuntimeError(
            f"insufficient samples per conditioning class: counts {counts.tolist()}"
        )
    return SnapshotResult(choices, scaled, counts)
