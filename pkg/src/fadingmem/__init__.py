"""Simulator and numerical-limit toolkit for reinforcement with fading memories.

An agent repeatedly chooses among K actions in proportion to the rewards it
can still recall; rewards arrive while an action is chosen and fade from
memory over time.  This package simulates the exact joint process, integrates
its deterministic fluid approximation, evaluates the closed-form limits of
the choice and reward distributions in both update-rate regimes, and checks
that all three agree.
"""
from .estimators import SteadyEstimate, compare_to_theory, dominance_check, estimate
from .fluid import FluidTrajectory, convergence_rate, drift, integrate, potential
from .params import (
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
from .sim import (
    Event,
    LifespanDist,
    SystemState,
    Trace,
    conditional_update_snapshot,
    sample_path,
    simulate,
    step_exponential,
    step_scheduled,
)
from .theory import (
    InvariantReport,
    Regime,
    Stability,
    deficient_transition_matrix,
    heterogeneous_limits,
    invariant_state_linear,
    invariant_state_poly,
    invariant_states_eta_gt1_K2,
    limit_choice_probs,
    limit_rewards,
    stationary_distribution,
)

__version__ = "1.0.0"

__all__ = [
    "DegenerateChoiceError", "Event", "FluidTrajectory", "InvariantReport",
    "LINEAR", "LifespanDist", "ModelParams", "Regime", "ScaledInstance",
    "Stability", "SteadyEstimate", "SystemState", "Trace", "WeightFn",
    "choice_distribution", "compare_to_theory", "conditional_update_snapshot",
    "convergence_rate", "deficient_transition_matrix", "dominance_check",
    "drift", "effective_reward_rates", "estimate", "heterogeneous_limits",
    "integrate", "invariant_state_linear", "invariant_state_poly",
    "invariant_states_eta_gt1_K2", "limit_choice_probs", "limit_rewards",
    "make_rng", "potential", "sample_choice", "sample_path", "simulate",
    "stationary_distribution", "step_exponential", "step_scheduled",
]
