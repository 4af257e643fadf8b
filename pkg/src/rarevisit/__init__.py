"""Simulation and exact checks for local times of simple random walk."""

from __future__ import annotations

from .conditioned import (
    HIT_TOP,
    RETURN_BEFORE_TOP,
    UP_FOREVER,
    ConditionedKernel,
    interior_visit_probability,
    late_return_probability,
    ruin_probability,
    sample_by_rejection,
    sample_conditioned,
    visit_min_probability,
)
from .excursion import (
    EventFlags,
    ExcursionRecord,
    check_event_A,
    check_event_B,
    decompose,
    first_full_cover_excursion,
    k_increments,
    sample_skeleton,
)
from .gw import GWTrajectory, edge_local_times, gw_step, gw_trajectory, sample_offspring
from .localtime import BudgetExceeded, LocalTimeField, LocalTimeFieldND, f_trace, tau_r
from .oracle import ExactDistribution, enumerate_f, enumerate_g1, enumerate_g1_mean, hitting_solve
from .rng import RandomStream
from .stats import ExperimentResult, ResultRecord, chi_square_gof, mc_estimate
from .walk import WalkPath, WalkState, hit_two_sided, simulate_dd, simulate_path

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded",
    "ConditionedKernel",
    "EventFlags",
    "ExactDistribution",
    "ExcursionRecord",
    "ExperimentResult",
    "GWTrajectory",
    "HIT_TOP",
    "LocalTimeField",
    "LocalTimeFieldND",
    "RETURN_BEFORE_TOP",
    "RandomStream",
    "ResultRecord",
    "UP_FOREVER",
    "WalkPath",
    "WalkState",
    "check_event_A",
    "check_event_B",
    "chi_square_gof",
    "decompose",
    "edge_local_times",
    "enumerate_f",
    "enumerate_g1",
    "enumerate_g1_mean",
    "f_trace",
    "first_full_cover_excursion",
    "gw_step",
    "gw_trajectory",
    "hit_two_sided",
    "hitting_solve",
    "interior_visit_probability",
    "k_increments",
    "late_return_probability",
    "mc_estimate",
    "ruin_probability",
    "sample_by_rejection",
    "sample_conditioned",
    "sample_offspring",
    "sample_skeleton",
    "simulate_dd",
    "simulate_path",
    "tau_r",
    "visit_min_probability",
]
