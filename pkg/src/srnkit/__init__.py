"""Analytic and simulation engine for stochastic reward nets, with a
moving-target-defense cloud model (VM migration as VMM rejuvenation)."""

from .errors import SRNError
from .expr import Expression
from .markov import SolverConfig, SteadyState, build_generator, steady_state, throughput
from .net import Arc, Net, Place, Transition, enabled, eval_expr, fire, rate_of, validate
from .reachability import ExploreConfig, TangibleGraph, explore, is_vanishing
from .rewards import RewardSpec, expected_reward, riskscore, unavailability
from .simulator import SimConfig, SimEstimate, simulate

__version__ = "0.1.0"

__all__ = [
    "Arc", "Expression", "ExploreConfig", "Net", "Place", "RewardSpec", "SRNError",
    "SimConfig", "SimEstimate", "SolverConfig", "SteadyState", "TangibleGraph", "Transition",
    "build_generator", "enabled", "eval_expr", "expected_reward", "explore", "fire",
    "is_vanishing", "rate_of", "riskscore", "simulate", "steady_state", "throughput",
    "unavailability", "validate",
]
