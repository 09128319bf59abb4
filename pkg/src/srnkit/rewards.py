"""Rate rewards over tangible markings: availability and risk scores."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExpressionError
from .expr import Expression, as_expression
from .markov import SteadyState
from .reachability import TangibleGraph


@dataclass(frozen=True)
class RewardSpec:
    name: str
    predicate: Expression
    weight: Expression = field(default_factory=lambda: Expression.const(1.0))

    def __post_init__(self):
        object.__setattr__(self, "predicate", as_expression(self.predicate))
        object.__setattr__(self, "weight", as_expression(self.weight))

    @property
    def unit_weight(self) -> bool:
        return self.weight.constant == 1.0


@dataclass
class MetricReport:
    values: dict
    availability: float
    unavailability: float


def reward_vector(graph: TangibleGraph, spec: RewardSpec) -> np.ndarray:
    """Reward value of every tangible state (zero where the predicate is false)."""
    c = graph.net.compiled
    pred = spec.predicate.compile(c.place_index)
    weight = spec.weight.compile(c.place_index)
    out = np.zeros(graph.n_states)
    for i, m in enumerate(graph.states):
        ok = pred(m, c.params)
        if not isinstance(ok, bool):
            raise ExpressionError(f"predicate of reward {spec.name} is not boolean")
        if ok:
            w = weight(m, c.params)
            if isinstance(w, bool):
                raise ExpressionError(f"weight of reward {spec.name} is boolean")
            out[i] = w
    return out


def _pi(pi):
    return pi.pi if isinstance(pi, SteadyState) else np.asarray(pi, dtype=float)


def expected_reward(graph: TangibleGraph, pi, spec: RewardSpec) -> float:
    return float(_pi(pi) @ reward_vector(graph, spec))


def _probability(graph, pi, spec):
    if not spec.unit_weight:
        raise ValueError(f"reward {spec.name} must have constant weight 1")
    return min(1.0, max(0.0, expected_reward(graph, pi, spec)))


def riskscore(graph: TangibleGraph, pi, risky: RewardSpec) -> float:
    """Steady-state probability of occupying a risky marking."""
    return _probability(graph, pi, risky)


def unavailability(graph: TangibleGraph, pi, up: RewardSpec) -> float:
    return 1.0 - _probability(graph, pi, up)


def metric_report(graph: TangibleGraph, pi, rewards, up: str = "up") -> MetricReport:
    values = {r.name: expected_reward(graph, pi, r) for r in rewards}
    by_name = {r.name: r for r in rewards}
    if up in by_name:
        a = _probability(graph, pi, by_name[up])
    else:
        a = 1.0
    return MetricReport(values, a, 1.0 - a)


def derived_metrics(values: dict) -> dict:
    """Named metrics derived from raw reward values.

    ``up`` yields ``unavailability`` and every ``risky_<x>`` yields ``riskscore_<x>``.
    """
    out = {}
    if "up" in values:
        out["unavailability"] = 1.0 - values["up"]
    for name, v in values.items():
        if name.startswith("risky_"):
            out["riskscore_" + name[len("risky_"):]] = v
    return out
