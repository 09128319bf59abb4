"""Discrete-event simulation of an SRN, used as an oracle for the analytic path.

Only the net's own enabling/firing rules are used here (nothing from the
reachability or Markov modules). Because every delay is exponential and is
resampled after each marking change, the race "each enabled timed
transition draws Exp(rate), the minimum fires" is sampled as one
Exp(total rate) holding time plus a categorical choice proportional to the
rates, which has the same joint distribution.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ExpressionError, SRNError, VanishingLoopError
from .net import Net, enabled_indices, fire_index, rate_index
from .rewards import RewardSpec

MAX_IMMEDIATE_CHAIN = 100_000


@dataclass(frozen=True)
class SimConfig:
    seed: int = 42
    horizon: float = 100_000.0
    warmup: Optional[float] = None  # default: 10% of horizon
    replications: int = 10

    def __post_init__(self):
        if self.warmup is None:
            object.__setattr__(self, "warmup", 0.1 * self.horizon)
        if not (self.horizon > self.warmup >= 0):
            raise ValueError("need horizon > warmup >= 0")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


@dataclass
class RewardEstimate:
    mean: float
    stderr: float
    replications: int

    def covers(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.stderr


@dataclass
class SimEstimate:
    rewards: dict  # name -> RewardEstimate
    events: int
    deadlocked_replications: int = 0
    per_replication: dict = field(default_factory=dict)

    def __getitem__(self, name) -> RewardEstimate:
        return self.rewards[name]

    def report(self) -> str:
        lines = []
        for name, est in self.rewards.items():
            lines.append(f"{name} {est.mean:#.15g} +- {est.stderr:#.6g} (n={est.replications})")
        lines.append(f"events {self.events}")
        lines.append(f"deadlocked_replications {self.deadlocked_replications}")
        return "\n".join(lines) + "\n"


class _Stepper:
    """Marking-indexed cache of enabling information for one net."""

    def __init__(self, net: Net):
        self.net = net
        self.trans = net.compiled.transitions
        self.cache = {}

    def info(self, m):
        got = self.cache.get(m)
        if got is not None:
            return got
        idx = enabled_indices(self.net, m)
        if not idx:
            got = ("dead", None, None, 0.0)
        elif self.trans[idx[0]].immediate:
            w = np.array([self.trans[i].weight for i in idx])
            got = ("vanishing", idx, np.cumsum(w) / w.sum(), 0.0)
        else:
            r = np.array([rate_index(self.net, m, i) for i in idx])
            got = ("tangible", idx, np.cumsum(r) / r.sum(), float(r.sum()))
        self.cache[m] = got
        return got

    def settle(self, m, rng):
        """Fire immediate transitions until a tangible or dead marking is reached."""
        for _ in range(MAX_IMMEDIATE_CHAIN):
            kind, idx, cum, _ = self.info(m)
            if kind != "vanishing":
                return m, 0
            j = idx[_pick(cum, rng.random())] if len(idx) > 1 else idx[0]
            m = fire_index(self.net, m, j)
        raise VanishingLoopError(
            f"more than {MAX_IMMEDIATE_CHAIN} consecutive immediate firings")


def _pick(cum, u):
    k = int(np.searchsorted(cum, u, side="right"))
    return min(k, len(cum) - 1)


def _replicate(net: Net, cfg: SimConfig, rep: int, first_passage=None):
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(rep,)))
    step = _Stepper(net)
    m, _ = step.settle(net.initial_marking, rng)
    t = 0.0
    events = 0
    deadlocked = False
    occupancy = {}
    horizon, warmup = cfg.horizon, cfg.warmup
    while t < horizon:
        kind, idx, cum, total = step.info(m)
        if kind == "dead":
            deadlocked = True
            dwell_end = horizon
        else:
            dwell_end = t + rng.exponential(1.0 / total)
        lo = max(t, warmup)
        hi = min(dwell_end, horizon)
        if hi > lo:
            occupancy[m] = occupancy.get(m, 0.0) + (hi - lo)
        if dwell_end >= horizon:
            break
        t = dwell_end
        j = idx[_pick(cum, rng.random())] if len(idx) > 1 else idx[0]
        m = fire_index(net, m, j)
        events += 1
        if step.info(m)[0] == "vanishing":
            m, _ = step.settle(m, rng)
    return occupancy, events, deadlocked


def _reward_value(net: Net, spec: RewardSpec, occupancy: dict, span: float) -> float:
    c = net.compiled
    pred = spec.predicate.compile(c.place_index)
    weight = spec.weight.compile(c.place_index)
    acc = 0.0
    for m, dt in occupancy.items():
        ok = pred(m, c.params)
        if not isinstance(ok, bool):
            raise ExpressionError(f"predicate of reward {spec.name} is not boolean")
        if ok:
            acc += dt * weight(m, c.params)
    return acc / span


def _run(args):
    net, cfg, rep = args
    return _replicate(net, cfg, rep)


def simulate(net: Net, rewards: Sequence[RewardSpec], cfg: SimConfig = None,
             jobs: int = 1) -> SimEstimate:
    """Time-averaged reward estimates over independent replications.

    Replication ``r`` draws from ``SeedSequence(seed, spawn_key=(r,))`` so the
    result does not depend on ``jobs``.
    """
    cfg = cfg or SimConfig()
    c = net.compiled
    if not c.timed:
        raise SRNError("simulation needs at least one timed transition")
    tasks = [(net, cfg, r) for r in range(cfg.replications)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_run, tasks))
    else:
        results = [_run(t) for t in tasks]

    span = cfg.horizon - cfg.warmup
    per_rep = {r.name: [] for r in rewards}
    events = 0
    dead = 0
    for occupancy, ev, deadlocked in results:
        events += ev
        dead += deadlocked
        for r in rewards:
            per_rep[r.name].append(_reward_value(net, r, occupancy, span))

    estimates = {}
    for name, xs in per_rep.items():
        xs = np.asarray(xs)
        n = len(xs)
        se = float(xs.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        estimates[name] = RewardEstimate(float(xs.mean()), se, n)
    return SimEstimate(estimates, events, dead, {k: list(v) for k, v in per_rep.items()})


def first_passage(net: Net, target, replications: int = 1000, seed: int = 42,
                  max_time: float = math.inf) -> RewardEstimate:
    """Mean time from the initial marking until a marking satisfying ``target``.

    ``target`` is a boolean expression (or its text).
    """
    from .expr import as_expression

    c = net.compiled
    pred = as_expression(target).compile(c.place_index)
    step = _Stepper(net)
    times = []
    for rep in range(replications):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))
        m, _ = step.settle(net.initial_marking, rng)
        t = 0.0
        while not pred(m, c.params):
            kind, idx, cum, total = step.info(m)
            if kind == "dead" or t > max_time:
                raise SRNError("target marking not reached")
            t += rng.exponential(1.0 / total)
            j = idx[_pick(cum, rng.random())] if len(idx) > 1 else idx[0]
            m = fire_index(net, m, j)
            if step.info(m)[0] == "vanishing":
                m, _ = step.settle(m, rng)
        times.append(t)
    xs = np.asarray(times)
    return RewardEstimate(float(xs.mean()), float(xs.std(ddof=1) / math.sqrt(len(xs))), len(xs))
