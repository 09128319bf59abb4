"""Stochastic reward net data model with GSPN enabling and firing rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import ExpressionError, FiringError, NetError, RateError
from .expr import Expression, as_expression

TIMED = "timed"
IMMEDIATE = "immediate"

INPUT = "input"
OUTPUT = "output"
INHIBITOR = "inhibitor"

Marking = tuple  # dense token counts in place declaration order
MarkingLike = Union[Sequence[int], Mapping[str, int]]


@dataclass(frozen=True)
class Place:
    name: str
    initial_tokens: int = 0


@dataclass(frozen=True)
class Transition:
    name: str
    kind: str = TIMED
    rate: Optional[Expression] = None
    weight: Optional[float] = None
    priority: Optional[int] = None
    guard: Optional[Expression] = None

    @classmethod
    def timed(cls, name, rate, guard=None):
        return cls(name, TIMED, rate=as_expression(rate),
                   guard=None if guard is None else as_expression(guard))

    @classmethod
    def immediate(cls, name, weight=1.0, priority=1, guard=None):
        return cls(name, IMMEDIATE, weight=float(weight), priority=int(priority),
                   guard=None if guard is None else as_expression(guard))

    @property
    def is_immediate(self) -> bool:
        return self.kind == IMMEDIATE


@dataclass(frozen=True)
class Arc:
    kind: str
    place: str
    transition: str
    multiplicity: int = 1


@dataclass(frozen=True)
class _CompiledTransition:
    index: int
    name: str
    immediate: bool
    priority: int
    weight: float
    inputs: tuple  # (place index, multiplicity)
    inhibitors: tuple
    delta: tuple  # (place index, change) with change != 0
    guard: object
    rate: object


class _Compiled:
    """Index structures derived from a valid net."""

    def __init__(self, net: "Net"):
        diags = validate(net)
        if diags:
            raise NetError("; ".join(diags))
        self.place_index = {p.name: i for i, p in enumerate(net.places)}
        self.transition_index = {t.name: i for i, t in enumerate(net.transitions)}
        ins = {t.name: [] for t in net.transitions}
        inh = {t.name: [] for t in net.transitions}
        delta = {t.name: {} for t in net.transitions}
        for a in net.arcs:
            pi = self.place_index[a.place]
            if a.kind == INPUT:
                ins[a.transition].append((pi, a.multiplicity))
                d = delta[a.transition]
                d[pi] = d.get(pi, 0) - a.multiplicity
            elif a.kind == OUTPUT:
                d = delta[a.transition]
                d[pi] = d.get(pi, 0) + a.multiplicity
            else:
                inh[a.transition].append((pi, a.multiplicity))
        self.transitions = []
        for i, t in enumerate(net.transitions):
            self.transitions.append(_CompiledTransition(
                index=i,
                name=t.name,
                immediate=t.is_immediate,
                priority=t.priority if t.is_immediate else -1,
                weight=t.weight if t.is_immediate else 0.0,
                inputs=tuple(ins[t.name]),
                inhibitors=tuple(inh[t.name]),
                delta=tuple((p, c) for p, c in sorted(delta[t.name].items()) if c != 0),
                guard=None if t.guard is None else t.guard.compile(self.place_index),
                rate=None if t.rate is None else t.rate.compile(self.place_index),
            ))
        self.timed = [ct for ct in self.transitions if not ct.immediate]
        self.immediate = [ct for ct in self.transitions if ct.immediate]
        self.params = dict(net.params)


@dataclass(frozen=True, eq=True)
class Net:
    places: tuple
    transitions: tuple
    arcs: tuple
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "places", tuple(self.places))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "params", {k: float(v) for k, v in dict(self.params).items()})

    __hash__ = None

    def __getstate__(self):
        state = dict(self.__dict__)
        state.pop("compiled", None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)

    @cached_property
    def compiled(self) -> _Compiled:
        return _Compiled(self)

    @property
    def place_names(self) -> list[str]:
        return [p.name for p in self.places]

    @property
    def initial_marking(self) -> Marking:
        return tuple(p.initial_tokens for p in self.places)

    def marking(self, tokens: MarkingLike) -> Marking:
        """Dense marking from a mapping (missing places are empty) or a sequence."""
        if isinstance(tokens, Mapping):
            index = {p.name: i for i, p in enumerate(self.places)}
            dense = [0] * len(self.places)
            for name, count in tokens.items():
                if name not in index:
                    raise NetError(f"unknown place {name}")
                dense[index[name]] = int(count)
        else:
            dense = [int(c) for c in tokens]
            if len(dense) != len(self.places):
                raise NetError(f"marking has {len(dense)} entries, net has {len(self.places)} places")
        if any(c < 0 for c in dense):
            raise NetError("marking has a negative token count")
        return tuple(dense)

    def as_dict(self, marking: Sequence[int]) -> dict[str, int]:
        return {p.name: int(c) for p, c in zip(self.places, marking)}

    def transition(self, name: str) -> Transition:
        for t in self.transitions:
            if t.name == name:
                return t
        raise NetError(f"unknown transition {name}")

    def with_params(self, **overrides) -> "Net":
        params = dict(self.params)
        for k, v in overrides.items():
            if k not in params:
                raise NetError(f"unknown parameter {k}")
            params[k] = float(v)
        return Net(self.places, self.transitions, self.arcs, params)


def validate(net: Net) -> list[str]:
    """Return one diagnostic string per violated invariant (empty when valid)."""
    diags = []
    if not net.places:
        diags.append("net has no places")
    if not net.transitions:
        diags.append("net has no transitions")

    place_names = set()
    for p in net.places:
        if p.name in place_names:
            diags.append(f"duplicate place {p.name}")
        place_names.add(p.name)
        if not isinstance(p.initial_tokens, int) or p.initial_tokens < 0:
            diags.append(f"place {p.name}: initial tokens must be a non-negative integer")

    trans_names = set()
    for t in net.transitions:
        if t.name in trans_names:
            diags.append(f"duplicate transition {t.name}")
        trans_names.add(t.name)
        if t.name in place_names:
            diags.append(f"name {t.name} used for both a place and a transition")
        if t.kind == TIMED:
            if t.rate is None:
                diags.append(f"timed transition {t.name} has no rate")
            if t.weight is not None or t.priority is not None:
                diags.append(f"weight/priority on timed transition {t.name}")
        elif t.kind == IMMEDIATE:
            if t.rate is not None:
                diags.append(f"rate on immediate transition {t.name}")
            if t.weight is None or not t.weight > 0 or not math.isfinite(t.weight):
                diags.append(f"immediate transition {t.name}: weight must be positive")
            if t.priority is None or t.priority < 0:
                diags.append(f"immediate transition {t.name}: priority must be a non-negative integer")
        else:
            diags.append(f"transition {t.name}: unknown kind {t.kind!r}")
        for label, e in (("rate", t.rate), ("guard", t.guard)):
            if e is None:
                continue
            for name in sorted(e.places() - place_names):
                diags.append(f"unknown place {name} in {label} of {t.name}")
            for name in sorted(e.params() - set(net.params)):
                diags.append(f"unknown parameter {name} in {label} of {t.name}")

    for a in net.arcs:
        where = f"{a.kind} arc {a.place}/{a.transition}"
        if a.kind not in (INPUT, OUTPUT, INHIBITOR):
            diags.append(f"{where}: unknown arc kind")
        if a.place not in place_names:
            diags.append(f"unknown place {a.place} ({where})")
        if a.transition not in trans_names:
            diags.append(f"unknown transition {a.transition} ({where})")
        if not isinstance(a.multiplicity, int) or a.multiplicity < 1:
            diags.append(f"{where}: multiplicity must be >= 1")

    for k, v in net.params.items():
        if not math.isfinite(v):
            diags.append(f"parameter {k} is not finite")
    return diags


def _to_marking(net: Net, marking: MarkingLike) -> Marking:
    if isinstance(marking, tuple) and len(marking) == len(net.places):
        return marking
    return net.marking(marking)


def _structurally_enabled(ct: _CompiledTransition, m: Marking, params) -> bool:
    for p, k in ct.inputs:
        if m[p] < k:
            return False
    for p, k in ct.inhibitors:
        if m[p] >= k:
            return False
    if ct.guard is not None:
        g = ct.guard(m, params)
        if not isinstance(g, bool):
            raise ExpressionError(f"guard of {ct.name} is not boolean")
        return g
    return True


def enabled_indices(net: Net, m: Marking) -> list[int]:
    """Indices of enabled transitions after immediate preemption and priority filtering."""
    c = net.compiled
    best = -1
    imm = []
    for ct in c.immediate:
        if ct.priority >= best and _structurally_enabled(ct, m, c.params):
            if ct.priority > best:
                best = ct.priority
                imm = []
            imm.append(ct.index)
    if imm:
        return sorted(imm)
    return [ct.index for ct in c.timed if _structurally_enabled(ct, m, c.params)]


def enabled(net: Net, marking: MarkingLike) -> frozenset[str]:
    m = _to_marking(net, marking)
    ts = net.compiled.transitions
    return frozenset(ts[i].name for i in enabled_indices(net, m))


def fire_index(net: Net, m: Marking, i: int) -> Marking:
    out = list(m)
    for p, d in net.compiled.transitions[i].delta:
        out[p] += d
    return tuple(out)


def fire(net: Net, marking: MarkingLike, t: str) -> Marking:
    m = _to_marking(net, marking)
    c = net.compiled
    if t not in c.transition_index:
        raise FiringError(f"unknown transition {t}")
    i = c.transition_index[t]
    if i not in enabled_indices(net, m):
        raise FiringError(f"transition {t} is not enabled in {net.as_dict(m)}")
    return fire_index(net, m, i)


def rate_index(net: Net, m: Marking, i: int) -> float:
    ct = net.compiled.transitions[i]
    r = ct.rate(m, net.compiled.params)
    if isinstance(r, bool) or not math.isfinite(r) or r <= 0:
        raise RateError(f"rate of {ct.name} evaluated to {r!r} in {net.as_dict(m)}")
    return float(r)


def rate_of(net: Net, marking: MarkingLike, t: str) -> float:
    m = _to_marking(net, marking)
    c = net.compiled
    i = c.transition_index.get(t)
    if i is None:
        raise NetError(f"unknown transition {t}")
    if c.transitions[i].immediate:
        raise NetError(f"{t} is immediate and has no rate")
    if i not in enabled_indices(net, m):
        raise FiringError(f"transition {t} is not enabled")
    return rate_index(net, m, i)


def eval_expr(expr: Expression | str, marking: Mapping[str, int] | Sequence[int],
              params: Mapping[str, float] = None, places: Iterable[str] = None):
    """Evaluate ``expr`` against a marking.

    ``marking`` may be a mapping place -> tokens; ``places`` gives the order
    for a dense sequence.
    """
    expr = as_expression(expr)
    params = params or {}
    if isinstance(marking, Mapping):
        names = list(places) if places is not None else list(marking)
        index = {n: i for i, n in enumerate(names)}
        dense = tuple(int(marking.get(n, 0)) for n in names)
    else:
        if places is None:
            raise ExpressionError("dense marking needs a place order")
        index = {n: i for i, n in enumerate(places)}
        dense = tuple(marking)
    return expr.compile(index)(dense, params)
