import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_net, two_state_net
from srnkit import Arc, Net, Place, Transition, enabled, fire, rate_of, validate
from srnkit.errors import FiringError, NetError, RateError
from srnkit.expr import Expression


def test_two_state_net_is_valid():
    assert validate(two_state_net()) == []


def test_dangling_place_reference():
    net = Net([Place("A", 1)], [Transition.timed("t", 1.0)],
              [Arc("input", "A", "t"), Arc("output", "X", "t")])
    diags = validate(net)
    assert any("unknown place X" in d for d in diags)


def test_rate_on_immediate_transition():
    t = Transition("t", "immediate", rate=Expression.const(1.0), weight=1.0, priority=1)
    diags = validate(Net([Place("A", 1)], [t], [Arc("input", "A", "t")]))
    assert any("rate on immediate transition" in d for d in diags)


@pytest.mark.parametrize("net, fragment", [
    (Net([], [Transition.timed("t", 1)], []), "no places"),
    (Net([Place("A")], [], []), "no transitions"),
    (Net([Place("A"), Place("A")], [Transition.timed("t", 1)], []), "duplicate place A"),
    (Net([Place("A", -1)], [Transition.timed("t", 1)], []), "non-negative"),
    (Net([Place("A")], [Transition.timed("t", 1)], [Arc("input", "A", "u")]),
     "unknown transition u"),
    (Net([Place("A")], [Transition.timed("t", 1)], [Arc("input", "A", "t", 0)]),
     "multiplicity"),
    (Net([Place("A")], [Transition.timed("t", "k * #B")], []), "unknown place B"),
    (Net([Place("A")], [Transition.timed("t", "k")], []), "unknown parameter k"),
    (Net([Place("A")], [Transition("t", "immediate", weight=0.0, priority=1)], []),
     "weight must be positive"),
    (Net([Place("A")], [Transition("t", "timed", rate=Expression.const(1), weight=2.0)], []),
     "weight/priority on timed"),
])
def test_validate_diagnostics(net, fragment):
    assert any(fragment in d for d in validate(net))


def _single(arcs, places=("P1", "P2"), kind="timed"):
    t = Transition.timed("t", 1.0) if kind == "timed" else Transition.immediate("t")
    return Net([Place(p) for p in places], [t], arcs)


def test_enabled_by_input_arc():
    net = _single([Arc("input", "P1", "t")])
    assert enabled(net, {"P1": 1}) == {"t"}


def test_inhibited():
    net = _single([Arc("inhibitor", "P2", "t")])
    assert enabled(net, {"P2": 1}) == frozenset()
    assert enabled(net, {"P2": 0}) == {"t"}


def test_immediate_preempts_timed():
    net = Net([Place("P", 1)],
              [Transition.timed("t1", 1.0), Transition.immediate("t2")],
              [Arc("input", "P", "t1"), Arc("input", "P", "t2")])
    assert enabled(net, net.initial_marking) == {"t2"}


def test_priority_filtering():
    net = Net([Place("P", 1)],
              [Transition.immediate("lo", priority=1), Transition.immediate("hi", priority=3),
               Transition.immediate("hi2", priority=3)],
              [Arc("input", "P", "lo"), Arc("input", "P", "hi"), Arc("input", "P", "hi2")])
    assert enabled(net, net.initial_marking) == {"hi", "hi2"}


def test_guard():
    net = Net([Place("P", 1), Place("Q", 0)], [Transition.timed("t", 1.0, guard="#Q >= 1")],
              [Arc("input", "P", "t")])
    assert enabled(net, {"P": 1}) == frozenset()
    assert enabled(net, {"P": 1, "Q": 1}) == {"t"}


def test_fire_moves_token():
    net = _single([Arc("input", "P1", "t"), Arc("output", "P2", "t")])
    assert net.as_dict(fire(net, {"P1": 1, "P2": 0}, "t")) == {"P1": 0, "P2": 1}


def test_fire_multiplicity():
    net = _single([Arc("input", "P", "t", 2), Arc("output", "Q", "t")], places=("P", "Q"))
    assert net.as_dict(fire(net, {"P": 3}, "t")) == {"P": 1, "Q": 1}


def test_fire_disabled_raises():
    net = _single([Arc("input", "P1", "t")])
    with pytest.raises(FiringError):
        fire(net, {"P1": 0}, "t")


def test_constant_rate():
    net = _single([Arc("input", "P1", "t")])
    assert rate_of(net, {"P1": 1}, "t") == 1.0


def test_marking_dependent_rate():
    net = Net([Place("Servers", 3)], [Transition.timed("t", "mu * #Servers")],
              [Arc("input", "Servers", "t")], {"mu": 2.0})
    assert rate_of(net, net.initial_marking, "t") == 6.0
    net2 = Net([Place("P", 1)], [Transition.timed("t", 0.1)], [Arc("input", "P", "t")])
    assert rate_of(net2, {"P": 1}, "t") == 0.1


@pytest.mark.parametrize("expr", ["0 * #P", "-1", "#P - 1"])
def test_degenerate_rate(expr):
    net = Net([Place("P", 1)], [Transition.timed("t", expr)], [Arc("input", "P", "t")])
    with pytest.raises(RateError):
        rate_of(net, net.initial_marking, "t")


def test_invalid_net_refuses_semantics():
    net = Net([Place("A", 1)], [Transition.timed("t", 1.0)], [Arc("input", "Z", "t")])
    with pytest.raises(NetError, match="unknown place Z"):
        enabled(net, (1,))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.integers(0, 4), min_size=6, max_size=6))
def test_fire_preserves_non_negativity(seed, tokens):
    net = random_net(np.random.default_rng(seed), immediate=True)
    m = net.marking(tokens[: len(net.places)])
    ts = enabled(net, m)
    assert enabled(net, m) == ts  # pure
    for t in sorted(ts):
        m2 = fire(net, m, t)
        assert all(c >= 0 for c in m2)
        assert fire(net, m, t) == m2
    kinds = {net.transition(t).kind for t in ts}
    assert len(kinds) <= 1
    if "immediate" in kinds:
        assert len({net.transition(t).priority for t in ts}) == 1
