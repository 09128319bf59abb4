import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import cycle_net, mm1k_net, random_ergodic_nets, random_net, two_state_net
from srnkit import Arc, Net, Place, Transition, explore
from srnkit.expr import Binary, Expression, Num
from srnkit.errors import ConvergenceError, ReducibleChainError, SRNError
from srnkit.markov import (Generator, SolverConfig, build_generator, recurrent_classes,
                           steady_state, throughput, throughputs)
from srnkit.reachability import Edge, TangibleGraph


def _solve(net, **cfg):
    g = explore(net)
    return g, steady_state(build_generator(g), SolverConfig(**cfg))


def test_two_state_generator():
    Q = build_generator(explore(two_state_net(1.0, 9.0)))
    np.testing.assert_array_equal(Q.toarray(), [[-1.0, 1.0], [9.0, -9.0]])


def test_absorbing_row_is_zero():
    net = Net([Place("A", 1), Place("B", 0)], [Transition.timed("t", 2.0)],
              [Arc("input", "A", "t"), Arc("output", "B", "t")])
    Q = build_generator(explore(net)).toarray()
    np.testing.assert_array_equal(Q[1], [0.0, 0.0])


def test_parallel_edges_merge():
    net = two_state_net()
    g = TangibleGraph(net, [(1, 0), (0, 1)],
                      [Edge(0, 1, 2.0, {"fail": 2.0}), Edge(0, 1, 3.0, {"fail": 3.0}),
                       Edge(1, 0, 1.0, {"repair": 1.0})], np.array([1.0, 0.0]))
    Q = build_generator(g).toarray()
    assert Q[0, 1] == 5.0 and Q[0, 0] == -5.0


def test_non_finite_rate_rejected():
    g = TangibleGraph(two_state_net(), [(1, 0), (0, 1)], [Edge(0, 1, float("inf"))],
                      np.array([1.0, 0.0]))
    with pytest.raises(SRNError):
        build_generator(g)


@pytest.mark.parametrize("method", ["direct", "iterative"])
def test_two_state_balance(method):
    lam, mu = 1.0, 9.0
    _, ss = _solve(two_state_net(lam, mu), method=method)
    expected = [mu / (lam + mu), lam / (lam + mu)]  # 2-state balance
    np.testing.assert_allclose(ss.pi, expected, atol=1e-12)
    assert ss.residual <= 1e-12


@pytest.mark.parametrize("method", ["direct", "iterative"])
def test_symmetric_cycle(method):
    _, ss = _solve(cycle_net(3, 2.5), method=method)
    np.testing.assert_allclose(ss.pi, [1 / 3] * 3, atol=1e-12)


@pytest.mark.parametrize("method", ["direct", "iterative"])
def test_mm1k_product_form(method):
    K, lam, mu = 3, 1.0, 2.0
    g, ss = _solve(mm1k_net(K, lam, mu), method=method)
    rho = lam / mu
    weights = np.array([rho ** n for n in range(K + 1)])
    expected = weights / weights.sum()  # birth-death product form
    got = np.array([ss.pi[g.index_of((n,))] for n in range(K + 1)])
    np.testing.assert_allclose(got, expected, atol=1e-12)
    np.testing.assert_allclose(expected * 15, [8, 4, 2, 1])


def test_auto_picks_by_threshold():
    net = mm1k_net(K=20)
    _, small = _solve(net, direct_threshold=500)
    _, large = _solve(net, direct_threshold=5)
    assert small.method == "direct"
    assert large.method in ("gauss-seidel", "power")
    np.testing.assert_allclose(small.pi, large.pi, atol=1e-10)


def test_transient_states_get_zero():
    # A -> B <-> C ; A is transient
    net = Net([Place("A", 1), Place("B", 0), Place("C", 0)],
              [Transition.timed("ab", 1.0), Transition.timed("bc", 1.0), Transition.timed("cb", 3.0)],
              [Arc("input", "A", "ab"), Arc("output", "B", "ab"),
               Arc("input", "B", "bc"), Arc("output", "C", "bc"),
               Arc("input", "C", "cb"), Arc("output", "B", "cb")])
    g, ss = _solve(net)
    pi = {g.states[i]: p for i, p in enumerate(ss.pi)}
    assert pi[(1, 0, 0)] == 0.0
    assert pi[(0, 1, 0)] == pytest.approx(0.75, abs=1e-12)


def test_absorbing_state_gets_all_mass():
    net = Net([Place("A", 1), Place("B", 0)], [Transition.timed("t", 2.0)],
              [Arc("input", "A", "t"), Arc("output", "B", "t")])
    g, ss = _solve(net)
    assert ss.pi[g.index_of((0, 1))] == 1.0


def test_reducible_chain_is_error():
    # A branches to two absorbing states B and C
    net = Net([Place("A", 1), Place("B", 0), Place("C", 0)],
              [Transition.timed("ab", 1.0), Transition.timed("ac", 1.0)],
              [Arc("input", "A", "ab"), Arc("output", "B", "ab"),
               Arc("input", "A", "ac"), Arc("output", "C", "ac")])
    g = explore(net)
    assert len(recurrent_classes(build_generator(g))) == 2
    with pytest.raises(ReducibleChainError, match="recurrent"):
        steady_state(build_generator(g))


def test_non_convergence_reports_residual():
    g = explore(mm1k_net(K=30, lam=1.0, mu=1.1))
    with pytest.raises(ConvergenceError) as info:
        steady_state(build_generator(g), SolverConfig(method="iterative", max_iterations=2))
    assert info.value.residual > 1e-12


def test_throughput_two_state():
    lam, mu = 1.0, 9.0
    g, ss = _solve(two_state_net(lam, mu))
    assert throughput(g, ss, "fail") == pytest.approx(ss.pi[0] * lam, abs=1e-15)
    assert throughput(g, ss, "fail") == pytest.approx(0.9, abs=1e-12)


def test_throughput_never_enabled():
    net = Net([Place("A", 1), Place("B", 0), Place("Z", 0)],
              [Transition.timed("ab", 1.0), Transition.timed("ba", 1.0), Transition.timed("z", 1.0)],
              [Arc("input", "A", "ab"), Arc("output", "B", "ab"),
               Arc("input", "B", "ba"), Arc("output", "A", "ba"), Arc("input", "Z", "z")])
    g, ss = _solve(net)
    assert throughput(g, ss, "z") == 0.0
    with pytest.raises(SRNError):
        throughput(g, ss, "nope")


def test_cycle_throughputs():
    r = 2.5
    g, ss = _solve(cycle_net(3, r))
    for name, v in throughputs(g, ss).items():
        assert v == pytest.approx(r / 3, rel=1e-12)


def test_direct_and_iterative_agree():
    for net, g in random_ergodic_nets(21, 15, immediate=True, max_places=6, max_tokens=4):
        Q = build_generator(g)
        a = steady_state(Q, SolverConfig(method="direct"))
        b = steady_state(Q, SolverConfig(method="iterative"))
        np.testing.assert_allclose(a.pi, b.pi, atol=1e-8)
        for ss in (a, b):
            assert ss.residual <= 1e-12
            assert ss.pi.min() >= 0
            assert ss.pi.sum() == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_rate_scaling(seed, c):
    rng = np.random.default_rng(seed)
    net = random_net(rng)
    try:
        g = explore(net)
        Q = build_generator(g)
        base = steady_state(Q)
    except SRNError:
        return
    scaled_net = Net(net.places,
                     [dataclasses.replace(t, rate=Expression(Binary("*", Num(c), t.rate.ast)))
                      if not t.is_immediate else t for t in net.transitions],
                     net.arcs, net.params)
    scaled_g = explore(scaled_net)
    assert scaled_g.states == g.states
    scaled = steady_state(build_generator(scaled_g))
    np.testing.assert_allclose(scaled.pi, base.pi, atol=1e-9)
    t0, t1 = throughputs(g, base), throughputs(scaled_g, scaled)
    for k in t0:
        assert t1[k] == pytest.approx(c * t0[k], rel=1e-8, abs=1e-12)
