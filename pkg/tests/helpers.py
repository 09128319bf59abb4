"""Reference nets and a random bounded-net generator shared by the tests."""

import numpy as np

from srnkit import Arc, Net, Place, Transition
from srnkit.errors import VanishingLoopError
from srnkit.markov import build_generator, recurrent_classes
from srnkit.reachability import explore


def two_state_net(lam=1.0, mu=9.0):
    return Net(
        [Place("Up", 1), Place("Down", 0)],
        [Transition.timed("fail", "lam"), Transition.timed("repair", "mu")],
        [Arc("input", "Up", "fail"), Arc("output", "Down", "fail"),
         Arc("input", "Down", "repair"), Arc("output", "Up", "repair")],
        {"lam": lam, "mu": mu},
    )


def mm1k_net(K=3, lam=1.0, mu=2.0):
    """M/M/1/K queue; capacity enforced by an inhibitor arc."""
    return Net(
        [Place("Queue", 0)],
        [Transition.timed("arrive", "lam"), Transition.timed("serve", "mu")],
        [Arc("output", "Queue", "arrive"), Arc("inhibitor", "Queue", "arrive", K),
         Arc("input", "Queue", "serve")],
        {"lam": lam, "mu": mu},
    )


def branch_net(rate=2.0, w_a=1.0, w_b=3.0):
    """Timed ``t`` lands on a vanishing marking that branches to A or B."""
    return Net(
        [Place("S", 1), Place("V", 0), Place("A", 0), Place("B", 0)],
        [Transition.timed("t", rate),
         Transition.immediate("toA", w_a), Transition.immediate("toB", w_b),
         Transition.timed("backA", 1.0), Transition.timed("backB", 1.0)],
        [Arc("input", "S", "t"), Arc("output", "V", "t"),
         Arc("input", "V", "toA"), Arc("output", "A", "toA"),
         Arc("input", "V", "toB"), Arc("output", "B", "toB"),
         Arc("input", "A", "backA"), Arc("output", "S", "backA"),
         Arc("input", "B", "backB"), Arc("output", "S", "backB")],
    )


def cycle_net(n=3, rate=1.0):
    places = [Place(f"P{i}", 1 if i == 0 else 0) for i in range(n)]
    trans, arcs = [], []
    for i in range(n):
        trans.append(Transition.timed(f"t{i}", rate))
        arcs += [Arc("input", f"P{i}", f"t{i}"), Arc("output", f"P{(i + 1) % n}", f"t{i}")]
    return Net(places, trans, arcs)


def random_net(rng, immediate=False, max_places=5, max_tokens=3):
    """Token-conserving random net (hence bounded).

    A timed ring through all places keeps most draws irreducible; extra
    transitions add shortcuts, multiplicities, inhibitors, guards and
    marking-dependent rates.
    """
    n_p = int(rng.integers(2, max_places + 1))
    n_tok = int(rng.integers(1, max_tokens + 1))
    init = np.zeros(n_p, dtype=int)
    for _ in range(n_tok):
        init[rng.integers(n_p)] += 1
    places = [Place(f"P{i}", int(init[i])) for i in range(n_p)]
    trans, arcs = [], []

    def rate_expr(src):
        r = round(float(rng.uniform(0.1, 10.0)), 3)
        return f"{r} * #P{src}" if rng.random() < 0.3 else r

    for i in range(n_p):
        name = f"ring{i}"
        trans.append(Transition.timed(name, rate_expr(i)))
        arcs += [Arc("input", f"P{i}", name), Arc("output", f"P{(i + 1) % n_p}", name)]
    for j in range(int(rng.integers(1, 5))):
        a, b = (int(x) for x in rng.choice(n_p, size=2, replace=False))
        mult = int(rng.integers(1, 3))
        name = f"x{j}"
        guard = None
        if rng.random() < 0.2:
            guard = f"#P{int(rng.integers(n_p))} <= {int(rng.integers(0, n_tok + 1))}"
        if immediate and rng.random() < 0.5:
            trans.append(Transition.immediate(name, round(float(rng.uniform(0.5, 4)), 3),
                                              int(rng.integers(1, 3)), guard=guard))
        else:
            trans.append(Transition.timed(name, rate_expr(a), guard=guard))
        arcs += [Arc("input", f"P{a}", name, mult), Arc("output", f"P{b}", name, mult)]
        if rng.random() < 0.3:
            c = int(rng.integers(n_p))
            arcs.append(Arc("inhibitor", f"P{c}", name, int(rng.integers(1, n_tok + 1))))
    return Net(places, trans, arcs)


def random_ergodic_nets(seed, count, immediate=False, max_states=500, **kw):
    """``count`` random nets whose tangible chain is irreducible."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        net = random_net(rng, immediate=immediate, **kw)
        try:
            g = explore(net)
        except VanishingLoopError:
            continue
        if not 2 <= g.n_states <= max_states:
            continue
        classes = recurrent_classes(build_generator(g))
        if len(classes) == 1 and len(classes[0]) == g.n_states:
            out.append((net, g))
    return out


def raw_reachability(net):
    """Plain BFS over markings using only enabled/fire/rate_of (no elimination)."""
    from collections import deque

    from srnkit import enabled, fire, rate_of

    m0 = net.initial_marking
    seen = {m0: 0}
    order = [m0]
    edges = {}
    queue = deque([m0])
    while queue:
        m = queue.popleft()
        for t in sorted(enabled(net, m)):
            m2 = fire(net, m, t)
            if m2 not in seen:
                seen[m2] = len(order)
                order.append(m2)
                queue.append(m2)
            key = (m, m2)
            edges[key] = edges.get(key, 0.0) + rate_of(net, m, t)
    return order, edges
