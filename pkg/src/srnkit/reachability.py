"""Reachability graph generation with on-the-fly vanishing marking elimination.

Each timed firing out of a tangible marking either lands on a tangible
marking (one edge) or on a vanishing one. A vanishing marking is resolved
into a distribution over the tangible markings it eventually reaches, plus
the expected number of firings of each immediate transition along the way.
Resolutions are memoised, so the extended graph is never materialised.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import StateSpaceError, VanishingLoopError
from .net import Marking, Net, enabled_indices, fire_index, rate_index


@dataclass(frozen=True)
class ExploreConfig:
    max_states: int = 1_000_000
    max_vanishing_depth: int = 10_000

    def __post_init__(self):
        if self.max_states < 1 or self.max_vanishing_depth < 1:
            raise ValueError("max_states and max_vanishing_depth must be >= 1")


@dataclass
class Edge:
    src: int
    dst: int
    rate: float
    # transition name -> contribution; timed labels sum to ``rate``, immediate
    # labels hold the expected firing frequency carried by this edge
    labels: dict = field(default_factory=dict)


@dataclass
class TangibleGraph:
    net: Net
    states: list  # tangible markings, index = state id
    edges: list
    initial_distribution: np.ndarray
    vanishing_count: int = 0

    @property
    def n_states(self) -> int:
        return len(self.states)

    def index_of(self, marking) -> int:
        return self._index[tuple(marking)]

    @property
    def _index(self):
        idx = self.__dict__.get("_index_cache")
        if idx is None:
            idx = {m: i for i, m in enumerate(self.states)}
            self.__dict__["_index_cache"] = idx
        return idx

    def deadlocks(self) -> list[int]:
        has_out = {e.src for e in self.edges}
        return [i for i in range(self.n_states) if i not in has_out]

    def dump(self) -> str:
        """Text dump: ``state <idx> <place>=<count> ...`` and ``edge <src> <dst> <rate>``."""
        names = self.net.place_names
        lines = []
        for i, m in enumerate(self.states):
            lines.append(f"state {i} " + " ".join(f"{n}={c}" for n, c in zip(names, m)))
        for e in self.edges:
            lines.append(f"edge {e.src} {e.dst} {e.rate!r}")
        return "\n".join(lines) + "\n"


def is_vanishing(net: Net, marking) -> bool:
    m = net.marking(marking) if not isinstance(marking, tuple) else marking
    ts = net.compiled.transitions
    return any(ts[i].immediate for i in enabled_indices(net, m))


class _Resolver:
    """Memoised absorption analysis of vanishing markings."""

    def __init__(self, net: Net, cfg: ExploreConfig):
        self.net = net
        self.cfg = cfg
        self.trans = net.compiled.transitions
        self.cache = {}  # vanishing marking -> (targets, probs, {imm idx: {target: count}})
        self.n_vanishing = 0

    def branches(self, m: Marking):
        """Immediate successors of vanishing ``m`` as (transition index, marking, probability)."""
        idx = enabled_indices(self.net, m)
        total = sum(self.trans[i].weight for i in idx)
        return [(i, fire_index(self.net, m, i), self.trans[i].weight / total) for i in idx]

    def resolve(self, start: Marking):
        if start in self.cache:
            return self.cache[start]
        # breadth-first closure over vanishing markings not yet resolved
        order = [start]
        pos = {start: 0}
        depth = {start: 0}
        succ = []
        queue = deque([start])
        while queue:
            m = queue.popleft()
            br = self.branches(m)
            succ.append(br)  # queue order == discovery order == pos
            for _, m2, _ in br:
                if m2 in pos or m2 in self.cache or not is_vanishing(self.net, m2):
                    continue
                d = depth[m] + 1
                if d > self.cfg.max_vanishing_depth:
                    raise VanishingLoopError(
                        f"vanishing chain from {self.net.as_dict(start)} exceeds "
                        f"max_vanishing_depth={self.cfg.max_vanishing_depth}")
                pos[m2] = len(order)
                depth[m2] = d
                order.append(m2)
                if len(order) + len(self.cache) > self.cfg.max_states:
                    raise StateSpaceError(f"more than {self.cfg.max_states} vanishing markings")
                queue.append(m2)
        self._solve_closure(order, pos, succ)
        self.n_vanishing += len(order)
        return self.cache[start]

    def _solve_closure(self, order, pos, succ):
        n = len(order)
        # exits: tangible markings plus already-resolved vanishing markings
        exit_pos = {}
        exits = []
        rows, cols, vals = [], [], []
        exit_rows, exit_cols, exit_vals = [], [], []

        def exit_index(m):
            if m not in exit_pos:
                exit_pos[m] = len(exits)
                exits.append(m)
            return exit_pos[m]

        for a, m in enumerate(order):
            for _, m2, p in succ[a]:
                if m2 in pos:
                    rows.append(a); cols.append(pos[m2]); vals.append(p)
                elif m2 in self.cache:
                    targets, probs, _ = self.cache[m2]
                    for tgt, q in zip(targets, probs):
                        exit_rows.append(a); exit_cols.append(exit_index(tgt)); exit_vals.append(p * q)
                else:
                    exit_rows.append(a); exit_cols.append(exit_index(m2)); exit_vals.append(p)

        # trap check: every closure marking must reach an exit
        can_exit = np.zeros(n, dtype=bool)
        can_exit[list(set(exit_rows))] = True
        preds = [[] for _ in range(n)]
        for r, c in zip(rows, cols):
            preds[c].append(r)
        stack = [i for i in range(n) if can_exit[i]]
        while stack:
            j = stack.pop()
            for i in preds[j]:
                if not can_exit[i]:
                    can_exit[i] = True
                    stack.append(i)
        if not can_exit.all():
            trapped = order[int(np.flatnonzero(~can_exit)[0])]
            raise VanishingLoopError(
                f"vanishing loop: probability mass trapped at {self.net.as_dict(trapped)}")

        P_vv = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
        P_ve = sp.csc_matrix((exit_vals, (exit_rows, exit_cols)), shape=(n, len(exits)))
        A = (sp.identity(n, format="csc") - P_vv).tocsc()
        if n == 1 and P_vv.nnz == 0:
            solve = lambda b: np.asarray(b, dtype=float).reshape(n, -1)
        else:
            lu = splu(A)
            solve = lambda b: lu.solve(np.asarray(b, dtype=float).reshape(n, -1))
        absorb = solve(P_ve.toarray())  # (n, exits)

        # expected immediate firings, split by the exit eventually reached:
        # C_u = (I - P_vv)^-1 F_u with F_u[w, e] = sum over u-firings w->w' of p * h_e(w')
        F = {}
        for a in range(n):
            for i, m2, p in succ[a]:
                if m2 in pos:
                    h = absorb[pos[m2]]
                    contrib = {e: p * h[e] for e in np.flatnonzero(h)}
                elif m2 in self.cache:
                    targets, probs, _ = self.cache[m2]
                    contrib = {exit_pos[t]: p * q for t, q in zip(targets, probs)}
                else:
                    contrib = {exit_pos[m2]: p}
                Fu = F.setdefault(i, np.zeros((n, len(exits))))
                for e, v in contrib.items():
                    Fu[a, e] += v
        counts = {i: solve(Fu) for i, Fu in F.items()}
        # fold in the immediate firings already accounted for inside resolved exits
        for a in range(n):
            for _, m2, p in succ[a]:
                if m2 in pos or m2 not in self.cache:
                    continue
                for i, by_target in self.cache[m2][2].items():
                    Fu = np.zeros((n, len(exits)))
                    for tgt, cnt in by_target.items():
                        Fu[a, exit_pos[tgt]] += p * cnt
                    extra = solve(Fu)
                    counts[i] = counts[i] + extra if i in counts else extra

        for a, m in enumerate(order):
            row = absorb[a]
            nz = [e for e in range(len(exits)) if row[e] > 0]
            targets = [exits[e] for e in nz]
            probs = [float(row[e]) for e in nz]
            imm = {}
            for i, C in counts.items():
                d = {exits[e]: float(C[a, e]) for e in range(len(exits)) if C[a, e] > 0}
                if d:
                    imm[i] = d
            self.cache[m] = (targets, probs, imm)


def explore(net: Net, cfg: ExploreConfig = None) -> TangibleGraph:
    """Breadth-first tangible reachability graph of ``net``."""
    cfg = cfg or ExploreConfig()
    trans = net.compiled.transitions
    resolver = _Resolver(net, cfg)
    index = {}
    states = []
    queue = deque()

    def state_id(m):
        i = index.get(m)
        if i is None:
            if len(states) >= cfg.max_states:
                raise StateSpaceError(
                    f"state budget of {cfg.max_states} tangible markings exceeded (net likely unbounded)")
            i = index[m] = len(states)
            states.append(m)
            queue.append(m)
        return i

    m0 = net.initial_marking
    if is_vanishing(net, m0):
        targets, probs, _ = resolver.resolve(m0)
        init = [(state_id(t), p) for t, p in zip(targets, probs)]
    else:
        init = [(state_id(m0), 1.0)]

    merged = {}  # (src, dst) -> {label: rate}
    while queue:
        m = queue.popleft()
        s = index[m]
        for i in enabled_indices(net, m):
            r = rate_index(net, m, i)
            name = trans[i].name
            m2 = fire_index(net, m, i)
            if not is_vanishing(net, m2):
                lab = merged.setdefault((s, state_id(m2)), {})
                lab[name] = lab.get(name, 0.0) + r
                continue
            targets, probs, imm = resolver.resolve(m2)
            for tgt, p in zip(targets, probs):
                lab = merged.setdefault((s, state_id(tgt)), {})
                lab[name] = lab.get(name, 0.0) + r * p
            for j, by_target in imm.items():
                iname = trans[j].name
                for tgt, cnt in by_target.items():
                    lab = merged.setdefault((s, state_id(tgt)), {})
                    lab[iname] = lab.get(iname, 0.0) + r * cnt

    timed_names = {t.name for t in net.transitions if not t.is_immediate}
    edges = []
    for (s, d), lab in merged.items():
        rate = sum(v for k, v in lab.items() if k in timed_names)
        edges.append(Edge(s, d, rate, lab))

    pi0 = np.zeros(len(states))
    for i, p in init:
        pi0[i] += p
    pi0 /= pi0.sum()
    return TangibleGraph(net, states, edges, pi0, resolver.n_vanishing)
