"""CTMC generator construction and steady-state solution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu, spsolve

from .errors import ConvergenceError, ReducibleChainError, SRNError
from .reachability import TangibleGraph

AUTO, DIRECT, ITERATIVE = "auto", "direct", "iterative"


@dataclass(frozen=True)
class SolverConfig:
    method: str = AUTO
    tolerance: float = 1e-12
    max_iterations: int = 200_000
    direct_threshold: int = 500

    def __post_init__(self):
        if self.method not in (AUTO, DIRECT, ITERATIVE):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1 or self.direct_threshold < 1:
            raise ValueError("max_iterations and direct_threshold must be >= 1")


@dataclass
class Generator:
    """Infinitesimal generator in CSR form (rows = source states)."""

    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass
class SteadyState:
    pi: np.ndarray
    residual: float
    iterations: int
    method: str

    def __getitem__(self, i):
        return self.pi[i]

    def __len__(self):
        return len(self.pi)


def build_generator(graph: TangibleGraph) -> Generator:
    n = graph.n_states
    rows, cols, vals = [], [], []
    for e in graph.edges:
        if not math.isfinite(e.rate):
            raise SRNError(f"non-finite rate on edge {e.src}->{e.dst}")
        if e.src == e.dst or e.rate == 0:
            continue
        rows.append(e.src)
        cols.append(e.dst)
        vals.append(e.rate)
    off = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))  # duplicates are summed
    out = np.asarray(off.sum(axis=1)).ravel()
    Q = (off - sp.diags(out)).tocsr()
    Q.sum_duplicates()
    Q.sort_indices()
    return Generator(Q)


def residual(Q: Generator, pi: np.ndarray) -> float:
    if Q.n == 0:
        return 0.0
    return float(np.abs(Q.matrix.T @ pi).max())


def recurrent_classes(Q: Generator) -> list[np.ndarray]:
    """Closed communicating classes of the positive-rate digraph."""
    A = Q.matrix.copy()
    A.setdiag(0)
    A.eliminate_zeros()
    ncomp, labels = connected_components(A, directed=True, connection="strong")
    leaves = np.ones(ncomp, dtype=bool)
    coo = A.tocoo()
    cross = labels[coo.row] != labels[coo.col]
    leaves[labels[coo.row[cross]]] = False
    return [np.flatnonzero(labels == c) for c in range(ncomp) if leaves[c]]


def _direct(Qr: sp.csr_matrix) -> np.ndarray:
    n = Qr.shape[0]
    # Q^T pi = 0 with the last balance equation replaced by normalisation
    if n <= 2000:
        A = Qr.T.toarray()
        A[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        return np.linalg.solve(A, b)
    A = Qr.T.tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    return spsolve(A.tocsc(), b)


def _gauss_seidel(Qr: sp.csr_matrix, cfg: SolverConfig):
    """Gauss-Seidel on Q^T pi = 0; the lower triangle is factored once."""
    A = Qr.T.tocsr()
    lower = sp.tril(A, format="csc")
    upper = sp.triu(A, k=1, format="csr")
    lu = splu(lower, permc_spec="NATURAL", diag_pivot_thresh=0.0,
              options={"SymmetricMode": True})
    n = A.shape[0]
    x = np.full(n, 1.0 / n)
    res = math.inf
    for it in range(1, cfg.max_iterations + 1):
        x = lu.solve(-(upper @ x))
        s = x.sum()
        if not np.isfinite(s) or s <= 0:
            return x, it, math.inf
        x /= s
        if it % 10 == 0 or it < 10:
            res = float(np.abs(A @ x).max())
            if res <= cfg.tolerance:
                return x, it, res
    return x, cfg.max_iterations, res


def _power(Qr: sp.csr_matrix, cfg: SolverConfig):
    """Power iteration on the uniformised chain P = I + Q / (1.02 max exit rate)."""
    n = Qr.shape[0]
    lam = 1.02 * float(np.abs(Qr.diagonal()).max())
    PT = (sp.identity(n, format="csr") + Qr / lam).T.tocsr()
    A = Qr.T.tocsr()
    x = np.full(n, 1.0 / n)
    res = math.inf
    for it in range(1, cfg.max_iterations + 1):
        x = PT @ x
        x /= x.sum()
        if it % 10 == 0:
            res = float(np.abs(A @ x).max())
            if res <= cfg.tolerance:
                return x, it, res
    return x, cfg.max_iterations, res


def steady_state(Q: Generator, cfg: SolverConfig = None) -> SteadyState:
    """Solve pi Q = 0, sum(pi) = 1 for a chain with a single recurrent class.

    Transient states get probability zero; the balance equations are solved
    on the recurrent class only.
    """
    cfg = cfg or SolverConfig()
    n = Q.n
    if n == 0:
        raise SRNError("empty generator")
    classes = recurrent_classes(Q)
    if len(classes) > 1:
        raise ReducibleChainError(
            f"chain has {len(classes)} recurrent classes; states {classes[0][0]} and "
            f"{classes[1][0]} are recurrent but do not communicate")
    rec = classes[0]
    pi = np.zeros(n)
    if len(rec) == 1:
        pi[rec[0]] = 1.0
        return SteadyState(pi, residual(Q, pi), 0, DIRECT)

    Qr = Q.matrix[rec][:, rec].tocsr()
    method = cfg.method
    if method == AUTO:
        method = DIRECT if len(rec) <= cfg.direct_threshold else ITERATIVE

    if method == DIRECT:
        x = _direct(Qr)
        iterations = 1
    else:
        x, iterations, res = _gauss_seidel(Qr, cfg)
        if not res <= cfg.tolerance:
            x2, it2, res2 = _power(Qr, cfg)
            if not res2 <= cfg.tolerance:
                best = min(res, res2)
                raise ConvergenceError(
                    f"iterative solver did not converge in {cfg.max_iterations} iterations "
                    f"(residual {best:.3e} > {cfg.tolerance:.1e})", residual=best)
            x, iterations, method = x2, iterations + it2, "power"
        else:
            method = "gauss-seidel"

    x = np.clip(x, 0.0, None)
    x /= x.sum()
    pi[rec] = x
    return SteadyState(pi, residual(Q, pi), iterations, method)


def throughput(graph: TangibleGraph, pi, t: str) -> float:
    """Steady-state firing frequency of transition ``t`` (firings per hour)."""
    if t not in graph.net.compiled.transition_index:
        raise SRNError(f"unknown transition {t}")
    p = pi.pi if isinstance(pi, SteadyState) else np.asarray(pi)
    total = 0.0
    for e in graph.edges:
        c = e.labels.get(t)
        if c:
            total += p[e.src] * c
    return total


def throughputs(graph: TangibleGraph, pi) -> dict[str, float]:
    p = pi.pi if isinstance(pi, SteadyState) else np.asarray(pi)
    out = {t.name: 0.0 for t in graph.net.transitions}
    for e in graph.edges:
        w = p[e.src]
        for name, c in e.labels.items():
            out[name] += w * c
    return out
