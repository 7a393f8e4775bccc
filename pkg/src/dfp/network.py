"""Time-varying undirected communication graphs.

Edges are canonical pairs ``(i, j)`` with ``i < j``; an edge set is therefore
symmetric by construction. Self-inclusion of an agent in its own
neighborhood is left to the consumer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractViolation

KINDS = ("static", "edge-cycle", "seeded-random", "periodic")
BASES = ("ring", "star", "complete", "path")

Edge = tuple  # tuple[int, int], i < j


def canonical(i: int, j: int) -> Edge:
    i, j = int(i), int(j)
    if i == j:
        raise ContractViolation(f"self-loop ({i}, {i}) is not an edge")
    return (i, j) if i < j else (j, i)


def base_edges(base: str, n: int) -> tuple[Edge, ...]:
    """Edges of a named topology, sorted lexicographically."""
    if base == "ring":
        edges = {canonical(i, (i + 1) % n) for i in range(n)} if n > 1 else set()
    elif base == "star":
        edges = {(0, i) for i in range(1, n)}
    elif base == "complete":
        edges = {(i, j) for i in range(n) for j in range(i + 1, n)}
    elif base == "path":
        edges = {(i, i + 1) for i in range(n - 1)}
    else:
        raise ContractViolation(f"unknown base topology {base!r}")
    return tuple(sorted(edges))


def _normalize(edges, n: int) -> tuple[Edge, ...]:
    out = set()
    for i, j in edges:
        e = canonical(i, j)
        if not (0 <= e[0] and e[1] < n):
            raise ContractViolation(f"edge {e} outside agents 0..{n - 1}")
        out.add(e)
    return tuple(sorted(out))


@dataclass(frozen=True)
class GraphSequence:
    """Deterministic generator of edge sets ``E(t)``.

    kinds:
      static         the base edges at every step
      edge-cycle     one base edge per step, cycling in sorted order
      seeded-random  each base edge active independently with probability p
      periodic       an explicit list of edge sets repeated with its length
    """

    n: int
    kind: str = "static"
    base: str | tuple = "ring"
    p: float = 0.5
    seed: int = 0
    schedule: tuple | None = None
    horizon: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ContractViolation("graph needs at least one agent")
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown graph kind {self.kind!r}")
        if isinstance(self.base, str):
            edges = base_edges(self.base, self.n)
        else:
            edges = _normalize(self.base, self.n)
            object.__setattr__(self, "base", edges)
        object.__setattr__(self, "_edges", edges)
        if self.kind == "periodic":
            if not self.schedule:
                raise ContractViolation("periodic graph needs a non-empty schedule")
            sched = tuple(_normalize(es, self.n) for es in self.schedule)
            object.__setattr__(self, "schedule", sched)
        if self.kind == "seeded-random" and not 0.0 <= self.p <= 1.0:
            raise ContractViolation(f"activation probability {self.p} outside [0, 1]")

    @property
    def edges(self) -> tuple[Edge, ...]:
        """Base edge list (sorted)."""
        return self._edges

    @property
    def union_edges(self) -> tuple[Edge, ...]:
        """Every edge the generator can ever produce."""
        if self.kind == "periodic":
            return tuple(sorted({e for es in self.schedule for e in es}))
        return self._edges

    def edges_at(self, t: int) -> frozenset:
        if t < 0:
            raise ContractViolation(f"time index must be >= 0, got {t}")
        if self.kind == "static":
            return frozenset(self._edges)
        if self.kind == "edge-cycle":
            if not self._edges:
                return frozenset()
            return frozenset([self._edges[t % len(self._edges)]])
        if self.kind == "periodic":
            return frozenset(self.schedule[t % len(self.schedule)])
        rng = np.random.default_rng([self.seed, t])
        active = rng.random(len(self._edges)) < self.p
        return frozenset(e for e, on in zip(self._edges, active) if on)

    def neighbors(self, i: int, t: int) -> frozenset:
        return neighbors_in(self.edges_at(t), i, self.n)


def neighbors_in(edges, i: int, n: int) -> frozenset:
    if not 0 <= i < n:
        raise ContractViolation(f"agent {i} outside 0..{n - 1}")
    out = set()
    for a, b in edges:
        if a == i:
            out.add(b)
        elif b == i:
            out.add(a)
    return frozenset(out)


def neighbors(seq: GraphSequence, i: int, t: int) -> frozenset:
    return seq.neighbors(i, t)


def edges_at(seq: GraphSequence, t: int) -> frozenset:
    return seq.edges_at(t)


def adjacency(edges, n: int) -> np.ndarray:
    adj = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        adj[i, j] = adj[j, i] = True
    return adj


def is_connected(edges, n: int) -> bool:
    if n <= 1:
        return True
    nbrs = [[] for _ in range(n)]
    for i, j in edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        for k in nbrs[stack.pop()]:
            if k not in seen:
                seen.add(k)
                stack.append(k)
    return len(seen) == n


@dataclass(frozen=True)
class WindowConnectivityReport:
    window: int
    t_start: int
    t_end: int
    connected: bool
    first_failure: int | None = None

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "connected": self.connected,
            "first_failure": self.first_failure,
        }


def validate_window_connectivity(seq: GraphSequence, T: int, t_start: int,
                                 t_end: int) -> WindowConnectivityReport:
    """Check that every union graph over ``[t, t+T-1]`` inside the range is connected.

    A finite-horizon stand-in for the infinite-time connectivity assumptions.
    """
    if T < 1:
        raise ContractViolation(f"window must be >= 1, got {T}")
    if t_start < 0 or t_end < t_start + T - 1:
        raise ContractViolation(f"range [{t_start}, {t_end}] shorter than window {T}")
    stream = [seq.edges_at(t) for t in range(t_start, t_end + 1)]
    for k in range(len(stream) - T + 1):
        union = set().union(*stream[k:k + T])
        if not is_connected(union, seq.n):
            return WindowConnectivityReport(T, t_start, t_end, False, t_start + k)
    return WindowConnectivityReport(T, t_start, t_end, True, None)


def periodic_partition(n: int, T: int, seed: int, p: float = 0.5,
                       max_tries: int = 1000) -> GraphSequence:
    """Random connected graph whose edges are split over ``T`` cycled steps.

    The graph is Erdos-Renyi ``G(n, p)`` conditioned on being connected; each
    edge is assigned to one of ``T`` slots and slot ``t mod T`` is active at
    step ``t``. Every length-``T`` window then contains every edge.
    """
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for _ in range(max_tries):
        edges = [e for e in pairs if rng.random() < p]
        if is_connected(edges, n):
            break
    else:
        raise ContractViolation(f"no connected G({n}, {p}) sample in {max_tries} tries")
    slots = rng.integers(T, size=len(edges))
    schedule = tuple(tuple(e for e, s in zip(edges, slots) if s == k) for k in range(T))
    return GraphSequence(n=n, kind="periodic", base=tuple(edges), schedule=schedule, seed=seed)
