"""Row-stochastic averaging with a stubborn tracked agent.

Each agent ``j`` owns a weight matrix ``W_j(t)`` used by everybody else to
average their estimates of ``j``'s empirical frequency. Row ``j`` of that
matrix is the basis row ``e_j``: agent ``j`` never averages estimates of
itself. Backward products ``W(t) ... W(s)`` of such matrices converge to the
rank-one matrix ``1 e_j^T``; the helpers below compute those products and
check the entrywise bounds they satisfy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractViolation

STEP_TOL = 1e-12
PRODUCT_TOL = 1e-9

RULES = ("uniform", "source-priority")


@dataclass(frozen=True)
class WeightScheme:
    """How agents weight their closed neighborhood.

    uniform          ``1/(|N(i,t)|+1)`` on each member of ``N(i,t) + {i}``
    source-priority  full weight on the tracked agent when it is a neighbor,
                     uniform otherwise

    ``eta`` defaults to ``1/n``, the smallest weight either rule can assign.
    """

    eta: float | None = None
    rule: str = "uniform"

    def __post_init__(self):
        if self.rule not in RULES:
            raise ContractViolation(f"unknown weight rule {self.rule!r}")
        if self.eta is not None and not 0.0 < self.eta < 1.0:
            raise ContractViolation(f"eta must lie in (0, 1), got {self.eta}")

    def eta_for(self, n: int) -> float:
        eta = 1.0 / n if self.eta is None else self.eta
        if eta > 1.0 / n + STEP_TOL:
            raise ContractViolation(f"eta={eta} exceeds 1/n={1.0 / n}; uniform weights violate it")
        return eta


@dataclass(frozen=True)
class WeightMatrix:
    tracked: int
    entries: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.entries, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ContractViolation(f"weight matrix must be square, got {w.shape}")
        if not 0 <= self.tracked < w.shape[0]:
            raise ContractViolation(f"tracked agent {self.tracked} out of range")
        w.setflags(write=False)
        object.__setattr__(self, "entries", w)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def validate(self, eta: float, neighbor_sets: Sequence[Iterable[int]] | None = None) -> None:
        """Raise unless the matrix is row-stochastic, stubborn and eta-bounded."""
        w = self.entries
        if np.any(w < 0):
            raise ContractViolation("negative weight")
        if np.any(np.abs(w.sum(axis=1) - 1.0) > STEP_TOL):
            raise ContractViolation("weight matrix is not row-stochastic")
        if not np.array_equal(w[self.tracked], _basis(self.n, self.tracked)):
            raise ContractViolation(f"row {self.tracked} is not the stubborn basis row")
        nonzero = w[w > 0]
        if nonzero.size and nonzero.min() < eta - STEP_TOL:
            raise ContractViolation(f"nonzero weight {nonzero.min()} below eta={eta}")
        if neighbor_sets is not None:
            for i, nbrs in enumerate(neighbor_sets):
                allowed = set(nbrs) | {i}
                outside = [k for k in np.nonzero(w[i])[0] if k not in allowed]
                if outside and i != self.tracked:
                    raise ContractViolation(f"row {i} weights non-neighbors {outside}")


def _basis(n: int, j: int) -> np.ndarray:
    e = np.zeros(n)
    e[j] = 1.0
    return e


def build_weight_matrix(scheme: WeightScheme, tracked: int, n: int,
                        neighbors_fn: Callable[[int], Iterable[int]]) -> WeightMatrix:
    """Weights used at one step for estimating agent ``tracked``."""
    if not 0 <= tracked < n:
        raise ContractViolation(f"tracked agent {tracked} outside 0..{n - 1}")
    w = np.zeros((n, n))
    for i in range(n):
        if i == tracked:
            w[i, i] = 1.0
            continue
        nbrs = set(neighbors_fn(i))
        bad = [k for k in nbrs if not 0 <= k < n or k == i]
        if bad:
            raise ContractViolation(f"neighborhood of {i} contains invalid agents {bad}")
        if scheme.rule == "source-priority" and tracked in nbrs:
            w[i, tracked] = 1.0
            continue
        closed = sorted(nbrs | {i})
        w[i, closed] = 1.0 / len(closed)
    return WeightMatrix(tracked, w)


def weight_matrix_from_edges(scheme: WeightScheme, tracked: int, n: int, edges) -> WeightMatrix:
    nbrs = [set() for _ in range(n)]
    for a, b in edges:
        nbrs[a].add(b)
        nbrs[b].add(a)
    return build_weight_matrix(scheme, tracked, n, lambda i: nbrs[i])


def weight_stack(scheme: WeightScheme, n: int, edges) -> np.ndarray:
    """All tracked agents' matrices at once: ``out[j]`` equals ``W_j`` from
    :func:`build_weight_matrix` for the same edges."""
    adj = np.zeros((n, n), dtype=bool)
    for a, b in edges:
        adj[a, b] = adj[b, a] = True
    closed = adj | np.eye(n, dtype=bool)
    base = closed / closed.sum(axis=1, keepdims=True)
    out = np.repeat(base[None], n, axis=0)
    if scheme.rule == "source-priority":
        for j in range(n):
            rows = np.nonzero(adj[:, j])[0]
            out[j, rows] = 0.0
            out[j, rows, j] = 1.0
    idx = np.arange(n)
    out[idx, idx, :] = np.eye(n)
    return out


@dataclass(frozen=True)
class MatrixProduct:
    """``Phi(stop, start) = W(stop) W(stop-1) ... W(start)``."""

    tracked: int
    start: int
    stop: int
    entries: np.ndarray
    factors: tuple = field(default=(), repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def span(self) -> int:
        return self.stop - self.start + 1


def product_phi(matrices: Sequence[WeightMatrix], start: int = 0) -> MatrixProduct:
    """Backward product of matrices given in chronological order ``W(s), ..., W(t)``."""
    if not matrices:
        raise ContractViolation("empty matrix sequence")
    tracked = matrices[0].tracked
    n = matrices[0].n
    phi = np.eye(n)
    for w in matrices:
        if w.tracked != tracked:
            raise ContractViolation(f"tracked agent changes from {tracked} to {w.tracked}")
        if w.n != n:
            raise ContractViolation("matrices of different sizes")
        phi = w.entries @ phi
    return MatrixProduct(tracked, start, start + len(matrices) - 1, phi, tuple(matrices))


def iter_backward_products(matrices: Sequence[np.ndarray]):
    """Yield ``(t, stack)`` with ``stack[s] = Phi(t, s)`` for every ``s <= t``.

    One batched multiply per step, so every (t, s) pair of a horizon costs
    ``O(horizon^2)`` small products in total.
    """
    stack = np.empty((0,) + np.shape(matrices[0]))
    for t, w in enumerate(matrices):
        w = np.asarray(w, dtype=float)
        stack = np.concatenate([w @ stack, w[None]], axis=0) if len(stack) else w[None]
        yield t, stack


@dataclass(frozen=True)
class TrackingState:
    """Scalar estimates held by every agent of one coordinate of the tracked agent."""

    x: np.ndarray
    t: int = 0


def step_tracking(state: TrackingState, w: WeightMatrix, new_tracked_value: float) -> TrackingState:
    """``x(t+1) = W (x(t) + (new - x_n(t)) e_n)`` with ``n`` the tracked agent."""
    x = np.asarray(state.x, dtype=float)
    if x.shape != (w.n,):
        raise ContractViolation(f"state of shape {x.shape} for a {w.n}-agent matrix")
    j = w.tracked
    shifted = x.copy()
    shifted[j] = new_tracked_value
    out = w.entries @ shifted
    out[j] = new_tracked_value
    return TrackingState(out, state.t + 1)


def lemma1_bound(n: int, eta: float, T: int, t: int, s: int) -> tuple[float, float, float]:
    """Constants of the geometric bound ``|Phi(t,s) - 1 e_n^T| <= kappa rho^(t-s)``.

    ``kappa = (n-1)/(1 - eta^((n-1)T))`` and
    ``rho = (1 - eta^((n-1)T))^(1/(d T))`` with ``d = (n-1)T``.
    """
    if n < 2 or not 0 < eta < 1 or T < 1 or t < s:
        raise ContractViolation(f"invalid parameters n={n} eta={eta} T={T} t={t} s={s}")
    d = (n - 1) * T
    gap = 1.0 - eta ** d
    kappa = (n - 1) / gap
    rho = gap ** (1.0 / (d * T))
    return kappa, rho, kappa * rho ** (t - s)


def _check_factors(phi: MatrixProduct, eta: float) -> None:
    for w in phi.factors:
        # matrices are immutable, so a passing eta is remembered on the instance
        passed = w.__dict__.setdefault("_passed_eta", set())
        if eta in passed:
            continue
        try:
            w.validate(eta)
        except ContractViolation as exc:
            raise ContractViolation(f"factor inconsistent with eta={eta}: {exc}") from exc
        passed.add(eta)


def check_lemma_diagonal(phi: MatrixProduct, eta: float, s: int, t: int,
                         edges: Iterable | None = None,
                         two_hop: Iterable | None = None) -> bool:
    """Positivity floor ``eta^(t-s+1)`` on the diagonal and on linked pairs.

    ``edges`` are the pairs linked within ``[s, t]``; ``two_hop`` are pairs
    ``(i, j)`` joined by a time-respecting two-hop path inside the window.
    Rows of the tracked agent are exempt from the linked-pair floor.
    """
    if t < s:
        raise ContractViolation(f"t={t} < s={s}")
    _check_factors(phi, eta)
    floor = eta ** (t - s + 1) - STEP_TOL
    m = phi.entries
    if np.any(np.diag(m) < floor):
        return False
    pairs = []
    for i, j in edges or ():
        pairs += [(i, j), (j, i)]
    pairs += [tuple(p) for p in two_hop or ()]
    return all(m[i, j] >= floor for i, j in pairs if i != phi.tracked)


def check_lemma_lastcol(phi: MatrixProduct, eta: float, T: int) -> bool:
    """Tracked-agent column of a ``(n-1)T``-step product is at least ``eta^((n-1)T)``."""
    window = (phi.n - 1) * T
    if phi.span != window:
        raise ContractViolation(f"product spans {phi.span} steps, expected (n-1)T={window}")
    _check_factors(phi, eta)
    return bool(np.all(phi.entries[:, phi.tracked] >= eta ** window - STEP_TOL))


@dataclass(frozen=True)
class ContractionResult:
    holds: bool
    iterates: np.ndarray      # x_0 .. x_K
    stated_bound: np.ndarray  # (1 - zeta)^(k-1) |x_0|_inf, k = 0..K
    sharp_bound: np.ndarray   # (1 - zeta)^k |x_0|_inf, k = 0..K


def contraction_step(x0, matrices: Sequence, zeta: float) -> ContractionResult:
    """Iterate ``x_{k+1} = D_k x_k`` with an absorbing last coordinate.

    ``holds`` compares the non-absorbing entries against
    ``(1 - zeta)^(k-1) |x_0|_inf``; the sharper ``(1 - zeta)^k`` envelope is
    reported alongside.
    """
    x = np.asarray(x0, dtype=float)
    n = x.shape[0]
    if x[-1] != 0.0:
        raise ContractViolation("last entry of x0 must be 0")
    if not 0.0 < zeta <= 1.0:
        raise ContractViolation(f"zeta must lie in (0, 1], got {zeta}")
    for k, d in enumerate(matrices):
        d = np.asarray(d, dtype=float)
        if d.shape != (n, n):
            raise ContractViolation(f"D_{k} has shape {d.shape}")
        if np.any(d < 0) or np.any(np.abs(d.sum(axis=1) - 1.0) > STEP_TOL):
            raise ContractViolation(f"D_{k} is not row-stochastic")
        if not np.array_equal(d[-1], _basis(n, n - 1)):
            raise ContractViolation(f"last row of D_{k} is not absorbing")
        if np.any(d[:, -1] < zeta - STEP_TOL):
            raise ContractViolation(f"last column of D_{k} has entries below zeta")

    iterates = [x]
    for d in matrices:
        x = np.asarray(d, dtype=float) @ x
        iterates.append(x)
    iterates = np.array(iterates)
    norm0 = float(np.max(np.abs(iterates[0]))) if n else 0.0
    k = np.arange(len(iterates))
    head = np.inf if zeta == 1.0 else norm0 / (1.0 - zeta)
    stated = np.array([head] + [(1.0 - zeta) ** (kk - 1) * norm0 for kk in k[1:]])
    sharp = (1.0 - zeta) ** k * norm0
    worst = iterates[:, :-1].max(axis=1) if n > 1 else np.zeros(len(k))
    holds = bool(np.all(worst <= stated + STEP_TOL))
    return ContractionResult(holds, iterates, stated, sharp)


def run_tracking(graph, horizon: int, seed: int, scheme: WeightScheme = WeightScheme(),
                 tracked: int | None = None) -> np.ndarray:
    """Follow one frequency coordinate of a randomly acting tracked agent.

    The tracked value obeys ``x(t+1) = x(t) + (b_t - x(t)) / t`` with seeded
    coin flips ``b_t``, so each increment is at most ``1/t``. All agents start
    from the same value. Returns ``err`` with ``err[t] = max_i |x_i(t) - x_n(t)|``
    for ``t = 1 .. horizon + 1`` (index 0 unused).
    """
    n = graph.n
    tracked = n - 1 if tracked is None else tracked
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=horizon + 1).astype(float)
    state = TrackingState(np.full(n, bits[0]), 1)
    err = np.zeros(horizon + 2)
    for t in range(1, horizon + 1):
        value = state.x[tracked] + (bits[t] - state.x[tracked]) / t
        w = weight_matrix_from_edges(scheme, tracked, n, graph.edges_at(t))
        state = step_tracking(state, w, value)
        err[t + 1] = np.max(np.abs(state.x - state.x[tracked]))
    return err
