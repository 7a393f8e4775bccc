"""Finite identical-interest games with a state-dependent common payoff.

A game is a common utility ``u(a, theta)`` over joint actions ``a`` and an
environment state ``theta``. Agents hold beliefs over ``theta`` either as a
probability vector over an enumerated set of states or as a point mass at a
parameter value. Everything here is a pure function of immutable values.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import CapacityError, ContractViolation

PROB_TOL = 1e-9
NASH_TOL = 1e-12
DEFAULT_ENUMERATION_CAP = 10**6

JointAction = tuple  # tuple[int, ...], one action index per agent


@dataclass(frozen=True)
class ActionSpace:
    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) < 2:
            raise ContractViolation(f"need at least 2 agents, got {len(sizes)}")
        if any(s < 1 for s in sizes):
            raise ContractViolation(f"action-space sizes must be >= 1: {sizes}")

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def num_profiles(self) -> int:
        return math.prod(self.sizes)

    def validate(self, a: Sequence[int]) -> JointAction:
        a = tuple(int(x) for x in a)
        if len(a) != self.n:
            raise ContractViolation(f"joint action has {len(a)} entries, expected {self.n}")
        for i, (ai, size) in enumerate(zip(a, self.sizes)):
            if not 0 <= ai < size:
                raise ContractViolation(f"agent {i} action {ai} outside [0, {size})")
        return a

    def profiles(self):
        """Iterate all joint actions in lexicographic order."""
        return itertools.product(*(range(s) for s in self.sizes))


def _as_prob_vector(p, size: int | None = None, what: str = "probability vector") -> np.ndarray:
    v = np.asarray(p, dtype=float)
    if v.ndim != 1:
        raise ContractViolation(f"{what} must be 1-D, got shape {v.shape}")
    if size is not None and v.shape[0] != size:
        raise ContractViolation(f"{what} has length {v.shape[0]}, expected {size}")
    if v.size == 0 or v.min() < -PROB_TOL or abs(v.sum() - 1.0) > PROB_TOL:
        raise ContractViolation(f"{what} is not a distribution: {v}")
    return v


@dataclass(frozen=True)
class MixedStrategy:
    """Independent per-agent distributions; a pure profile is the one-hot case."""

    probs: tuple[np.ndarray, ...]

    def __post_init__(self):
        probs = tuple(_as_prob_vector(p, what=f"strategy of agent {i}")
                      for i, p in enumerate(self.probs))
        object.__setattr__(self, "probs", probs)

    @classmethod
    def pure(cls, a: Sequence[int], sizes: Sequence[int]) -> "MixedStrategy":
        return cls(tuple(onehot(ai, s) for ai, s in zip(a, sizes)))

    @classmethod
    def uniform(cls, sizes: Sequence[int]) -> "MixedStrategy":
        return cls(tuple(np.full(s, 1.0 / s) for s in sizes))

    def __len__(self):
        return len(self.probs)

    def __getitem__(self, i):
        return self.probs[i]


def onehot(index: int, size: int) -> np.ndarray:
    if not 0 <= index < size:
        raise ContractViolation(f"index {index} outside [0, {size})")
    v = np.zeros(size)
    v[index] = 1.0
    return v


@dataclass(frozen=True)
class FiniteStates:
    points: tuple

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class ParamStates:
    shape: tuple[int, ...]


@dataclass(frozen=True)
class FiniteBelief:
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_prob_vector(self.probs, what="state belief"))


@dataclass(frozen=True)
class PointBelief:
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))


StateBelief = FiniteBelief | PointBelief


@dataclass(frozen=True)
class MonteCarlo:
    """Sampling estimator settings used when exact enumeration is too large."""

    samples: int = 10_000
    seed: int = 0


@dataclass(frozen=True)
class GameSpec:
    """Common-payoff game.

    ``utility(a, theta)`` is the scalar payoff. ``payoff_tensor(theta)``, when
    given, must return the same payoffs for every joint action at once as an
    array of shape ``action_space.sizes``; otherwise the tensor is built by
    enumerating ``utility``.
    """

    action_space: ActionSpace
    utility: Callable[[JointAction, Any], float]
    state_space: FiniteStates | ParamStates
    payoff_tensor: Callable[[Any], np.ndarray] | None = None
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP
    sampler: MonteCarlo | None = None
    name: str = field(default="game", compare=False)

    @property
    def n(self) -> int:
        return self.action_space.n

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.action_space.sizes

    def tensor(self, theta) -> np.ndarray:
        if self.payoff_tensor is not None:
            return np.asarray(self.payoff_tensor(theta), dtype=float)
        out = np.empty(self.sizes)
        for a in self.action_space.profiles():
            out[a] = self.utility(a, theta)
        return out


def check_belief(game: GameSpec, belief: StateBelief) -> None:
    space = game.state_space
    if isinstance(belief, FiniteBelief):
        if not isinstance(space, FiniteStates):
            raise ContractViolation("finite belief given for a parameterized state space")
        if belief.probs.shape[0] != len(space):
            raise ContractViolation(
                f"belief over {belief.probs.shape[0]} states, game has {len(space)}")
    elif isinstance(belief, PointBelief):
        if not isinstance(space, ParamStates):
            raise ContractViolation("point belief given for a finite state space")
        if belief.point.shape != tuple(space.shape):
            raise ContractViolation(
                f"point of shape {belief.point.shape}, expected {tuple(space.shape)}")
    else:
        raise ContractViolation(f"unknown belief representation {type(belief).__name__}")


def _support(game: GameSpec, belief: StateBelief) -> list[tuple[float, Any]]:
    """(weight, theta) pairs carrying the belief's mass."""
    check_belief(game, belief)
    if isinstance(belief, PointBelief):
        return [(1.0, belief.point)]
    return [(float(w), game.state_space.points[k])
            for k, w in enumerate(belief.probs) if w > 0.0]


def _coerce_strategies(game: GameSpec, sigma, skip: int | None = None) -> list:
    probs = sigma.probs if isinstance(sigma, MixedStrategy) else tuple(sigma)
    if len(probs) != game.n:
        raise ContractViolation(f"strategy profile has {len(probs)} agents, game has {game.n}")
    out = []
    for j, (p, size) in enumerate(zip(probs, game.sizes)):
        if j == skip:
            out.append(None)
        else:
            out.append(_as_prob_vector(p, size, what=f"strategy of agent {j}"))
    return out


def _exact(game: GameSpec, support) -> bool:
    if game.action_space.num_profiles * len(support) <= game.enumeration_cap:
        return True
    if game.sampler is None:
        raise CapacityError(
            f"{game.action_space.num_profiles} profiles x {len(support)} states exceeds "
            f"enumeration cap {game.enumeration_cap} and no sampler is configured")
    return False


def expected_payoff_tensor(game: GameSpec, belief: StateBelief) -> np.ndarray:
    """Payoff of every joint action averaged over the belief."""
    support = _support(game, belief)
    if not _exact(game, support):
        raise CapacityError("payoff tensor requested beyond the enumeration cap")
    total = None
    for w, theta in support:
        term = w * game.tensor(theta)
        total = term if total is None else total + term
    return total


def contract_others(tensor: np.ndarray, strategies: Sequence, keep: int) -> np.ndarray:
    """Expected payoff for each action of agent ``keep`` against the others."""
    t = np.moveaxis(tensor, keep, 0)
    for j in reversed(range(len(strategies))):
        if j != keep:
            t = t @ strategies[j]
    return t


def _sample_states(rng, support, size):
    weights = np.array([w for w, _ in support])
    idx = rng.choice(len(support), size=size, p=weights / weights.sum())
    return [support[k][1] for k in idx]


def expected_utility(game: GameSpec, sigma, belief: StateBelief) -> float:
    """Expected common payoff of a mixed profile under a state belief.

    Exact when ``|A| * |support(belief)|`` is within the game's enumeration
    cap, otherwise a seeded Monte Carlo estimate using ``game.sampler``.
    """
    strategies = _coerce_strategies(game, sigma)
    support = _support(game, belief)
    if _exact(game, support):
        tensor = expected_payoff_tensor(game, belief)
        return float(contract_others(tensor, strategies, 0) @ strategies[0])

    rng = np.random.default_rng(game.sampler.seed)
    m = game.sampler.samples
    draws = np.stack([rng.choice(len(p), size=m, p=p) for p in strategies], axis=1)
    thetas = _sample_states(rng, support, m)
    return float(np.mean([game.utility(tuple(a), th) for a, th in zip(draws, thetas)]))


def action_values(game: GameSpec, agent: int, others, belief: StateBelief) -> np.ndarray:
    """Expected payoff of each of ``agent``'s actions against ``others``."""
    if not 0 <= agent < game.n:
        raise ContractViolation(f"agent {agent} out of range")
    strategies = _coerce_strategies(game, others, skip=agent)
    support = _support(game, belief)
    if _exact(game, support):
        return contract_others(expected_payoff_tensor(game, belief), strategies, agent)

    # common random numbers across the candidate actions
    rng = np.random.default_rng(game.sampler.seed)
    m = game.sampler.samples
    cols = [np.zeros(m, dtype=int) if p is None else rng.choice(len(p), size=m, p=p)
            for p in strategies]
    draws = np.stack(cols, axis=1)
    thetas = _sample_states(rng, support, m)
    values = np.zeros(game.sizes[agent])
    for ai in range(game.sizes[agent]):
        draws[:, agent] = ai
        values[ai] = np.mean([game.utility(tuple(a), th) for a, th in zip(draws, thetas)])
    return values


def best_response(game: GameSpec, agent: int, others, belief: StateBelief) -> int:
    """Action of ``agent`` maximizing expected payoff; ties go to the lowest index.

    ``others`` holds one distribution per agent; the entry at ``agent`` is
    ignored and may be ``None``.
    """
    return int(np.argmax(action_values(game, agent, others, belief)))


def pure_utility(game: GameSpec, a: Sequence[int], belief: StateBelief) -> float:
    return sum(w * game.utility(tuple(a), theta) for w, theta in _support(game, belief))


def is_pure_nash(game: GameSpec, a: Sequence[int], belief: StateBelief) -> bool:
    """Check every unilateral pure deviation of every agent.

    Uses the scalar utility directly, independent of the tensor path.
    """
    a = game.action_space.validate(a)
    base = pure_utility(game, a, belief)
    for i, size in enumerate(game.sizes):
        for alt in range(size):
            if alt == a[i]:
                continue
            dev = a[:i] + (alt,) + a[i + 1:]
            if pure_utility(game, dev, belief) > base + NASH_TOL:
                return False
    return True


def pure_nash_profiles(game: GameSpec, belief: StateBelief) -> set[JointAction]:
    """All pure equilibria by a vectorized scan of the payoff tensor."""
    tensor = expected_payoff_tensor(game, belief)
    ok = np.ones(tensor.shape, dtype=bool)
    for axis in range(tensor.ndim):
        best = tensor.max(axis=axis, keepdims=True)
        ok &= tensor >= best - NASH_TOL
    return {tuple(int(x) for x in idx) for idx in zip(*np.nonzero(ok))}


def strategy_distance(f, sigma) -> float:
    """Sum over agents of the Euclidean distance between strategy vectors."""
    f = f.probs if isinstance(f, MixedStrategy) else f
    sigma = sigma.probs if isinstance(sigma, MixedStrategy) else sigma
    if len(f) != len(sigma):
        raise ContractViolation(f"agent counts differ: {len(f)} vs {len(sigma)}")
    total = 0.0
    for i, (fi, si) in enumerate(zip(f, sigma)):
        fi, si = np.asarray(fi, dtype=float), np.asarray(si, dtype=float)
        if fi.shape != si.shape:
            raise ContractViolation(f"agent {i}: shapes {fi.shape} vs {si.shape}")
        total += float(np.linalg.norm(fi - si))
    return total


def tv_distance(p: StateBelief, q: StateBelief) -> float:
    """Total variation distance; half-L1 for finite beliefs, 0/1 for point masses."""
    if isinstance(p, FiniteBelief) and isinstance(q, FiniteBelief):
        if p.probs.shape != q.probs.shape:
            raise ContractViolation("beliefs over different state sets")
        return 0.5 * float(np.abs(p.probs - q.probs).sum())
    if isinstance(p, PointBelief) and isinstance(q, PointBelief):
        if p.point.shape != q.point.shape:
            raise ContractViolation("point beliefs of different shapes")
        return 0.0 if np.array_equal(p.point, q.point) else 1.0
    raise ContractViolation("cannot compare finite and point-mass beliefs")


def table_game(payoffs, name: str = "table") -> GameSpec:
    """Stateless game from an explicit payoff array of shape ``sizes``."""
    table = np.asarray(payoffs, dtype=float)
    return GameSpec(
        action_space=ActionSpace(table.shape),
        utility=lambda a, theta: float(table[tuple(a)]),
        state_space=FiniteStates((None,)),
        payoff_tensor=lambda theta: table,
        name=name,
    )


def coordination_game(n: int = 2, m: int = 2) -> GameSpec:
    """Payoff 1 when every agent picks the same action, else 0."""
    table = np.zeros((m,) * n)
    for k in range(m):
        table[(k,) * n] = 1.0
    return table_game(table, name="coordination")


def random_identical_game(sizes: Sequence[int], seed: int) -> GameSpec:
    """Identical-interest game with i.i.d. uniform payoffs."""
    rng = np.random.default_rng(seed)
    return table_game(rng.random(tuple(sizes)), name="random-identical")


CERTAIN = FiniteBelief(np.array([1.0]))
"""Belief for stateless games built by :func:`table_game`."""
