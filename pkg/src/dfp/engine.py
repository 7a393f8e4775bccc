"""Decentralized fictitious play.

Every agent best-responds to its own estimates of the others' empirical
action frequencies under its own belief about the environment, updates its
own frequency, then averages estimates with its current neighbors using the
stubborn row-stochastic weights of :mod:`dfp.consensus`.

Time convention: initial actions are drawn at ``t = 0`` and frequencies are
defined from ``t = 1`` with ``f(1)`` the one-hot of the initial action.
Step ``t >= 1`` picks ``a(t)`` and produces ``f(t+1) = f(t) + (onehot(a(t)) -
f(t)) / t``, so ``f(t)`` is the mean of ``a(1) .. a(t-1)`` for ``t >= 2``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import metrics
from .consensus import WeightScheme, weight_stack
from .errors import ContractViolation
from .game import (PROB_TOL, FiniteBelief, GameSpec, ParamStates, PointBelief, StateBelief,
                   best_response, tv_distance)
from .network import GraphSequence, WindowConnectivityReport

LEARNING_PROCESSES = ("running-mean", "fixed")


@dataclass(frozen=True)
class LearningConfig:
    """State learning.

    running-mean  point-mass belief at the mean of i.i.d. Gaussian signals
                  around the true state (parameterized states only)
    fixed         every agent holds the reference belief throughout
    """

    process: str = "running-mean"
    noise_scale: float = 0.05

    def __post_init__(self):
        if self.process not in LEARNING_PROCESSES:
            raise ContractViolation(f"unknown learning process {self.process!r}")
        if self.noise_scale < 0:
            raise ContractViolation("noise scale must be non-negative")


@dataclass(frozen=True)
class SimConfig:
    game: GameSpec
    graph: GraphSequence
    reference: StateBelief
    ne_set: frozenset = frozenset()
    scheme: WeightScheme = WeightScheme()
    learning: LearningConfig = LearningConfig()
    horizon: int = 1000
    seed: int = 0
    cadence: int = 1
    extra_exchange: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ContractViolation("horizon must be >= 1")
        if self.cadence < 1:
            raise ContractViolation("cadence must be >= 1")
        if self.graph.n != self.game.n:
            raise ContractViolation(f"graph has {self.graph.n} agents, game has {self.game.n}")
        if self.learning.process == "running-mean":
            if not isinstance(self.game.state_space, ParamStates):
                raise ContractViolation("running-mean learning needs a parameterized state space")
            if not isinstance(self.reference, PointBelief):
                raise ContractViolation("running-mean learning needs a point reference state")


@dataclass(frozen=True)
class AgentState:
    """Snapshot of one agent's view of the world."""

    id: int
    freq: np.ndarray
    estimates: tuple
    belief: StateBelief
    signal_count: int


@dataclass
class World:
    """All agents' state, stored as padded arrays.

    ``freq[i]`` is agent i's empirical frequency and ``estimates[i, j]`` its
    estimate of agent j's; rows are padded with zeros to the widest action set.
    """

    sizes: tuple
    t: int
    freq: np.ndarray
    estimates: np.ndarray
    beliefs: list
    signal_count: int
    rngs: list = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.sizes)

    def agent(self, i: int) -> AgentState:
        est = tuple(self.estimates[i, j, :s].copy() for j, s in enumerate(self.sizes))
        return AgentState(i, self.freq[i, :self.sizes[i]].copy(), est, self.beliefs[i],
                          self.signal_count)

    def copy(self) -> "World":
        return World(self.sizes, self.t, self.freq.copy(), self.estimates.copy(),
                     list(self.beliefs), self.signal_count, self.rngs)


@dataclass(frozen=True)
class TraceRecord:
    """Action chosen at step t and the metrics of the resulting state."""

    t: int
    actions: tuple
    estimate_error: float
    ne_distance: float | None
    tv_disagreement: float


@dataclass
class SimTrace:
    records: list = field(default_factory=list)
    connectivity: WindowConnectivityReport | None = None

    CSV_COLUMNS = ("t", "estimate_error", "ne_distance", "tv_disagreement", "actions")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_COLUMNS)
        for r in self.records:
            writer.writerow([r.t, repr(r.estimate_error),
                             "" if r.ne_distance is None else repr(r.ne_distance),
                             repr(r.tv_disagreement), ";".join(map(str, r.actions))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SimTrace":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls([TraceRecord(int(r["t"]),
                                tuple(int(a) for a in r["actions"].split(";")),
                                float(r["estimate_error"]),
                                float(r["ne_distance"]) if r["ne_distance"] else None,
                                float(r["tv_disagreement"])) for r in rows])

    def series(self, column: str) -> list[tuple[int, float]]:
        return [(r.t, getattr(r, column)) for r in self.records]


def update_frequency(freq, t: int, action: int) -> np.ndarray:
    """One step of the empirical-frequency recursion with divisor ``t``."""
    freq = np.asarray(freq, dtype=float)
    if t < 1:
        raise ContractViolation(f"frequency recursion starts at t=1, got {t}")
    if not 0 <= action < freq.shape[0]:
        raise ContractViolation(f"action {action} outside [0, {freq.shape[0]})")
    target = np.zeros_like(freq)
    target[action] = 1.0
    return freq + (target - freq) / t


def exchange_estimates(estimates: np.ndarray, edges, scheme: WeightScheme) -> np.ndarray:
    """One averaging round over ``edges`` for every tracked agent.

    ``estimates[i, j]`` is agent i's estimate of agent j; the diagonal must
    already hold each agent's own frequency. Row j of agent j's weight matrix
    is stubborn, so the diagonal is carried over unchanged.
    """
    n = estimates.shape[0]
    if estimates.shape[1] != n:
        raise ContractViolation(f"estimate table of shape {estimates.shape}")
    for a, b in edges:
        if not (0 <= a < n and 0 <= b < n) or a == b:
            raise ContractViolation(f"invalid edge ({a}, {b}) for {n} agents")
    w = weight_stack(scheme, n, edges)
    out = np.einsum("jik,kjl->ijl", w, estimates)
    idx = np.arange(n)
    out[idx, idx] = estimates[idx, idx]
    return out


def learn_state(belief: PointBelief, count: int, signal) -> PointBelief:
    """Fold one more signal into a running-mean point belief.

    ``count`` is the number of signals already averaged into ``belief``.
    """
    signal = np.asarray(signal, dtype=float)
    if signal.shape != belief.point.shape:
        raise ContractViolation(
            f"signal of shape {signal.shape} for a state of shape {belief.point.shape}")
    if count == 0:
        return PointBelief(signal.copy())
    return PointBelief(belief.point + (signal - belief.point) / (count + 1))


def _draw_signal(config: SimConfig, rng) -> np.ndarray:
    truth = config.reference.point
    return truth + config.learning.noise_scale * rng.standard_normal(truth.shape)


def initialize(config: SimConfig) -> World:
    """Random initial actions, broadcast so every estimate starts exact."""
    game = config.game
    n, sizes = game.n, game.sizes
    seeds = np.random.SeedSequence(config.seed).spawn(n + 1)
    action_rng = np.random.default_rng(seeds[0])
    rngs = [np.random.default_rng(s) for s in seeds[1:]]

    width = max(sizes)
    freq = np.zeros((n, width))
    for i, size in enumerate(sizes):
        freq[i, action_rng.integers(size)] = 1.0
    estimates = np.repeat(freq[None, :, :], n, axis=0)

    if config.learning.process == "running-mean":
        beliefs = [learn_state(config.reference, 0, _draw_signal(config, rng)) for rng in rngs]
        return World(sizes, 1, freq, estimates, beliefs, 1, rngs)
    return World(sizes, 1, freq, estimates, [config.reference] * n, 0, rngs)


def choose_actions(world: World, config: SimConfig) -> tuple:
    game = config.game
    actions = []
    for i in range(world.n):
        others = [None if j == i else world.estimates[i, j, :s]
                  for j, s in enumerate(world.sizes)]
        actions.append(best_response(game, i, others, world.beliefs[i]))
    return tuple(actions)


def step(world: World, config: SimConfig, t: int) -> tuple[tuple, World]:
    """Advance from time t to t+1 in place; returns the actions taken at t."""
    if t < 1 or t != world.t:
        raise ContractViolation(f"world is at t={world.t}, asked to step t={t}")
    actions = choose_actions(world, config)

    for i, a in enumerate(actions):
        size = world.sizes[i]
        world.freq[i, :size] = update_frequency(world.freq[i, :size], t, a)
        world.estimates[i, i] = world.freq[i]

    edges = config.graph.edges_at(t)
    world.estimates = exchange_estimates(world.estimates, edges, config.scheme)
    if config.extra_exchange:
        world.estimates = exchange_estimates(
            world.estimates, edges, WeightScheme(config.scheme.eta, "source-priority"))

    if config.learning.process == "running-mean":
        world.beliefs = [learn_state(b, world.signal_count, _draw_signal(config, rng))
                         for b, rng in zip(world.beliefs, world.rngs)]
        world.signal_count += 1

    world.t = t + 1
    return actions, world


def check_world(world: World) -> None:
    """Raise if frequencies or estimates drift off the simplex or stubbornness breaks."""
    for arr, what in ((world.freq, "frequency"), (world.estimates, "estimate")):
        if np.any(arr < -PROB_TOL) or np.any(np.abs(arr.sum(axis=-1) - 1.0) > PROB_TOL):
            raise ContractViolation(f"{what} left the probability simplex at t={world.t}")
    for j in range(world.n):
        if not np.array_equal(world.estimates[j, j], world.freq[j]):
            raise ContractViolation(f"agent {j} lost its own frequency at t={world.t}")


def tv_disagreement(world: World, reference: StateBelief) -> float:
    return max(tv_distance(b, reference) for b in world.beliefs)


def run(config: SimConfig, connectivity: WindowConnectivityReport | None = None,
        check_every: int = 0) -> tuple[World, SimTrace]:
    """Initialize and run ``config.horizon`` steps, recording every ``cadence`` steps."""
    world = initialize(config)
    trace = SimTrace(connectivity=connectivity)
    lifted = (metrics.lift_ne_set(config.ne_set, config.game.sizes)
              if config.ne_set else None)
    for t in range(1, config.horizon + 1):
        actions, world = step(world, config, t)
        if check_every and t % check_every == 0:
            check_world(world)
        if t % config.cadence == 0 or t == config.horizon:
            trace.records.append(TraceRecord(
                t, actions, metrics.estimate_error(world),
                None if lifted is None else metrics.ne_distance(world, lifted),
                tv_disagreement(world, config.reference)))
    return world, trace


def centralized_fictitious_play(payoffs, first_actions, steps: int) -> list[tuple]:
    """Reference fictitious play for a two-player identical-interest table game.

    Each player best-responds to the other's exact empirical frequency, with
    the same time convention and lowest-index tie-breaking as :func:`step`.
    """
    table = np.asarray(payoffs, dtype=float)
    counts = [np.zeros(table.shape[0]), np.zeros(table.shape[1])]
    freqs = [np.eye(table.shape[0])[first_actions[0]], np.eye(table.shape[1])[first_actions[1]]]
    history = []
    for t in range(1, steps + 1):
        a0 = int(np.argmax(table @ freqs[1]))
        a1 = int(np.argmax(table.T @ freqs[0]))
        history.append((a0, a1))
        counts[0][a0] += 1
        counts[1][a1] += 1
        freqs = [counts[0] / t, counts[1] / t]
    return history


def summary_metrics(trace: SimTrace, ne_set: Any) -> dict:
    last = trace.records[-1]
    return {
        "estimate_error": last.estimate_error,
        "ne_distance": last.ne_distance,
        "tv_disagreement": last.tv_disagreement,
        "ne_hit_time": metrics.ne_hit_time(trace, ne_set) if ne_set else None,
    }
