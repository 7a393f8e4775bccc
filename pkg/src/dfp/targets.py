"""Target assignment: n agents cover n targets in the plane.

Agent ``i`` earns ``1/|x_i - theta_k|^2`` from its chosen target ``k`` unless
another agent picked the same target, in which case it earns nothing. The
common payoff is the sum over agents. With as many targets as agents every
full-coverage profile is an equilibrium: any deviation lands on an occupied
target and zeroes two terms.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConfigError, SingularityError
from .game import NASH_TOL, ActionSpace, GameSpec, ParamStates

DEFAULT_SEED = 20190
MIN_SEPARATION = 0.05
MAX_ENUMERATION_AGENTS = 7


@dataclass(frozen=True)
class TargetWorld:
    agent_positions: np.ndarray
    target_positions: np.ndarray
    noise_scale: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        agents = np.asarray(self.agent_positions, dtype=float)
        targets = np.asarray(self.target_positions, dtype=float)
        if agents.ndim != 2 or targets.shape[1:] != agents.shape[1:]:
            raise ConfigError(f"positions of shapes {agents.shape} and {targets.shape}")
        if np.any(_sq_distances(agents, targets) == 0.0):
            raise SingularityError("an agent is collocated with a target")
        object.__setattr__(self, "agent_positions", agents)
        object.__setattr__(self, "target_positions", targets)

    @property
    def n(self) -> int:
        return self.agent_positions.shape[0]

    @property
    def num_targets(self) -> int:
        return self.target_positions.shape[0]

    def to_dict(self) -> dict:
        return {
            "agent_positions": self.agent_positions.tolist(),
            "target_positions": self.target_positions.tolist(),
            "noise_scale": self.noise_scale,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TargetWorld":
        return cls(np.array(d["agent_positions"]), np.array(d["target_positions"]),
                   d.get("noise_scale", 0.0), d.get("seed"))


def _sq_distances(agents, targets) -> np.ndarray:
    diff = agents[:, None, :] - targets[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def task_utility(world: TargetWorld, a, theta=None) -> float:
    """Common payoff of joint action ``a`` with targets located at ``theta``."""
    theta = world.target_positions if theta is None else np.asarray(theta, dtype=float)
    a = tuple(int(k) for k in a)
    total = 0.0
    for i, k in enumerate(a):
        if any(a[j] == k for j in range(len(a)) if j != i):
            continue
        d2 = float(np.sum((world.agent_positions[i] - theta[k]) ** 2))
        if d2 == 0.0:
            raise SingularityError(f"agent {i} sits on target {k}")
        total += 1.0 / d2
    return total


@functools.lru_cache(maxsize=16)
def _coverage_matrix(n: int, m: int) -> np.ndarray:
    """0/1 matrix mapping flattened (agent, target) gains to joint-action payoffs.

    Row ``a`` has a one at ``(i, a_i)`` exactly when no other agent picked ``a_i``.
    """
    profiles = np.indices((m,) * n).reshape(n, -1).T
    alone = (profiles[:, :, None] == profiles[:, None, :]).sum(axis=2) == 1
    cover = np.zeros((profiles.shape[0], n * m))
    rows, agents = np.nonzero(alone)
    cover[rows, agents * m + profiles[rows, agents]] = 1.0
    cover.setflags(write=False)
    return cover


def task_payoff_tensor(world: TargetWorld, theta=None) -> np.ndarray:
    """Payoffs of every joint action at once, shape ``(m,) * n``."""
    theta = world.target_positions if theta is None else np.asarray(theta, dtype=float)
    n, m = world.n, theta.shape[0]
    d2 = _sq_distances(world.agent_positions, theta)
    if np.any(d2 == 0.0):
        raise SingularityError("an agent is collocated with a target estimate")
    return (_coverage_matrix(n, m) @ (1.0 / d2).ravel()).reshape((m,) * n)


def target_game(world: TargetWorld) -> GameSpec:
    return GameSpec(
        action_space=ActionSpace((world.num_targets,) * world.n),
        utility=lambda a, theta: task_utility(world, a, theta),
        state_space=ParamStates(world.target_positions.shape),
        payoff_tensor=lambda theta: task_payoff_tensor(world, theta),
        name="target-assignment",
    )


def enumerate_pure_ne(world: TargetWorld, theta=None,
                      max_agents: int = MAX_ENUMERATION_AGENTS) -> set[tuple]:
    """Every pure equilibrium under a point belief at ``theta``, by exhaustive scan."""
    if world.n > max_agents:
        raise CapacityError(f"{world.n} agents exceeds enumeration cap of {max_agents}")
    u = task_payoff_tensor(world, theta)
    ok = np.ones(u.shape, dtype=bool)
    for axis in range(u.ndim):
        ok &= u >= u.max(axis=axis, keepdims=True) - NASH_TOL
    return {tuple(int(x) for x in idx) for idx in zip(*np.nonzero(ok))}


def permutation_profiles(n: int) -> list[tuple]:
    return list(itertools.permutations(range(n)))


def make_benchmark(seed: int = DEFAULT_SEED, n: int = 5, noise_scale: float = 0.05,
                   min_separation: float = MIN_SEPARATION,
                   max_tries: int = 1000) -> tuple[TargetWorld, GameSpec]:
    """Random agents and targets in the unit square, kept apart by ``min_separation``."""
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        agents = rng.random((n, 2))
        targets = rng.random((n, 2))
        if np.sqrt(_sq_distances(agents, targets)).min() >= min_separation:
            world = TargetWorld(agents, targets, noise_scale, seed)
            return world, target_game(world)
    raise ConfigError(f"no placement with separation {min_separation} in {max_tries} tries")
