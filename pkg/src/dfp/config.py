"""JSON run configuration: parsing, validation and assembly of a SimConfig.

A config document has five sections, ``game``, ``graph``, ``weights``,
``learning`` and ``run``; unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .consensus import WeightScheme
from .engine import LearningConfig, SimConfig
from .errors import ConfigError, ContractViolation
from .game import CERTAIN, PointBelief, coordination_game, pure_nash_profiles, random_identical_game
from .network import GraphSequence, base_edges
from .targets import DEFAULT_SEED, TargetWorld, enumerate_pure_ne, make_benchmark


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GameSection(_Section):
    kind: Literal["target-assignment", "random-identical", "coordination"] = "target-assignment"
    n: int = Field(5, ge=1)
    seed: int = DEFAULT_SEED
    sizes: Optional[list[int]] = None
    actions: int = Field(2, ge=1)


class GraphSection(_Section):
    kind: Literal["static", "edge-cycle", "seeded-random", "periodic"] = "static"
    base: Union[Literal["ring", "star", "complete", "path"], list[tuple[int, int]]] = "ring"
    n: Optional[int] = None
    p: float = Field(0.5, ge=0.0, le=1.0)
    seed: int = 0
    T: int = Field(1, ge=1)
    schedule: Optional[list[list[tuple[int, int]]]] = None


class WeightsSection(_Section):
    rule: Literal["uniform", "source-priority"] = "uniform"
    eta: Optional[float] = Field(None, gt=0.0, lt=1.0)


class LearningSection(_Section):
    process: Optional[Literal["running-mean", "fixed"]] = None
    noise_scale: float = Field(0.05, ge=0.0)


class RunSection(_Section):
    horizon: int = Field(1000, ge=1)
    seed: int = 0
    cadence: int = Field(1, ge=1)
    extra_exchange: bool = False


class RunConfig(_Section):
    game: GameSection = GameSection()
    graph: GraphSection = GraphSection()
    weights: WeightsSection = WeightsSection()
    learning: LearningSection = LearningSection()
    run: RunSection = RunSection()


@dataclass(frozen=True)
class Scenario:
    """Everything needed to execute one configured run."""

    raw: RunConfig
    sim: SimConfig
    window: int
    world: TargetWorld | None = None


def parse_config(text: str) -> RunConfig:
    try:
        return RunConfig.model_validate(json.loads(text))
    except (json.JSONDecodeError, ValidationError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def with_overrides(cfg: RunConfig, *, seed: int | None = None,
                   topology: str | None = None) -> RunConfig:
    """Copy of ``cfg`` with a different run seed and/or a topology label."""
    data = cfg.model_dump()
    if seed is not None:
        data["run"]["seed"] = seed
    if topology is not None:
        data["graph"].update(topology_section(topology, cfg))
    return RunConfig.model_validate(data)


TOPOLOGY_KINDS = {"static": "static", "cycle": "edge-cycle", "random": "seeded-random"}


def topology_section(label: str, cfg: RunConfig) -> dict:
    """Graph fields for labels such as ``static-ring`` or ``cycle-star``.

    Edge-cycle topologies get a window of at least the number of base edges.
    """
    prefix, _, base = label.partition("-")
    if prefix not in TOPOLOGY_KINDS or base not in ("ring", "star", "complete", "path"):
        raise ConfigError(f"unknown topology {label!r}")
    kind = TOPOLOGY_KINDS[prefix]
    T = cfg.graph.T
    if kind == "edge-cycle":
        T = max(T, len(base_edges(base, _agent_count(cfg))))
    return {"kind": kind, "base": base, "T": T, "schedule": None}


def _agent_count(cfg: RunConfig) -> int:
    g = cfg.game
    if g.kind == "random-identical" and g.sizes:
        return len(g.sizes)
    return g.n


def build_scenario(cfg: RunConfig) -> Scenario:
    """Assemble game, graph, weights and learning into a validated SimConfig."""
    g = cfg.game
    world = None
    process = cfg.learning.process
    try:
        if g.kind == "target-assignment":
            world, game = make_benchmark(g.seed, g.n, cfg.learning.noise_scale)
            reference = PointBelief(world.target_positions)
            ne_set = frozenset(enumerate_pure_ne(world))
            process = process or "running-mean"
        else:
            if g.kind == "random-identical":
                game = random_identical_game(g.sizes or [g.actions] * g.n, g.seed)
            else:
                game = coordination_game(g.n, g.actions)
            reference = CERTAIN
            ne_set = frozenset(pure_nash_profiles(game, reference))
            process = process or "fixed"

        n = game.n
        gr = cfg.graph
        if gr.n is not None and gr.n != n:
            raise ConfigError(f"graph.n={gr.n} but the game has {n} agents")
        base = gr.base if isinstance(gr.base, str) else tuple(tuple(e) for e in gr.base)
        schedule = (tuple(tuple(tuple(e) for e in es) for es in gr.schedule)
                    if gr.schedule is not None else None)
        graph = GraphSequence(n=n, kind=gr.kind, base=base, p=gr.p, seed=gr.seed,
                              schedule=schedule, horizon=cfg.run.horizon)
        scheme = WeightScheme(cfg.weights.eta, cfg.weights.rule)
        sim = SimConfig(
            game=game, graph=graph, reference=reference, ne_set=ne_set, scheme=scheme,
            learning=LearningConfig(process, cfg.learning.noise_scale),
            horizon=cfg.run.horizon, seed=cfg.run.seed, cadence=cfg.run.cadence,
            extra_exchange=cfg.run.extra_exchange)
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from exc
    return Scenario(cfg, sim, gr.T, world)


def config_echo(cfg: RunConfig) -> dict:
    return json.loads(cfg.model_dump_json())


def eta_report(scenario: Scenario) -> dict:
    n = scenario.sim.game.n
    scheme = scenario.sim.scheme
    eta = 1.0 / n if scheme.eta is None else scheme.eta
    return {"rule": scheme.rule, "eta": eta, "max_eta": 1.0 / n,
            "ok": bool(eta <= 1.0 / n + 1e-12)}


def as_jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")
