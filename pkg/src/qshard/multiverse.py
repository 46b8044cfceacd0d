"""Run one algorithm replica per rank group, each under its own noise plan.

The world communicator is cut into ``group_count`` contiguous groups.  Each
group runs the whole algorithm on its own sub-communicator; the only traffic
between groups is the final collection of group states for the density
matrix.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import rng as rngs
from .algorithms.grover import GroverConfig, grover_run, injection_points
from .algorithms.shor import INJECTION_POINTS as SHOR_POINTS
from .algorithms.shor import ShorConfig, shor_state_path
from .density import DensityMatrix, assemble_density, check_density_size, check_weights
from .noise import ONE_QUBIT, NoiseEvent, draw_noise_plan, noise_hook
from .statevector import InputError, Shard
from .topology import ConfigurationError, group_layout, split_groups
from .transport import Communicator

Hook = Callable[[str, Shard], None]


class Algorithm(Protocol):
    nq: int
    injection_points: Sequence[str]

    def run(self, comm: Communicator, hook: Hook | None) -> tuple[Shard, list[float]]:
        """Collective over ``comm``; returns the final state and a few summary numbers."""


@dataclass(frozen=True)
class GroverAlgorithm:
    config: GroverConfig
    use_hall2: bool = False

    @property
    def nq(self) -> int:
        return self.config.nq

    @property
    def injection_points(self) -> list[str]:
        return injection_points(self.config.n_t)

    def run(self, comm, hook):
        res = grover_run(self.config, comm, hook, self.use_hall2)
        return res.shard, [res.probability]


@dataclass(frozen=True)
class ShorAlgorithm:
    """One measured path: load, sample register two from the seeded stream, transform."""

    config: ShorConfig
    seed: int = 0

    @property
    def nq(self) -> int:
        return self.config.nq

    @property
    def injection_points(self) -> tuple[str, ...]:
        return SHOR_POINTS

    def run(self, comm, hook):
        gen = rngs.stream(self.seed, rngs.MEASURE) if comm.rank == 0 else None
        shard, k, prob = shor_state_path(self.config, comm, gen, hook)
        return shard, [float(k), prob]


@dataclass(frozen=True)
class MultiverseConfig:
    group_count: int
    weights: tuple[float, ...] | None = None
    seed: int = 0
    noise_count: int = 1
    kind: str = ONE_QUBIT
    plans: tuple[tuple[NoiseEvent, ...], ...] | None = None

    def __post_init__(self):
        if self.group_count < 1 or self.group_count & (self.group_count - 1):
            raise ConfigurationError(f"group count must be a power of two, got {self.group_count}")
        if self.weights is not None:
            check_weights(self.weights, self.group_count)
        if self.plans is not None:
            if len(self.plans) != self.group_count:
                raise InputError(f"expected {self.group_count} noise plans, got {len(self.plans)}")
            if self.plans[0]:
                raise InputError("group 0 runs without noise")

    def resolved_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.group_count, 1.0 / self.group_count)
        return check_weights(self.weights, self.group_count)

    def noise_plans(self, nq: int, points: Sequence[str]) -> list[list[NoiseEvent]]:
        if self.plans is not None:
            plans = [list(p) for p in self.plans]
        else:
            plans = [
                draw_noise_plan(g, self.seed, nq, points, self.noise_count, self.kind)
                for g in range(self.group_count)
            ]
        for plan in plans:
            for ev in plan:
                ev.check(nq, len(points))
        return plans


@dataclass
class MultiverseResult:
    group_id: int
    shard: Shard
    plans: list[list[NoiseEvent]]
    weights: np.ndarray
    cross_group_messages: int
    """Messages this rank sent outside its group before the collection phase."""
    states: np.ndarray | None = field(default=None, repr=False)
    summaries: list[list[float]] | None = None
    density: DensityMatrix | None = None


def run_multiverse(
    algorithm: Algorithm,
    config: MultiverseConfig,
    world: Communicator,
    density_mode: str | None = None,
) -> MultiverseResult:
    """Collective over ``world``.

    Group states, per-group summaries and (when ``density_mode`` is given)
    the density matrix are returned on world rank 0.
    """
    group_layout(world.size, config.group_count)
    weights = config.resolved_weights()
    if density_mode is not None:
        check_density_size(algorithm.nq)
    points = list(algorithm.injection_points)
    plans = config.noise_plans(algorithm.nq, points)

    before = world.endpoint.sent.copy()
    group = split_groups(world, config.group_count)
    group_id = world.rank // group.size
    outsiders = [r for r in world.members if r not in group.members]
    plan = plans[group_id]
    hook = noise_hook(plan, points) if plan else None
    shard, summary = algorithm.run(group, hook)
    after = world.endpoint.sent
    crossed = sum(after[r] - before[r] for r in outsiders)

    result = MultiverseResult(group_id, shard, plans, weights, crossed)
    if density_mode is not None:
        result.density = assemble_density(shard, weights, world, density_mode)
        if result.density is not None:
            result.states = result.density.states
    else:
        full = world.gather_concat(shard.amps)
        if full is not None:
            result.states = full.reshape(config.group_count, -1)
    parts = world.gather(summary)
    if parts is not None:
        step = group.size
        result.summaries = [[float(v.real) for v in parts[g * step]] for g in range(config.group_count)]
    return result
