"""Grover search over the sharded state."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from ..gates import hall, hall2
from ..statevector import InputError, Shard, init_basis
from ..topology import section_seat
from ..transport import Communicator

Hook = Callable[[str, Shard], None]


def grover_iterations(nq: int) -> int:
    return int(round(math.pi / 4 * math.sqrt(2.0**nq)))


def injection_points(iterations: int) -> list[str]:
    """Checkpoint names a noise plan may target: after each Grover iteration."""
    return [f"iter{t}" for t in range(1, iterations + 1)]


def closed_form_success(nq: int, t: int) -> float:
    """Textbook single-marked-item success probability after ``t`` iterations."""
    theta = 2 * math.asin(2.0 ** (-nq / 2))
    return math.sin((2 * t + 1) * theta / 2) ** 2


@dataclass(frozen=True)
class GroverConfig:
    nq: int
    marked: int
    iterations: int | None = None

    def __post_init__(self):
        if self.nq < 1:
            raise InputError(f"qubit count must be positive, got {self.nq}")
        if not 0 <= self.marked < 1 << self.nq:
            raise InputError(f"marked item {self.marked} out of range 0..{(1 << self.nq) - 1}")
        if self.iterations is not None and self.iterations < 0:
            raise InputError("iteration count cannot be negative")

    @property
    def n_t(self) -> int:
        return grover_iterations(self.nq) if self.iterations is None else self.iterations


@dataclass
class GroverResult:
    shard: Shard
    marked: int
    iterations: int
    probability: float


def grover_oracle(shard: Shard, marked: int) -> Shard:
    """Flip the sign of the marked amplitude on the rank that owns it."""
    section, seat = section_seat(marked, shard.n_x, shard.nq)
    if section == shard.rank:
        shard.amps[seat] = -shard.amps[seat]
    return shard


def grover_inversion(shard: Shard) -> Shard:
    """``2|0><0| - 1``: negate every amplitude except index 0."""
    if shard.rank == 0:
        shard.amps[1:] = -shard.amps[1:]
    else:
        shard.amps[:] = -shard.amps
    return shard


def amplitude_probability(shard: Shard, n: int) -> float:
    section, seat = section_seat(n, shard.n_x, shard.nq)
    local = abs(shard.amps[seat]) ** 2 if section == shard.rank else 0.0
    return float(shard.comm.allreduce_sum([local])[0].real)


def grover_run(
    config: GroverConfig,
    comm: Communicator,
    hook: Hook | None = None,
    use_hall2: bool = False,
) -> GroverResult:
    """Collective: HALL|0>, then ``n_t`` rounds of oracle, HALL, inversion, HALL."""
    hadamards = hall2 if use_hall2 else hall
    shard = hadamards(init_basis(config.nq, 0, comm))
    for t in range(1, config.n_t + 1):
        grover_oracle(shard, config.marked)
        hadamards(shard)
        grover_inversion(shard)
        hadamards(shard)
        if hook is not None:
            hook(f"iter{t}", shard)
    prob = amplitude_probability(shard, config.marked)
    return GroverResult(shard, config.marked, config.n_t, prob)


def dense_grover_probabilities(nq: int, marked: int, iterations: int) -> np.ndarray:
    """Single-process reference: success probability after 0..iterations rounds."""
    size = 1 << nq
    psi = np.full(size, size**-0.5, dtype=np.complex128)
    out = [abs(psi[marked]) ** 2]
    for _ in range(iterations):
        psi[marked] = -psi[marked]
        psi = 2 * psi.mean() - psi
        out.append(abs(psi[marked]) ** 2)
    return np.array(out)
