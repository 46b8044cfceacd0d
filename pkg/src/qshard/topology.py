"""Rank layout: which rank owns which amplitude, and how ranks form groups."""

from __future__ import annotations

from dataclasses import dataclass

from .transport import Communicator

MAX_QUBITS = 62


class ConfigurationError(ValueError):
    pass


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def log2_exact(n: int, what: str = "rank count") -> int:
    if not is_power_of_two(n):
        raise ConfigurationError(f"{what} must be a power of two, got {n}")
    return n.bit_length() - 1


@dataclass(frozen=True)
class Topology:
    """Placement of one rank in a run of ``2**p`` ranks over ``nq`` qubits.

    Amplitudes are laid out in standard order, ``n_x`` consecutive ones per
    rank.  Groups are contiguous blocks of ranks.
    """

    nq: int
    p: int
    rank: int
    group_count: int = 1

    def __post_init__(self):
        if not 1 <= self.nq <= MAX_QUBITS:
            raise ConfigurationError(f"qubit count must be in 1..{MAX_QUBITS}, got {self.nq}")
        if not 0 <= self.p <= self.nq:
            raise ConfigurationError(f"need 0 <= p <= nq, got p={self.p}, nq={self.nq}")
        if not 0 <= self.rank < self.n_ranks:
            raise ConfigurationError(f"rank {self.rank} out of range for {self.n_ranks} ranks")
        if not is_power_of_two(self.group_count) or self.n_ranks % self.group_count:
            raise ConfigurationError(
                f"group count {self.group_count} must be a power of two dividing {self.n_ranks}"
            )

    @classmethod
    def create(cls, nq: int, n_ranks: int, rank: int = 0, group_count: int = 1) -> Topology:
        return cls(nq, log2_exact(n_ranks), rank, group_count)

    @property
    def n_ranks(self) -> int:
        return 1 << self.p

    @property
    def n_x(self) -> int:
        return 1 << (self.nq - self.p)

    @property
    def group_size(self) -> int:
        return self.n_ranks // self.group_count

    @property
    def group_id(self) -> int:
        return self.rank // self.group_size

    @property
    def group_rank(self) -> int:
        return self.rank % self.group_size


def section_seat(n: int, n_x: int, nq: int | None = None) -> tuple[int, int]:
    """Return ``(rank, local index)`` holding global amplitude ``n``."""
    if n < 0 or (nq is not None and n >= 1 << nq):
        raise IndexError(f"amplitude index {n} out of range")
    return n // n_x, n % n_x


def same_section(i_s: int, p: int, nq: int | None = None) -> bool:
    """True when both partner amplitudes for qubit ``i_s`` live on one rank."""
    if i_s < 1 or (nq is not None and i_s > nq):
        raise IndexError(f"qubit {i_s} out of range")
    return i_s > p


def group_layout(n_ranks: int, group_count: int) -> list[tuple[int, int]]:
    """``(group_id, group_rank)`` for every world rank under contiguous splitting."""
    if not is_power_of_two(n_ranks):
        raise ConfigurationError(f"rank count must be a power of two, got {n_ranks}")
    if not is_power_of_two(group_count) or n_ranks % group_count:
        raise ConfigurationError(
            f"group count {group_count} must be a power of two dividing {n_ranks}"
        )
    size = n_ranks // group_count
    return [(r // size, r % size) for r in range(n_ranks)]


def split_groups(comm: Communicator, group_count: int) -> Communicator:
    """Give every rank the communicator of its contiguous group.

    The layout is fixed by the rank count, so no messages are exchanged and
    no traffic crosses group boundaries.
    """
    layout = group_layout(comm.size, group_count)
    group_id, _ = layout[comm.rank]
    size = comm.size // group_count
    return comm.subgroup(range(group_id * size, (group_id + 1) * size))
