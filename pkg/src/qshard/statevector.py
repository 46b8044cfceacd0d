"""Sharded state vectors and basis-index arithmetic.

Qubits are numbered 1..nq with qubit 1 the most significant bit of the
decimal basis label, so qubit ``i`` contributes ``q_i * 2**(nq - i)``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .topology import MAX_QUBITS, ConfigurationError, Topology, log2_exact, section_seat
from .transport import Communicator


class InputError(ValueError):
    pass


class ContractViolation(ValueError):
    pass


def _check_nq(nq: int) -> None:
    if not 1 <= nq <= MAX_QUBITS:
        raise InputError(f"qubit count must be in 1..{MAX_QUBITS}, got {nq}")


def _check_qubit(i_s: int, nq: int) -> None:
    if not 1 <= i_s <= nq:
        raise InputError(f"qubit {i_s} out of range 1..{nq}")


def stride(i_s: int, nq: int) -> int:
    return 1 << (nq - i_s)


def bintodec(nq: int, bits: Sequence[int]) -> int:
    _check_nq(nq)
    if len(bits) != nq:
        raise InputError(f"expected {nq} bits, got {len(bits)}")
    n = 0
    for b in bits:
        if b not in (0, 1):
            raise InputError(f"non-binary digit {b!r}")
        n = 2 * n + int(b)
    return n


def dectobin(nq: int, n: int) -> tuple[int, ...]:
    _check_nq(nq)
    if not 0 <= n < 1 << nq:
        raise InputError(f"index {n} out of range for {nq} qubits")
    return tuple((n >> (nq - i)) & 1 for i in range(1, nq + 1))


def bit(n: int, i_s: int, nq: int) -> int:
    return (n >> (nq - i_s)) & 1


def partner(n0: int, i_s: int, nq: int) -> int:
    """Index coupled to ``n0`` by a one-qubit operator on ``i_s``."""
    _check_qubit(i_s, nq)
    if bit(n0, i_s, nq):
        raise ContractViolation(f"qubit {i_s} of {n0} is already 1")
    return n0 + stride(i_s, nq)


def quartet(n00: int, i_s1: int, i_s2: int, nq: int) -> tuple[int, int, int]:
    """Indices ``(n01, n10, n11)`` mixed with ``n00`` by a two-qubit operator."""
    _check_qubit(i_s1, nq)
    _check_qubit(i_s2, nq)
    if i_s1 == i_s2:
        raise InputError("two-qubit operator needs two distinct qubits")
    if bit(n00, i_s1, nq) or bit(n00, i_s2, nq):
        raise ContractViolation(f"struck bits of {n00} are not both zero")
    s1, s2 = stride(i_s1, nq), stride(i_s2, nq)
    return n00 + s2, n00 + s1, n00 + s1 + s2


def pair_bases(size: int, step: int) -> np.ndarray:
    """All indices in ``range(size)`` whose ``step`` bit is clear."""
    idx = np.arange(size, dtype=np.int64)
    return idx[(idx & step) == 0]


@dataclass
class Shard:
    """One rank's contiguous slice of the global amplitude vector."""

    nq: int
    comm: Communicator
    amps: np.ndarray

    def __post_init__(self):
        _check_nq(self.nq)
        p = log2_exact(self.comm.size)
        if p > self.nq:
            raise ConfigurationError(f"{self.comm.size} ranks cannot share {self.nq} qubits")
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (self.n_x,):
            raise ConfigurationError(f"shard holds {self.amps.shape} amplitudes, expected ({self.n_x},)")

    @property
    def p(self) -> int:
        return self.comm.size.bit_length() - 1

    @property
    def rank(self) -> int:
        return self.comm.rank

    @property
    def n_x(self) -> int:
        return (1 << self.nq) >> self.p

    @property
    def base(self) -> int:
        return self.rank * self.n_x

    @property
    def topology(self) -> Topology:
        return Topology(self.nq, self.p, self.rank)

    def global_indices(self) -> np.ndarray:
        return np.arange(self.base, self.base + self.n_x, dtype=np.int64)

    def owns(self, n: int) -> bool:
        return section_seat(n, self.n_x, self.nq)[0] == self.rank

    def copy(self) -> Shard:
        return Shard(self.nq, self.comm, self.amps.copy())

    def gather(self, root: int = 0) -> np.ndarray | None:
        return self.comm.gather_concat(self.amps, root)

    def allgather(self) -> np.ndarray:
        return np.concatenate(self.comm.allgather(self.amps))

    def norm_sq(self) -> float:
        local = np.vdot(self.amps, self.amps).real
        return float(self.comm.allreduce_sum([local])[0].real)


def _slot(nq: int, comm: Communicator) -> tuple[int, int]:
    _check_nq(nq)
    p = log2_exact(comm.size)
    if p > nq:
        raise ConfigurationError(f"{comm.size} ranks cannot share {nq} qubits")
    n_x = (1 << nq) >> p
    return n_x, comm.rank * n_x


def init_basis(nq: int, n: int, comm: Communicator) -> Shard:
    """Basis state ``|n>``: amplitude 1 on the owning rank, zero elsewhere."""
    n_x, base = _slot(nq, comm)
    if not 0 <= n < 1 << nq:
        raise InputError(f"basis index {n} out of range for {nq} qubits")
    amps = np.zeros(n_x, dtype=np.complex128)
    section, seat = section_seat(n, n_x, nq)
    if section == comm.rank:
        amps[seat] = 1.0
    return Shard(nq, comm, amps)


def from_global(nq: int, vec, comm: Communicator) -> Shard:
    """Take this rank's slice of a full vector that every rank already holds."""
    n_x, base = _slot(nq, comm)
    vec = np.asarray(vec, dtype=np.complex128)
    if vec.shape != (1 << nq,):
        raise InputError(f"vector has shape {vec.shape}, expected ({1 << nq},)")
    return Shard(nq, comm, vec[base:base + n_x].copy())


def format_state_dump(vec) -> str:
    """Text dump, one ``index re im`` line per amplitude in standard order."""
    lines = [f"{n} {float(c.real)!r} {float(c.imag)!r}" for n, c in enumerate(np.asarray(vec, dtype=np.complex128))]
    return "\n".join(lines) + "\n"


def parse_state_dump(text: str) -> np.ndarray:
    rows = [line.split() for line in text.splitlines() if line.strip()]
    vec = np.zeros(len(rows), dtype=np.complex128)
    for expected, row in enumerate(rows):
        try:
            if len(row) != 3 or int(row[0]) != expected:
                raise ValueError
            vec[expected] = complex(float(row[1]), float(row[2]))
        except ValueError:
            raise InputError(f"malformed state dump line {expected}: {' '.join(row)!r}") from None
    return vec
