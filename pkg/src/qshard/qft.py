"""Quantum Fourier transform over register one and measurement of register two.

Register one is qubits ``1..n1`` (the high bits of the basis label) and
register two is qubits ``n1+1..nq``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gates import HADAMARD, controlled_phase, one_op, swap
from .statevector import InputError, Shard

ZERO_PROBABILITY = 1e-14


class MeasurementError(RuntimeError):
    pass


@dataclass(frozen=True)
class RegisterSpec:
    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise InputError(f"both registers need at least one qubit, got n1={self.n1}, n2={self.n2}")

    @property
    def nq(self) -> int:
        return self.n1 + self.n2


def _check_n1(shard: Shard, n1: int) -> None:
    if not 1 <= n1 <= shard.nq:
        raise InputError(f"register size n1={n1} out of range 1..{shard.nq}")


def _phase(k: int, sign: int = 1) -> complex:
    return np.exp(sign * 2j * np.pi / 2**k)


def qft(shard: Shard, n1: int) -> Shard:
    """``|n> -> sum_n' exp(2 pi i n n' / 2**n1) |n'> / sqrt(2**n1)`` on register one."""
    _check_n1(shard, n1)
    for ic in range(1, n1):
        one_op(shard, ic, HADAMARD)
        for k in range(ic + 1, n1 + 1):
            controlled_phase(shard, k, ic, _phase(k + 1 - ic))
    one_op(shard, n1, HADAMARD)
    for i in range(1, n1 // 2 + 1):
        swap(shard, i, n1 + 1 - i)
    return shard


def inverse_qft(shard: Shard, n1: int) -> Shard:
    """Undo :func:`qft`: the same ladder run backwards with conjugated phases."""
    _check_n1(shard, n1)
    for i in range(n1 // 2, 0, -1):
        swap(shard, i, n1 + 1 - i)
    one_op(shard, n1, HADAMARD)
    for ic in range(n1 - 1, 0, -1):
        for k in range(n1, ic, -1):
            controlled_phase(shard, k, ic, _phase(k + 1 - ic, -1))
        one_op(shard, ic, HADAMARD)
    return shard


def _register2_values(shard: Shard, n1: int) -> np.ndarray:
    n2 = shard.nq - n1
    return shard.global_indices() & ((1 << n2) - 1)


def register2_marginals(shard: Shard, n1: int) -> np.ndarray:
    """Probability of every register-two value, identical on all ranks."""
    _check_n1(shard, n1)
    n2 = shard.nq - n1
    local = np.bincount(_register2_values(shard, n1), weights=np.abs(shard.amps) ** 2, minlength=1 << n2)
    return shard.comm.allreduce_sum(local).real


def project_register2(shard: Shard, n1: int, k: int) -> float:
    """Project register two onto ``|k>`` and renormalise; returns the outcome probability.

    Raises :class:`MeasurementError` and leaves the state untouched when the
    outcome is impossible.
    """
    _check_n1(shard, n1)
    n2 = shard.nq - n1
    if n2 < 1 or not 0 <= k < 1 << n2:
        raise InputError(f"register-two value {k} out of range for n2={n2}")
    keep = _register2_values(shard, n1) == k
    local = float(np.sum(np.abs(shard.amps[keep]) ** 2))
    prob = float(shard.comm.allreduce_sum([local])[0].real)
    if prob <= ZERO_PROBABILITY:
        raise MeasurementError(f"register two cannot be found in state {k} (probability {prob:.3g})")
    shard.amps[~keep] = 0.0
    shard.amps[keep] /= np.sqrt(prob)
    return prob


def sample_register2(shard: Shard, n1: int, rng: np.random.Generator | None, root: int = 0) -> int:
    """Draw a register-two outcome; only ``root``'s generator is consumed."""
    marg = register2_marginals(shard, n1)
    k = None
    if shard.rank == root:
        if rng is None:
            raise InputError("the root rank needs a random generator")
        cdf = np.cumsum(marg)
        k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        k = min(k, len(marg) - 1)
        while marg[k] <= 0.0 and k > 0:
            k -= 1
    return shard.comm.bcast_int(k, root=root)
