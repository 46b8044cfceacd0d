"""Built-in equivalence checks: distributed operators against dense references.

The dense side works on the full vector as an ``nq``-axis tensor, so it
shares nothing with the sharded kernels it is checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngs
from .gates import Gate2, Gate4, hall, hall2, one_op, two_op
from .qft import inverse_qft, qft
from .statevector import from_global
from .transport import Communicator

CHECK_STREAM = 10
GATE_TOL = 1e-12
QFT_TOL = 1e-10
GATES_PER_QUBIT = 3


@dataclass
class SuiteResult:
    name: str
    passed: int
    total: int

    @property
    def ok(self) -> bool:
        return self.passed == self.total


def random_state(gen: np.random.Generator, nq: int) -> np.ndarray:
    v = gen.normal(size=1 << nq) + 1j * gen.normal(size=1 << nq)
    return v / np.linalg.norm(v)


def random_unitary(gen: np.random.Generator, dim: int) -> np.ndarray:
    z = gen.normal(size=(dim, dim)) + 1j * gen.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def dense_apply(vec: np.ndarray, nq: int, qubits: list[int], m: np.ndarray) -> np.ndarray:
    """Apply ``m`` to the listed qubits (first listed = high bit of ``m``)."""
    k = len(qubits)
    t = vec.reshape([2] * nq)
    axes = [q - 1 for q in qubits]
    out = np.tensordot(m.reshape([2] * (2 * k)), t, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes).reshape(-1)


def dense_dft(n1: int) -> np.ndarray:
    size = 1 << n1
    idx = np.arange(size)
    return np.exp(2j * np.pi * np.outer(idx, idx) / size) / np.sqrt(size)


def _compare(comm: Communicator, shard, expected: np.ndarray, tol: float) -> bool:
    full = shard.gather()
    ok = 1 if full is None else int(np.max(np.abs(full - expected)) <= tol)
    return bool(comm.bcast_int(ok))


def check_gates(comm: Communicator, nq: int, seed: int, fault: bool = False) -> list[SuiteResult]:
    gen = rngs.stream(seed, CHECK_STREAM, 1)
    passed1 = total1 = passed2 = total2 = 0
    for q in range(1, nq + 1):
        for _ in range(GATES_PER_QUBIT):
            vec, m = random_state(gen, nq), random_unitary(gen, 2)
            used = m.T if fault else m
            shard = one_op(from_global(nq, vec, comm), q, Gate2(used))
            passed1 += _compare(comm, shard, dense_apply(vec, nq, [q], m), GATE_TOL)
            total1 += 1
    for q1 in range(1, nq + 1):
        for q2 in range(1, nq + 1):
            if q1 == q2:
                continue
            vec, m = random_state(gen, nq), random_unitary(gen, 4)
            shard = two_op(from_global(nq, vec, comm), q1, q2, Gate4(m))
            passed2 += _compare(comm, shard, dense_apply(vec, nq, [q1, q2], m), GATE_TOL)
            total2 += 1
    return [SuiteResult("gates-1q", passed1, total1), SuiteResult("gates-2q", passed2, total2)]


def check_hadamards(comm: Communicator, nq: int, seed: int) -> list[SuiteResult]:
    gen = rngs.stream(seed, CHECK_STREAM, 2)
    vec = random_state(gen, nq)
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    expected = vec
    for q in range(1, nq + 1):
        expected = dense_apply(expected, nq, [q], h)
    a = hall(from_global(nq, vec, comm))
    b = hall2(from_global(nq, vec, comm))
    passed = _compare(comm, a, expected, GATE_TOL) + _compare(comm, b, expected, GATE_TOL)
    passed += _compare(comm, hall(a), vec, GATE_TOL) + _compare(comm, hall2(b), vec, GATE_TOL)
    return [SuiteResult("hadamard-all", passed, 4)]


def check_qft(comm: Communicator, nq: int, seed: int) -> list[SuiteResult]:
    gen = rngs.stream(seed, CHECK_STREAM, 3)
    passed = total = 0
    for n1 in range(1, nq + 1):
        vec = random_state(gen, nq)
        grid = vec.reshape(1 << n1, 1 << (nq - n1))
        expected = (dense_dft(n1) @ grid).reshape(-1)
        shard = qft(from_global(nq, vec, comm), n1)
        passed += _compare(comm, shard, expected, QFT_TOL)
        passed += _compare(comm, inverse_qft(shard, n1), vec, QFT_TOL)
        total += 2
    return [SuiteResult("qft", passed, total)]


def run_selftest(comm: Communicator, nq: int, seed: int, fault: bool = False) -> list[SuiteResult]:
    return check_gates(comm, nq, seed, fault) + check_hadamards(comm, nq, seed) + check_qft(comm, nq, seed)
