"""One- and two-qubit operators acting on sharded state vectors.

Partner amplitudes that sit on different ranks are brought together by
exchanging whole slices with the peer rank(s); every rank of a partner set
then runs the same local kernel on the combined block and keeps its own
slice.  All operations here are collective over ``shard.comm``.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .statevector import InputError, Shard, _check_qubit

UNITARY_TOL = 1e-12


def _as_matrix(m, dim: int) -> np.ndarray:
    arr = np.array(m, dtype=np.complex128)
    if arr.shape != (dim, dim):
        raise InputError(f"expected a {dim}x{dim} matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def is_unitary(m, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(m)
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), rtol=0, atol=tol))


@dataclass(frozen=True)
class Gate2:
    """2x2 operator, ``m[a, b] = <a|op|b>``."""

    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", _as_matrix(self.m, 2))

    @classmethod
    def unitary(cls, m, tol: float = UNITARY_TOL) -> Gate2:
        gate = cls(m)
        if not is_unitary(gate.m, tol):
            raise InputError("matrix is not unitary")
        return gate


@dataclass(frozen=True)
class Gate4:
    """4x4 operator on a qubit pair; row/column ``2*i + j`` is ``|i j>``."""

    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", _as_matrix(self.m, 4))

    @classmethod
    def unitary(cls, m, tol: float = UNITARY_TOL) -> Gate4:
        gate = cls(m)
        if not is_unitary(gate.m, tol):
            raise InputError("matrix is not unitary")
        return gate

    def swapped(self) -> Gate4:
        """Same operator with the roles of the two qubits exchanged."""
        perm = [0, 2, 1, 3]
        return Gate4(self.m[np.ix_(perm, perm)])


SQRT_HALF = 1 / np.sqrt(2.0)

IDENTITY = Gate2(np.eye(2))
NOT = Gate2([[0, 1], [1, 0]])
SIGMA_X = NOT
SIGMA_Y = Gate2([[0, -1j], [1j, 0]])
SIGMA_Z = Gate2([[1, 0], [0, -1]])
HADAMARD = Gate2(np.array([[1, 1], [1, -1]]) * SQRT_HALF)

IDENTITY4 = Gate4(np.eye(4))
CNOT = Gate4([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
CPHASE = Gate4(np.diag([1, 1, 1, -1]))
SWAP = Gate4([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]])


def cphasek_matrix(k: int) -> Gate4:
    if k < 1:
        raise InputError(f"CPHASEK index must be >= 1, got {k}")
    return Gate4(np.diag([1, 1, 1, np.exp(2j * np.pi / 2**k)]))


# local kernels; ``buf`` is updated in place


def _kernel2(buf: np.ndarray, step: int, m: np.ndarray) -> None:
    v = buf.reshape(-1, 2, step)
    c0 = v[:, 0, :].copy()
    c1 = v[:, 1, :].copy()
    v[:, 0, :] = m[0, 0] * c0 + m[0, 1] * c1
    v[:, 1, :] = m[1, 0] * c0 + m[1, 1] * c1


def _kernel4(buf: np.ndarray, step_hi: int, step_lo: int, m: np.ndarray) -> None:
    # step_hi belongs to the more significant struck qubit
    v = buf.reshape(-1, 2, step_hi // (2 * step_lo), 2, step_lo)
    c = [v[:, 0, :, 0, :].copy(), v[:, 0, :, 1, :].copy(),
         v[:, 1, :, 0, :].copy(), v[:, 1, :, 1, :].copy()]
    for row, (a, b) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        v[:, a, :, b, :] = m[row, 0] * c[0] + m[row, 1] * c[1] + m[row, 2] * c[2] + m[row, 3] * c[3]


def _apply(shard: Shard, qubits: Sequence[int], kernel: Callable[[np.ndarray, list[int]], None]) -> Shard:
    """Run ``kernel(block, strides)`` with the struck amplitudes co-located.

    ``qubits`` must be ascending.  Qubits with ``i_s > p`` are rank-local.
    For the others, slices are collected from the partner ranks one exchange
    round per non-local qubit; the collected block behaves like a small state
    vector whose leading bits are the non-local struck qubits.
    """
    nq, p, n_x = shard.nq, shard.p, shard.n_x
    remote = [q for q in qubits if q <= p]
    if not remote:
        kernel(shard.amps, [1 << (nq - q) for q in qubits])
        return shard

    comm, me = shard.comm, shard.rank
    held = {me: shard.amps}
    for q in remote:
        peer = me ^ (1 << (p - q))
        keys = sorted(held)
        got = comm.exchange_block(peer, np.concatenate([held[r] for r in keys]))
        for i, r in enumerate(keys):
            held[r ^ (1 << (p - q))] = got[i * n_x:(i + 1) * n_x]

    order = sorted(held)
    block = np.concatenate([held[r] for r in order])
    k = len(remote)
    strides = []
    for q in qubits:
        if q <= p:
            strides.append(n_x << (k - 1 - remote.index(q)))
        else:
            strides.append(1 << (nq - q))
    kernel(block, strides)
    pos = order.index(me)
    shard.amps[:] = block[pos * n_x:(pos + 1) * n_x]
    return shard


def one_op(shard: Shard, i_s: int, gate: Gate2 | np.ndarray) -> Shard:
    """Apply a 2x2 operator to qubit ``i_s`` of the distributed state."""
    _check_qubit(i_s, shard.nq)
    m = gate.m if isinstance(gate, Gate2) else Gate2(gate).m
    return _apply(shard, [i_s], lambda buf, s: _kernel2(buf, s[0], m))


def two_op(shard: Shard, i_s1: int, i_s2: int, gate: Gate4 | np.ndarray) -> Shard:
    """Apply a 4x4 operator to qubits ``(i_s1, i_s2)``; ``i_s1`` is the high bit of the gate index."""
    _check_qubit(i_s1, shard.nq)
    _check_qubit(i_s2, shard.nq)
    if i_s1 == i_s2:
        raise InputError("two-qubit operator needs two distinct qubits")
    gate = gate if isinstance(gate, Gate4) else Gate4(gate)
    if i_s1 > i_s2:
        i_s1, i_s2, gate = i_s2, i_s1, gate.swapped()
    m = gate.m
    return _apply(shard, [i_s1, i_s2], lambda buf, s: _kernel4(buf, s[0], s[1], m))


def cnot(shard: Shard, control: int, target: int) -> Shard:
    return two_op(shard, control, target, CNOT)


def swap(shard: Shard, i: int, j: int) -> Shard:
    if i == j:
        raise InputError("swap needs two distinct qubits")
    return two_op(shard, i, j, SWAP)


def controlled_phase(shard: Shard, q1: int, q2: int, phase: complex) -> Shard:
    """Multiply amplitudes with both qubits set by ``phase``; purely local."""
    _check_qubit(q1, shard.nq)
    _check_qubit(q2, shard.nq)
    if q1 == q2:
        raise InputError("controlled phase needs two distinct qubits")
    idx = shard.global_indices()
    both = ((idx >> (shard.nq - q1)) & (idx >> (shard.nq - q2)) & 1).astype(bool)
    shard.amps[both] *= phase
    return shard


def cphase(shard: Shard, control: int, target: int) -> Shard:
    return controlled_phase(shard, control, target, -1.0)


def cphasek(shard: Shard, control: int, target: int, k: int) -> Shard:
    if k < 1:
        raise InputError(f"CPHASEK index must be >= 1, got {k}")
    return controlled_phase(shard, control, target, np.exp(2j * np.pi / 2**k))


def hall(shard: Shard) -> Shard:
    """Hadamard on every qubit, one qubit at a time."""
    for i_s in range(1, shard.nq + 1):
        one_op(shard, i_s, HADAMARD)
    return shard


def sh(nq: int, n: int, np_: int) -> int:
    """Sign of entry ``(n, np_)`` of the all-qubit Hadamard: ``(-1)**popcount(n & np_)``."""
    size = 1 << nq
    if not (0 <= n < size and 0 <= np_ < size):
        raise InputError(f"indices ({n}, {np_}) out of range for {nq} qubits")
    return -1 if bin(n & np_).count("1") % 2 else 1


def _sign_rows(rows: np.ndarray, size: int) -> np.ndarray:
    cols = np.arange(size, dtype=np.int64)
    parity = np.bitwise_count(rows[:, None] & cols[None, :]) & 1
    return 1.0 - 2.0 * parity


def hall2(shard: Shard, chunk_entries: int = 1 << 22) -> Shard:
    """All-qubit Hadamard as one dense signed sum over the gathered vector."""
    full = shard.allgather()
    size = full.size
    rows = shard.global_indices()
    out = np.empty(shard.n_x, dtype=np.complex128)
    step = max(1, chunk_entries // size)
    for start in range(0, shard.n_x, step):
        out[start:start + step] = _sign_rows(rows[start:start + step], size) @ full
    shard.amps[:] = out * 2.0 ** (-shard.nq / 2)
    return shard
