"""Distributed state-vector simulation of small quantum circuits.

The state of ``nq`` qubits is split into contiguous slices over a
power-of-two number of ranks that talk only through a message-passing
communicator.  On top of the one- and two-qubit operators sit the quantum
Fourier transform, Grover search and Shor factoring, plus a multiverse mode
that runs noisy replicas in rank groups and measures the ensemble entropy.
"""

from .gates import Gate2, Gate4, hall, hall2, one_op, two_op
from .qft import inverse_qft, qft
from .statevector import Shard, from_global, init_basis
from .transport import Communicator, run_spmd

__all__ = [
    "Communicator",
    "Gate2",
    "Gate4",
    "Shard",
    "from_global",
    "hall",
    "hall2",
    "init_basis",
    "inverse_qft",
    "one_op",
    "qft",
    "run_spmd",
    "two_op",
]
