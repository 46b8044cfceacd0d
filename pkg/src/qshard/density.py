"""Ensemble density matrix, Hermitian eigenvalues and von Neumann entropy."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .statevector import InputError, Shard
from .topology import ConfigurationError
from .transport import Communicator

MAX_DENSITY_QUBITS = 14
HERMITIAN_TOL = 1e-9
NEGATIVE_CLAMP = -1e-10
TRACE_TOL = 1e-6
ZERO_EIGENVALUE = 1e-14
JACOBI_MAX_DIM = 128
MAX_SWEEPS = 100
WEIGHT_TOL = 1e-12

ROOT = "root"
PARTITIONED = "partitioned"


def check_weights(weights: Sequence[float], count: int | None = None) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or len(w) == 0:
        raise InputError("weights must be a nonempty list")
    if count is not None and len(w) != count:
        raise InputError(f"expected {count} weights, got {len(w)}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InputError("weights must be finite and nonnegative")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise InputError(f"weights sum to {w.sum()!r}, not 1")
    return w


def check_density_size(nq: int) -> None:
    if nq > MAX_DENSITY_QUBITS:
        raise ConfigurationError(
            f"density matrix for {nq} qubits is too large; at most {MAX_DENSITY_QUBITS} qubits are supported"
        )


def density_rows(states: np.ndarray, weights: np.ndarray, rows: slice) -> np.ndarray:
    """Rows ``rows`` of ``sum_a w_a |psi_a><psi_a|`` for states stacked as ``(groups, dim)``."""
    return (states[:, rows].T * weights) @ states.conj()


def density_from_states(states, weights) -> np.ndarray:
    states = np.atleast_2d(np.asarray(states, dtype=np.complex128))
    w = check_weights(weights, len(states))
    return density_rows(states, w, slice(None))


@dataclass
class DensityMatrix:
    """``rho`` plus the ensemble it came from, kept for the low-rank eigen route."""

    rho: np.ndarray
    states: np.ndarray = field(repr=False)
    weights: np.ndarray

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def purity(self) -> float:
        """``trace(rho^2)``; for Hermitian ``rho`` this is the squared Frobenius norm."""
        return float(np.vdot(self.rho, self.rho).real)

    def eigenvalues(self) -> np.ndarray:
        if self.dim <= JACOBI_MAX_DIM:
            return hermitian_eigenvalues(self.rho)
        return ensemble_eigenvalues(self.states, self.weights)

    def entropy(self) -> float:
        return entropy(self.eigenvalues())


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Rounds of disjoint index pairs covering every pair once (circle method)."""
    ring = list(range(n + (n % 2)))
    m = len(ring)
    rounds = []
    for _ in range(m - 1):
        pairs = [(ring[i], ring[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        rounds.append((np.array([a for a, _ in pairs]), np.array([b for _, b in pairs])))
        ring = [ring[0], ring[-1], *ring[1:-1]]
    return rounds


def _off_norm(a: np.ndarray) -> float:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def hermitian_eigenvalues(rho) -> np.ndarray:
    """All eigenvalues of a Hermitian matrix, descending, by cyclic Jacobi rotations.

    Each round zeroes a set of disjoint off-diagonal pairs at once; a sweep
    visits every pair once.  Stops when the off-diagonal Frobenius norm drops
    below ``1e-12 * dim`` (scaled by the matrix norm when that exceeds 1).
    """
    a = np.array(rho, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0)
    skew = np.max(np.abs(a - a.conj().T))
    if skew > HERMITIAN_TOL:
        raise InputError(f"matrix is not Hermitian (max |A - A^H| = {skew:.3g})")
    a = (a + a.conj().T) / 2
    tol = 1e-12 * n * max(1.0, float(np.linalg.norm(a)))
    rounds = _round_robin(n)
    for _ in range(MAX_SWEEPS):
        if _off_norm(a) < tol:
            break
        for ps, qs in rounds:
            if len(ps) == 0:
                continue
            app = a[ps, ps].real
            aqq = a[qs, qs].real
            apq = a[ps, qs]
            mag = np.abs(apq)
            live = mag > 0
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                phase = np.where(live, apq / np.where(live, mag, 1.0), 1.0)
                zeta = np.where(live, (aqq - app) / (2 * np.where(live, mag, 1.0)), 0.0)
                t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            t = np.where(live & np.isfinite(t), t, 0.0)
            cs = 1.0 / np.sqrt(1.0 + t * t)
            sn = t * cs
            # a <- a U with U = diag-phase then real rotation on (p, q)
            colp, colq = a[:, ps].copy(), a[:, qs].copy()
            a[:, ps] = colp * cs - colq * (sn * phase.conj())
            a[:, qs] = colp * sn + colq * (cs * phase.conj())
            rowp, rowq = a[ps, :].copy(), a[qs, :].copy()
            a[ps, :] = cs[:, None] * rowp - (sn * phase)[:, None] * rowq
            a[qs, :] = sn[:, None] * rowp + (cs * phase)[:, None] * rowq
            a[ps, qs] = 0.0
            a[qs, ps] = 0.0
    else:
        if _off_norm(a) >= tol:
            raise ArithmeticError("Jacobi iteration did not converge")
    return np.sort(np.diag(a).real)[::-1]


def ensemble_eigenvalues(states, weights) -> np.ndarray:
    """Eigenvalues of ``sum_a w_a |psi_a><psi_a|`` without forming the full matrix.

    The nonzero spectrum equals that of the small Gram matrix
    ``sqrt(w_a w_b) <psi_a|psi_b>``; the rest are zeros.
    """
    states = np.atleast_2d(np.asarray(states, dtype=np.complex128))
    w = np.sqrt(check_weights(weights, len(states)))
    dim = states.shape[1]
    gram = (w[:, None] * states.conj()) @ (states.T * w[None, :])
    small = hermitian_eigenvalues(gram)
    out = np.zeros(dim)
    out[: min(dim, len(small))] = small[:dim]
    return np.sort(out)[::-1]


def entropy(eigenvalues) -> float:
    """Von Neumann entropy in bits."""
    lam = np.asarray(eigenvalues, dtype=float)
    total = lam.sum()
    if abs(total - 1.0) > TRACE_TOL:
        raise InputError(f"eigenvalues sum to {total!r}, not 1")
    if np.any(lam < NEGATIVE_CLAMP):
        raise InputError(f"eigenvalue {lam.min()!r} is negative beyond round-off")
    lam = lam[lam > ZERO_EIGENVALUE]
    return float(-np.sum(lam * np.log2(lam)) + 0.0)


def assemble_density(
    shard: Shard,
    weights: Sequence[float],
    world: Communicator,
    mode: str = ROOT,
    root: int = 0,
) -> DensityMatrix | None:
    """Collective over ``world``: build ``rho`` from every group's state.

    ``shard`` is this rank's slice of its group's state; groups are the
    contiguous blocks of ``world`` ranks, so concatenating all slices in world
    rank order lists the group states one after another.  ``mode="root"``
    gathers them at ``root``; ``mode="partitioned"`` hands every rank all
    states, lets each build its own block of rows and gathers the blocks.
    Returns the matrix on ``root`` and ``None`` elsewhere.
    """
    if mode not in (ROOT, PARTITIONED):
        raise InputError(f"unknown density mode {mode!r}")
    check_density_size(shard.nq)
    dim = 1 << shard.nq
    groups = world.size // shard.comm.size
    w = check_weights(weights, groups)

    if mode == ROOT:
        full = world.gather_concat(shard.amps, root=root)
        if full is None:
            return None
        if full.size != groups * dim:
            raise InputError(f"gathered {full.size} amplitudes, expected {groups * dim}")
        states = full.reshape(groups, dim)
        return DensityMatrix(density_rows(states, w, slice(None)), states, w)

    states = np.concatenate(world.allgather(shard.amps))
    if states.size != groups * dim:
        raise InputError(f"gathered {states.size} amplitudes, expected {groups * dim}")
    states = states.reshape(groups, dim)
    bounds = np.linspace(0, dim, world.size + 1).astype(int)
    mine = slice(bounds[world.rank], bounds[world.rank + 1])
    block = density_rows(states, w, mine)
    parts = world.gather(block.ravel(), root=root)
    if parts is None:
        return None
    return DensityMatrix(np.concatenate(parts).reshape(dim, dim), states, w)


def format_eigenvalues(eigs) -> str:
    return "".join(f"{i} {float(lam)!r}\n" for i, lam in enumerate(eigs))
