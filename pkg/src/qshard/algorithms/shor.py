"""Shor factoring: classical preprocessing, register loading, peak analysis.

The modular-exponentiation register is filled classically; the quantum part
that is simulated is the register-two measurement and the Fourier transform
of register one.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field

import numpy as np

from .. import rng as rngs
from ..qft import ZERO_PROBABILITY, project_register2, qft, register2_marginals, sample_register2
from ..statevector import ContractViolation, InputError, Shard, _slot
from ..transport import Communicator

Hook = Callable[[str, Shard], None]

INJECTION_POINTS = ("load", "project", "qft")
MAX_M = 1 << 31
MAX_XGUESS_ATTEMPTS = 16


class ShorRejection(ValueError):
    """The number is not a candidate for factoring; ``reason`` says why."""

    def __init__(self, m: int, reason: str):
        super().__init__(f"M={m} rejected: {reason}")
        self.m = m
        self.reason = reason


# classical number theory


def is_power_of_two(m: int) -> bool:
    return m >= 1 and m & (m - 1) == 0


def is_prime(m: int) -> bool:
    if m < 2:
        return False
    if m % 2 == 0:
        return m == 2
    f = 3
    while f * f <= m:
        if m % f == 0:
            return False
        f += 2
    return True


def euler_phi(m: int) -> int:
    if m < 1:
        raise InputError("phi is defined for positive integers")
    result, rest, f = m, m, 2
    while f * f <= rest:
        if rest % f == 0:
            while rest % f == 0:
                rest //= f
            result -= result // f
        f += 1
    if rest > 1:
        result -= result // rest
    return result


def modpow(base: int, exp: int, mod: int) -> int:
    """Square-and-multiply ``base**exp % mod``."""
    if mod == 1:
        return 0
    result, base = 1, base % mod
    while exp:
        if exp & 1:
            result = result * base % mod
        base = base * base % mod
        exp >>= 1
    return result


def check_candidate(m: int) -> None:
    if m < 3:
        raise ShorRejection(m, "too small")
    if m >= MAX_M:
        raise ShorRejection(m, f"larger than {MAX_M - 1}")
    if is_power_of_two(m):
        raise ShorRejection(m, "power of 2")
    if is_prime(m):
        raise ShorRejection(m, "prime")
    if m % 2 == 0:
        raise ShorRejection(m, "even")


def _ceil_log2(x: int) -> int:
    return (x - 1).bit_length()


def shor_register_sizes(m: int) -> tuple[int, int, int]:
    """Minimal ``(n1, n2, Q)``: ``M**2 <= 2**n1 < 2 M**2`` and ``2**n2 >= M``."""
    if m < 2:
        raise InputError("M must be at least 2")
    q = 1 << _ceil_log2(m * m)
    return _ceil_log2(q), _ceil_log2(m), q


def pick_xguess(m: int, rng: np.random.Generator) -> int:
    """Uniform draw from the residues in ``2..M-1`` coprime to ``M``."""
    if euler_phi(m) < 2:
        raise InputError(f"no coprime base available for M={m}")
    while True:
        a = int(rng.integers(2, m))
        if math.gcd(a, m) == 1:
            return a


def multiplicative_order(x: int, m: int) -> int:
    """Smallest ``r > 0`` with ``x**r = 1 (mod m)``, by brute force."""
    if math.gcd(x, m) != 1:
        raise InputError(f"{x} is not coprime to {m}")
    r, y = 1, x % m
    while y != 1:
        y = y * x % m
        r += 1
    return r


def convergents(num: int, den: int) -> Iterator[tuple[int, int]]:
    """Successive convergents ``h/k`` of the continued fraction of ``num/den``."""
    h_prev, h = 0, 1
    k_prev, k = 1, 0
    while den:
        a, rem = divmod(num, den)
        h_prev, h = h, a * h + h_prev
        k_prev, k = k, a * k + k_prev
        yield h, k
        num, den = den, rem


def continued_fraction_period(nbar: int, n_total: int, m: int, xguess: int | None = None) -> int | None:
    """First even convergent denominator of ``nbar / n_total`` below ``M``.

    With ``xguess`` the denominator must also satisfy ``xguess**r = 1 mod M``.
    """
    if not 0 <= nbar < n_total:
        raise InputError(f"peak index {nbar} out of range 0..{n_total - 1}")
    if nbar == 0:
        return None
    for _, r in convergents(nbar, n_total):
        if r >= m:
            break
        if r > 0 and r % 2 == 0 and (xguess is None or modpow(xguess, r, m) == 1):
            return r
    return None


def extract_factors(xguess: int, r: int, m: int) -> tuple[int, int] | None:
    """``(gcd(x**(r/2)+1, M), gcd(x**(r/2)-1, M))``; None when ``x**(r/2) = +-1``."""
    if r % 2:
        raise ContractViolation(f"period {r} is odd")
    y = modpow(xguess, r // 2, m)
    if y in (1, m - 1):
        return None
    return math.gcd(y + 1, m), math.gcd(y - 1, m)


def shor_peak_probability(n: int, r: int, d: int, n1: int) -> float:
    """Register-one probability after the transform for a superposition of ``d`` terms spaced ``r``."""
    size = 1 << n1
    if d < 1:
        raise InputError("superposition count must be positive")
    if (n * r) % size == 0:
        return d / size
    x = math.pi * n * r / size
    return (math.sin(d * x) / math.sin(x)) ** 2 / (size * d)


def superposition_count(n_k: int, r: int, n1: int) -> int:
    """Number of ``j`` with ``n_k + j r < 2**n1``; equals ceil((2**n1 - n_k) / r)."""
    return ((1 << n1) + r - 1 - n_k) // r


# quantum part


@dataclass(frozen=True)
class ShorConfig:
    m: int
    n1: int
    n2: int
    q: int
    xguess: int

    @classmethod
    def create(cls, m: int, xguess: int) -> ShorConfig:
        check_candidate(m)
        if not 2 <= xguess < m or math.gcd(xguess, m) != 1:
            raise InputError(f"xguess={xguess} is not a coprime base for M={m}")
        n1, n2, q = shor_register_sizes(m)
        return cls(m, n1, n2, q, xguess)

    @property
    def nq(self) -> int:
        return self.n1 + self.n2


def load_shor_state(config: ShorConfig, comm: Communicator) -> Shard:
    """``2**(-n1/2) sum_n |n>|x**n mod M>``, each rank writing only what it owns."""
    m, x, n1, n2 = config.m, config.xguess, config.n1, config.n2
    if math.gcd(x, m) != 1:
        raise InputError(f"xguess={x} shares a factor with M={m}")
    n_x, base = _slot(config.nq, comm)
    amps = np.zeros(n_x, dtype=np.complex128)
    first, last = base >> n2, (base + n_x - 1) >> n2
    amp = 2.0 ** (-n1 / 2)
    f = modpow(x, first, m)
    for n in range(first, last + 1):
        idx = (n << n2) + f - base
        if 0 <= idx < n_x:
            amps[idx] = amp
        f = f * x % m
    return Shard(config.nq, comm, amps)


@dataclass
class Peak:
    nbar: int
    probability: float
    period: int | None
    factors: tuple[int, int] | None


@dataclass
class Branch:
    """Analysis for one register-two outcome ``k``."""

    k: int
    probability: float
    n_k: int
    d: int
    d_bound: float
    d_fixed: int
    distribution: np.ndarray = field(repr=False)
    peaks: list[Peak]


@dataclass
class ShorOutcome:
    m: int
    xguess: int
    n1: int
    n2: int
    q: int
    phi: int
    branches: list[Branch]
    period: int | None
    factors: tuple[int, int] | None
    attempts: list[int]

    @property
    def peaks(self) -> list[Peak]:
        return [p for b in self.branches for p in b.peaks]


def find_peaks(dist: np.ndarray) -> list[int]:
    """Cyclic local maxima above half the uniform level."""
    floor = 0.5 / len(dist)
    left, right = np.roll(dist, 1), np.roll(dist, -1)
    hits = (dist > left) & (dist > right) & (dist > floor)
    return [int(n) for n in np.flatnonzero(hits)]


def register2_values(config: ShorConfig) -> np.ndarray:
    """``x**n mod M`` for every register-one value ``n``."""
    f = np.empty(1 << config.n1, dtype=np.int64)
    y = 1 % config.m
    for n in range(len(f)):
        f[n] = y
        y = y * config.xguess % config.m
    return f


def analyse_branch(config: ShorConfig, k: int, prob_k: float, dist: np.ndarray,
                   f: np.ndarray | None = None) -> Branch:
    """Peak table for one register-one distribution conditioned on ``k``."""
    m, x, n1 = config.m, config.xguess, config.n1
    size = 1 << n1
    f = register2_values(config) if f is None else f
    hits = np.flatnonzero(f == k)
    n_k, d = (int(hits[0]), len(hits)) if len(hits) else (-1, 0)
    peaks = []
    for nbar in find_peaks(dist):
        r = continued_fraction_period(nbar, size, m, x)
        factors = extract_factors(x, r, m) if r else None
        peaks.append(Peak(nbar, float(dist[nbar]), r, factors))
    r_any = next((p.period for p in peaks if p.period), None)
    if r_any and n_k >= 0:
        d_bound = size / r_any + (r_any - 1 - n_k) / r_any
        d_fixed = size // r_any
    else:
        d_bound, d_fixed = 0.0, 0
    return Branch(k, prob_k, n_k, d, d_bound, d_fixed, dist, peaks)


def register1_distribution(full: np.ndarray, n1: int, n2: int) -> np.ndarray:
    return (np.abs(full.reshape(1 << n1, 1 << n2)) ** 2).sum(axis=1)


def shor_state_path(
    config: ShorConfig,
    comm: Communicator,
    measure_rng: np.random.Generator | None,
    hook: Hook | None = None,
    k: int | None = None,
) -> tuple[Shard, int, float]:
    """Collective: load, measure register two, transform register one.

    Returns the final shard, the register-two outcome and its probability.
    Noise hooks fire at ``load``, ``project`` and ``qft``.
    """
    shard = load_shor_state(config, comm)
    if hook:
        hook("load", shard)
    if k is None:
        k = sample_register2(shard, config.n1, measure_rng)
    prob = project_register2(shard, config.n1, k)
    if hook:
        hook("project", shard)
    qft(shard, config.n1)
    if hook:
        hook("qft", shard)
    return shard, k, prob


def _branches_for(config: ShorConfig, comm: Communicator, mode: str, order: str,
                  measure_rng: np.random.Generator | None) -> list[Branch] | None:
    n1, n2 = config.n1, config.n2
    loaded = load_shor_state(config, comm)
    marg = register2_marginals(loaded, n1)
    if mode == "sample":
        ks = [sample_register2(loaded, n1, measure_rng)]
    else:
        ks = [k for k in range(1 << n2) if marg[k] > ZERO_PROBABILITY]

    dists: list[tuple[int, float, np.ndarray | None]] = []
    if order == "qft-first":
        qft(loaded, n1)
        full = loaded.gather()
        if full is None:
            return None
        grid = np.abs(full.reshape(1 << n1, 1 << n2)) ** 2
        for k in ks:
            pk = float(grid[:, k].sum())
            dists.append((k, pk, grid[:, k] / pk))
    else:
        for k in ks:
            branch = loaded.copy()
            pk = project_register2(branch, n1, k)
            qft(branch, n1)
            full = branch.gather()
            dists.append((k, pk, None if full is None else register1_distribution(full, n1, n2)))
        if comm.rank != 0:
            return None
    f = register2_values(config)
    return [analyse_branch(config, k, pk, dist, f) for k, pk, dist in dists]


def shor_run(
    m: int,
    comm: Communicator,
    seed: int = 0,
    xguess: int | None = None,
    mode: str = "enumerate",
    order: str = "project-first",
) -> ShorOutcome | None:
    """Collective end-to-end factoring run; the outcome is returned on rank 0.

    ``mode="enumerate"`` analyses every possible register-two outcome,
    ``mode="sample"`` draws one from the seeded stream.  With ``order=
    "qft-first"`` register one is transformed before register two is read.
    An unpinned ``xguess`` is redrawn when it fails to yield factors.
    """
    if mode not in ("enumerate", "sample"):
        raise InputError(f"unknown mode {mode!r}")
    if order not in ("project-first", "qft-first"):
        raise InputError(f"unknown order {order!r}")
    check_candidate(m)
    n1, n2, q = shor_register_sizes(m)
    pick_rng = rngs.stream(seed, rngs.XGUESS)
    measure_rng = rngs.stream(seed, rngs.MEASURE)
    attempts: list[int] = []
    while True:
        x = xguess
        if x is None:
            x = comm.bcast_int(pick_xguess(m, pick_rng) if comm.rank == 0 else None)
        attempts.append(x)
        config = ShorConfig.create(m, x)
        branches = _branches_for(config, comm, mode, order, measure_rng if comm.rank == 0 else None)
        outcome = None
        done = 1
        if comm.rank == 0:
            assert branches is not None
            peaks = [p for b in branches for p in b.peaks]
            win = next((p for p in peaks if p.factors), None)
            period = win.period if win else next((p.period for p in peaks if p.period), None)
            outcome = ShorOutcome(m, x, n1, n2, q, euler_phi(m), branches, period,
                                  win.factors if win else None, list(attempts))
            done = int(win is not None or xguess is not None or len(attempts) >= MAX_XGUESS_ATTEMPTS)
        if comm.bcast_int(done):
            return outcome
