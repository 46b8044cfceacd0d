"""Unitary noise: Wigner rotation matrices and per-group noise plans.

Convention: ``D^j_{m'm}(a, b, c) = exp(-i m' a) d^j_{m'm}(b) exp(-i m c)``
with rows and columns ordered ``m = +j, j-1, ..., -j`` and the real small-d
matrix ``d^j(b) = exp(-i b J_y)``.  For ``j = 3/2`` the four ``m`` values map
onto the two-qubit basis ``|00>, |01>, |10>, |11>`` in that order.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import rng as rngs
from .gates import Gate2, Gate4, one_op, two_op
from .statevector import InputError, Shard

ONE_QUBIT = "one-qubit"
TWO_QUBIT = "two-qubit"
MIXED = "mixed"
KINDS = (ONE_QUBIT, TWO_QUBIT)


def wigner_small_d(two_j: int, beta: float) -> np.ndarray:
    """Real ``d^j(beta)`` for spin ``j = two_j / 2``."""
    if two_j < 0:
        raise InputError("spin must be nonnegative")
    ms = [two_j - 2 * i for i in range(two_j + 1)]  # 2m, descending
    c, s = math.cos(beta / 2), math.sin(beta / 2)
    fact = math.factorial
    out = np.zeros((two_j + 1, two_j + 1))
    for row, mp2 in enumerate(ms):
        for col, m2 in enumerate(ms):
            # everything in half-integer units doubled, then halved exactly
            jpmp, jmmp = (two_j + mp2) // 2, (two_j - mp2) // 2
            jpm, jmm = (two_j + m2) // 2, (two_j - m2) // 2
            shift = (mp2 - m2) // 2
            norm = math.sqrt(fact(jpmp) * fact(jmmp) * fact(jpm) * fact(jmm))
            total = 0.0
            for k in range(max(0, -shift), min(jpm, jmmp) + 1):
                den = fact(jpm - k) * fact(k) * fact(jmmp - k) * fact(k + shift)
                total += (-1) ** (k + shift) * c ** (two_j - 2 * k - shift) * s ** (2 * k + shift) / den
            out[row, col] = norm * total
    return out


def wigner_d(two_j: int, alpha: float, beta: float, gamma: float) -> np.ndarray:
    ms = np.array([two_j - 2 * i for i in range(two_j + 1)]) / 2
    left = np.exp(-1j * ms * alpha)
    right = np.exp(-1j * ms * gamma)
    return left[:, None] * wigner_small_d(two_j, beta) * right[None, :]


def d2(alpha: float, beta: float, gamma: float) -> Gate2:
    """Spin-1/2 rotation as a one-qubit operator."""
    return Gate2(wigner_d(1, alpha, beta, gamma))


def d4(alpha: float, beta: float, gamma: float) -> Gate4:
    """Spin-3/2 rotation as a two-qubit operator."""
    return Gate4(wigner_d(3, alpha, beta, gamma))


@dataclass(frozen=True)
class NoiseEvent:
    """One noise intrusion.

    ``qhit`` holds one qubit for a one-qubit event and two for a two-qubit
    event.  ``eloc`` is a 1-based index into the algorithm's injection points.
    """

    kind: str
    qhit: tuple[int, ...]
    eloc: int
    alpha: float
    beta: float
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown noise kind {self.kind!r}")
        want = 1 if self.kind == ONE_QUBIT else 2
        if len(self.qhit) != want:
            raise InputError(f"{self.kind} noise needs {want} struck qubit(s), got {self.qhit}")
        if len(set(self.qhit)) != len(self.qhit):
            raise InputError(f"struck qubits must be distinct, got {self.qhit}")
        if self.eloc < 1:
            raise InputError(f"eloc must be >= 1, got {self.eloc}")

    def check(self, nq: int, n_points: int) -> None:
        for q in self.qhit:
            if not 1 <= q <= nq:
                raise InputError(f"struck qubit {q} out of range 1..{nq}")
        if self.eloc > n_points:
            raise InputError(f"eloc {self.eloc} beyond the {n_points} injection points")

    def gate(self) -> Gate2 | Gate4:
        rot = d2 if self.kind == ONE_QUBIT else d4
        return rot(self.alpha, self.beta, self.gamma)

    def apply(self, shard: Shard) -> Shard:
        if self.kind == ONE_QUBIT:
            return one_op(shard, self.qhit[0], self.gate())
        return two_op(shard, self.qhit[0], self.qhit[1], self.gate())


def draw_noise_plan(
    group_id: int,
    seed: int,
    nq: int,
    injection_points: Sequence[str],
    count: int = 1,
    kind: str = ONE_QUBIT,
) -> list[NoiseEvent]:
    """Random noise events for one group; group 0 always stays clean.

    The stream depends only on ``(seed, group_id)``.
    """
    if group_id < 0:
        raise InputError("group id must be nonnegative")
    if count < 0:
        raise InputError("noise count cannot be negative")
    if kind not in (*KINDS, MIXED):
        raise InputError(f"unknown noise kind {kind!r}")
    if group_id == 0:
        return []
    if not injection_points and count:
        raise InputError("the algorithm declares no injection points")
    gen = rngs.stream(seed, rngs.NOISE, group_id)
    plan = []
    for _ in range(count):
        k = kind if kind != MIXED else KINDS[int(gen.integers(2))]
        if k == TWO_QUBIT:
            if nq < 2:
                raise InputError("two-qubit noise needs at least two qubits")
            qhit = tuple(int(q) + 1 for q in gen.choice(nq, size=2, replace=False))
        else:
            qhit = (int(gen.integers(1, nq + 1)),)
        eloc = int(gen.integers(1, len(injection_points) + 1))
        alpha = float(gen.uniform(0.0, 2 * math.pi))
        beta = float(gen.uniform(0.0, math.pi))
        plan.append(NoiseEvent(k, qhit, eloc, alpha, beta, 0.0))
    return plan


def noise_hook(plan: Sequence[NoiseEvent], injection_points: Sequence[str]):
    """Hook that applies the planned events when their checkpoint is reached."""
    by_point: dict[str, list[NoiseEvent]] = {}
    for ev in plan:
        by_point.setdefault(injection_points[ev.eloc - 1], []).append(ev)

    def hook(point: str, shard: Shard) -> None:
        for ev in by_point.get(point, ()):
            ev.apply(shard)

    return hook


def format_noise_plans(plans: Sequence[Sequence[NoiseEvent]]) -> str:
    """One ``group kind qhit eloc alpha beta gamma`` line per event."""
    lines = ["# group kind qhit eloc alpha beta gamma"]
    for g, plan in enumerate(plans):
        for ev in plan:
            qhit = ",".join(str(q) for q in ev.qhit)
            lines.append(f"{g} {ev.kind} {qhit} {ev.eloc} {ev.alpha!r} {ev.beta!r} {ev.gamma!r}")
    return "\n".join(lines) + "\n"


def parse_noise_plans(text: str, group_count: int) -> list[list[NoiseEvent]]:
    plans: list[list[NoiseEvent]] = [[] for _ in range(group_count)]
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 7:
            raise InputError(f"noise plan line {lineno}: expected 7 fields, got {len(parts)}")
        try:
            g = int(parts[0])
            ev = NoiseEvent(
                parts[1],
                tuple(int(q) for q in parts[2].split(",")),
                int(parts[3]),
                float(parts[4]),
                float(parts[5]),
                float(parts[6]),
            )
        except ValueError as exc:
            raise InputError(f"noise plan line {lineno}: {exc}") from None
        if not 0 <= g < group_count:
            raise InputError(f"noise plan line {lineno}: group {g} out of range 0..{group_count - 1}")
        if g == 0:
            raise InputError(f"noise plan line {lineno}: group 0 runs without noise")
        plans[g].append(ev)
    return plans
