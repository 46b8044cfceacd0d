import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

import oracles
from conftest import run_on_state
from qshard.noise import (
    MIXED,
    ONE_QUBIT,
    TWO_QUBIT,
    NoiseEvent,
    d2,
    d4,
    draw_noise_plan,
    format_noise_plans,
    noise_hook,
    parse_noise_plans,
    wigner_small_d,
)
from qshard.statevector import InputError

angles = st.floats(0, 2 * math.pi)
POINTS = ["iter1", "iter2", "iter3"]


def spin_jy(two_j):
    j = two_j / 2
    ms = [j - i for i in range(two_j + 1)]
    jp = np.zeros((two_j + 1, two_j + 1))
    for i in range(1, two_j + 1):
        jp[i - 1, i] = math.sqrt(j * (j + 1) - ms[i] * (ms[i] + 1))
    return (jp - jp.T) / 2j


def test_identity_at_zero_angles():
    assert np.allclose(d2(0, 0, 0).m, np.eye(2), atol=1e-15)
    assert np.allclose(d4(0, 0, 0).m, np.eye(4), atol=1e-15)


def test_beta_pi_flips():
    m = d2(0, math.pi, 0).m
    assert np.allclose(np.abs(m), [[0, 1], [1, 0]], atol=1e-15)


@settings(max_examples=50)
@given(angles, angles, angles)
def test_rotations_are_unitary(a, b, c):
    for m in (d2(a, b, c).m, d4(a, b, c).m):
        assert np.max(np.abs(m.conj().T @ m - np.eye(len(m)))) < 1e-12


@settings(max_examples=30)
@given(angles, angles)
def test_inverse_property(a, b):
    m = d4(a, b, 0).m
    assert np.max(np.abs(m @ np.linalg.inv(m) - np.eye(4))) < 1e-12


@pytest.mark.parametrize("two_j", [1, 2, 3])
def test_small_d_is_exponential_of_jy(two_j):
    for beta in (0.3, 1.7, 3.0):
        assert np.max(np.abs(wigner_small_d(two_j, beta) - expm(-1j * beta * spin_jy(two_j)))) < 1e-12


def test_plans_are_deterministic_and_keyed_by_group():
    assert draw_noise_plan(0, 7, 6, POINTS) == []
    a = draw_noise_plan(1, 7, 6, POINTS, count=3)
    assert a == draw_noise_plan(1, 7, 6, POINTS, count=3)
    assert a != draw_noise_plan(2, 7, 6, POINTS, count=3)
    for ev in a:
        assert 1 <= ev.qhit[0] <= 6 and 1 <= ev.eloc <= 3
        assert 0 <= ev.alpha < 2 * math.pi and 0 <= ev.beta < math.pi and ev.gamma == 0


def test_plan_ranges_cover_everything():
    events = [ev for g in range(1, 200) for ev in draw_noise_plan(g, 3, 4, POINTS)]
    assert {ev.qhit[0] for ev in events} == {1, 2, 3, 4}
    assert {ev.eloc for ev in events} == {1, 2, 3}


def test_two_qubit_and_mixed_plans():
    two = draw_noise_plan(1, 0, 5, POINTS, count=20, kind=TWO_QUBIT)
    assert all(len(ev.qhit) == 2 and ev.qhit[0] != ev.qhit[1] for ev in two)
    mixed = draw_noise_plan(1, 0, 5, POINTS, count=40, kind=MIXED)
    assert {ev.kind for ev in mixed} == {ONE_QUBIT, TWO_QUBIT}
    with pytest.raises(InputError):
        draw_noise_plan(1, 0, 1, POINTS, kind=TWO_QUBIT)


def test_event_validation():
    with pytest.raises(InputError):
        NoiseEvent(ONE_QUBIT, (1, 2), 1, 0.0, 0.0)
    with pytest.raises(InputError):
        NoiseEvent(TWO_QUBIT, (2, 2), 1, 0.0, 0.0)
    with pytest.raises(InputError):
        NoiseEvent("three-qubit", (1,), 1, 0.0, 0.0)
    with pytest.raises(InputError):
        NoiseEvent(ONE_QUBIT, (4,), 1, 0.0, 0.0).check(3, 2)
    with pytest.raises(InputError):
        NoiseEvent(ONE_QUBIT, (1,), 3, 0.0, 0.0).check(3, 2)


def test_plan_text_roundtrip():
    plans = [[], draw_noise_plan(1, 9, 6, POINTS, 2, MIXED), draw_noise_plan(2, 9, 6, POINTS, 1)]
    text = format_noise_plans(plans)
    assert parse_noise_plans(text, 3) == plans
    assert "1,2" not in text or TWO_QUBIT in text
    with pytest.raises(InputError):
        parse_noise_plans("0 one-qubit 1 1 0.1 0.2 0.0\n", 2)
    with pytest.raises(InputError):
        parse_noise_plans("5 one-qubit 1 1 0.1 0.2 0.0\n", 2)
    with pytest.raises(InputError):
        parse_noise_plans("1 one-qubit 1 1 0.1\n", 2)


@pytest.mark.parametrize("ranks", [1, 2, 4])
def test_hook_applies_events_at_their_point(ranks, rng):
    plan = [NoiseEvent(ONE_QUBIT, (1,), 2, 0.4, 1.1), NoiseEvent(TWO_QUBIT, (3, 1), 2, 1.0, 2.0)]
    hook = noise_hook(plan, POINTS)
    vec = oracles.random_state(rng, 4)
    out = run_on_state(4, vec, ranks, lambda s: [hook(p, s) for p in POINTS])
    ref = oracles.full_two(4, 3, 1, d4(1.0, 2.0, 0).m) @ oracles.kron_one(4, 1, d2(0.4, 1.1, 0).m) @ vec
    assert np.max(np.abs(out - ref)) < 1e-12
