import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import run_on_state, spmd
from qshard.qft import (
    MeasurementError,
    RegisterSpec,
    inverse_qft,
    project_register2,
    qft,
    register2_marginals,
    sample_register2,
)
from qshard.statevector import InputError, from_global, init_basis
from qshard.algorithms.shor import ShorConfig, load_shor_state


def test_single_qubit_qft_is_hadamard():
    out = run_on_state(1, np.array([1, 0], dtype=complex), 1, lambda s: qft(s, 1))
    assert np.allclose(out, [2**-0.5] * 2, atol=1e-15)


def test_two_qubit_qft_on_zero():
    out = run_on_state(2, np.eye(4)[0].astype(complex), 2, lambda s: qft(s, 2))
    assert np.allclose(out, [0.5] * 4, atol=1e-15)


@pytest.mark.parametrize("n1", range(1, 9))
def test_qft_matches_dft(n1, rng):
    vec = oracles.random_state(rng, n1)
    ref = oracles.dft(n1) @ vec
    for ranks in (1, 2, 4):
        if ranks <= 1 << n1:
            out = run_on_state(n1, vec, ranks, lambda s: qft(s, n1))
            assert np.max(np.abs(out - ref)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 7), st.data())
def test_qft_on_register_one_only(nq, data):
    n1 = data.draw(st.integers(1, nq - 1))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    vec = oracles.random_state(rng, nq)
    ref = (oracles.dft(n1) @ vec.reshape(1 << n1, -1)).reshape(-1)
    ranks = data.draw(st.sampled_from([1, 2, 4]))
    out = run_on_state(nq, vec, ranks, lambda s: qft(s, n1))
    assert np.max(np.abs(out - ref)) < 1e-10
    assert abs(np.linalg.norm(out) - 1) < 1e-12
    back = run_on_state(nq, vec, ranks, lambda s: inverse_qft(qft(s, n1), n1))
    assert np.max(np.abs(back - vec)) < 1e-10


def test_qft_rank_independent(rng):
    vec = oracles.random_state(rng, 6)
    ref = run_on_state(6, vec, 1, lambda s: qft(s, 5))
    for ranks in (2, 4):
        assert np.max(np.abs(run_on_state(6, vec, ranks, lambda s: qft(s, 5)) - ref)) < 1e-12


def test_qft_errors():
    with pytest.raises(InputError):
        spmd(1, lambda c: qft(init_basis(3, 0, c), 4))
    with pytest.raises(InputError):
        spmd(1, lambda c: qft(init_basis(3, 0, c), 0))
    with pytest.raises(InputError):
        RegisterSpec(3, 0)


def test_projection_examples():
    # |01>|1> with n1=2, n2=1 is index 3
    vec = np.eye(8)[3].astype(complex)

    def work(comm):
        shard = from_global(3, vec, comm)
        prob = project_register2(shard, 2, 1)
        unchanged = shard.gather()
        try:
            project_register2(shard, 2, 0)
        except MeasurementError:
            return prob, unchanged, shard.gather()
        return None

    prob, after, untouched = spmd(2, work)[0]
    assert prob == 1.0
    assert np.array_equal(after, vec) and np.array_equal(untouched, vec)


def test_projection_of_shor_state():
    config = ShorConfig.create(15, 7)

    def work(comm):
        shard = load_shor_state(config, comm)
        prob = project_register2(shard, config.n1, 1)
        return prob, shard.gather()

    prob, full = spmd(4, work)[0]
    grid = full.reshape(1 << config.n1, 1 << config.n2)
    survivors = np.flatnonzero(np.abs(grid[:, 1]) > 0)
    assert survivors.tolist() == list(range(0, 256, 4))
    assert np.allclose(np.abs(grid[survivors, 1]), 1 / 8, atol=1e-15)
    assert abs(prob - 0.25) < 1e-12
    assert abs(np.linalg.norm(full) - 1) < 1e-12


def test_marginals_sum_to_one(rng):
    vec = oracles.random_state(rng, 6)
    marg = spmd(4, lambda c: register2_marginals(from_global(6, vec, c), 3))
    assert abs(marg[0].sum() - 1) < 1e-10
    assert all(np.array_equal(m, marg[0]) for m in marg)


def test_sampling_a_basis_state_is_certain():
    vec = np.eye(16)[11].astype(complex)
    gen = np.random.default_rng(0)
    ks = spmd(2, lambda c: [sample_register2(from_global(4, vec, c), 2, gen if c.rank == 0 else None)
                             for _ in range(5)])
    assert ks[0] == ks[1] == [3] * 5


def test_sampling_frequencies():
    vec = np.zeros(4, dtype=complex)
    vec[0] = vec[3] = 2**-0.5
    gen = np.random.default_rng(1)

    def work(comm):
        shard = from_global(2, vec, comm)
        return [sample_register2(shard, 1, gen) for _ in range(10_000)]

    draws = np.array(spmd(1, work)[0])
    assert abs(draws.mean() - 0.5) < 0.02


def test_sampling_shor_state():
    config = ShorConfig.create(15, 7)
    gen = np.random.default_rng(3)

    def work(comm):
        shard = load_shor_state(config, comm)
        return [sample_register2(shard, config.n1, gen if comm.rank == 0 else None) for _ in range(4000)]

    draws = np.array(spmd(2, work)[0])
    assert set(draws.tolist()) == {1, 4, 7, 13}
    for k in (1, 4, 7, 13):
        assert abs(np.mean(draws == k) - 0.25) < 0.03
