import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import spmd
from qshard.density import (
    PARTITIONED,
    ROOT,
    DensityMatrix,
    assemble_density,
    check_density_size,
    density_from_states,
    ensemble_eigenvalues,
    entropy,
    format_eigenvalues,
    hermitian_eigenvalues,
)
from qshard.statevector import InputError, from_global
from qshard.topology import ConfigurationError, split_groups


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a + a.conj().T


def test_pure_state_is_idempotent(rng):
    psi = oracles.random_state(rng, 4)
    rho = density_from_states([psi], [1.0])
    assert np.max(np.abs(rho @ rho - rho)) < 1e-10
    eigs = hermitian_eigenvalues(rho)
    assert abs(eigs[0] - 1) < 1e-10 and np.max(np.abs(eigs[1:])) < 1e-10
    assert abs(entropy(eigs)) < 1e-8


def test_orthogonal_mixture():
    rho = density_from_states([np.eye(4)[0], np.eye(4)[1]], [0.5, 0.5])
    assert np.array_equal(rho, np.diag([0.5, 0.5, 0, 0]))
    assert abs(entropy(hermitian_eigenvalues(rho)) - 1) < 1e-8


def test_matches_outer_products(rng):
    states = [oracles.random_state(rng, 4) for _ in range(3)]
    w = rng.random(3)
    w /= w.sum()
    ref = sum(wi * np.outer(s, s.conj()) for wi, s in zip(w, states))
    assert np.max(np.abs(density_from_states(states, w) - ref)) < 1e-12


def test_eigenvalue_examples():
    assert np.array_equal(hermitian_eigenvalues(np.diag([1.0, 0, 0, 0])), [1, 0, 0, 0])
    assert hermitian_eigenvalues(np.zeros((0, 0))).size == 0


@pytest.mark.parametrize("n", [1, 2, 3, 7, 16, 33])
def test_jacobi_matches_qr_iteration(n, rng):
    a = random_hermitian(rng, n)
    ours = hermitian_eigenvalues(a)
    assert np.max(np.abs(ours - oracles.qr_eigenvalues(a))) < 1e-8
    assert np.max(np.abs(ours - np.sort(np.linalg.eigvalsh(a))[::-1])) < 1e-8
    assert abs(ours.sum() - np.trace(a).real) < 1e-8


def test_non_hermitian_rejected():
    with pytest.raises(InputError):
        hermitian_eigenvalues(np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(InputError):
        hermitian_eigenvalues(np.ones((2, 3)))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5), st.integers(1, 6), st.data())
def test_low_rank_route_matches_full_matrix(nq, groups, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    states = [oracles.random_state(rng, nq) for _ in range(groups)]
    w = rng.random(groups)
    w /= w.sum()
    rho = density_from_states(states, w)
    assert np.max(np.abs(ensemble_eigenvalues(states, w) - hermitian_eigenvalues(rho))) < 1e-10
    assert np.trace(rho).real == pytest.approx(1, abs=1e-10)
    assert np.vdot(rho, rho).real <= 1 + 1e-10


def test_entropy_rules():
    assert entropy([0.5, 0.5]) == pytest.approx(1)
    assert entropy(np.full(16, 1 / 16)) == pytest.approx(4, abs=1e-12)
    assert entropy([1.0, -1e-11, 1e-15]) == 0
    with pytest.raises(InputError):
        entropy([0.5, 0.4])
    with pytest.raises(InputError):
        entropy([1.1, -0.1])


def test_weight_and_size_checks():
    with pytest.raises(InputError):
        density_from_states([np.eye(2)[0]], [0.9])
    with pytest.raises(InputError):
        density_from_states([np.eye(2)[0], np.eye(2)[1]], [1.5, -0.5])
    with pytest.raises(ConfigurationError):
        check_density_size(15)
    check_density_size(14)


@pytest.mark.parametrize("ranks, groups", [(2, 2), (4, 2), (8, 4), (4, 4)])
def test_root_and_partitioned_modes_agree(ranks, groups, rng):
    nq = 3
    states = [oracles.random_state(rng, nq) for _ in range(groups)]
    w = rng.random(groups)
    w /= w.sum()

    def work(world, mode):
        group = split_groups(world, groups)
        shard = from_global(nq, states[world.rank // group.size], group)
        return assemble_density(shard, w, world, mode)

    root = spmd(ranks, lambda c: work(c, ROOT))
    part = spmd(ranks, lambda c: work(c, PARTITIONED))
    assert all(x is None for x in root[1:] + part[1:])
    ref = density_from_states(states, w)
    assert np.max(np.abs(root[0].rho - ref)) < 1e-12
    assert np.max(np.abs(part[0].rho - root[0].rho)) < 1e-12
    assert root[0].trace() == pytest.approx(1, abs=1e-10)


def test_density_matrix_report_helpers(rng):
    states = np.array([oracles.random_state(rng, 8) for _ in range(2)])
    dm = DensityMatrix(density_from_states(states, [0.25, 0.75]), states, np.array([0.25, 0.75]))
    eigs = dm.eigenvalues()
    assert len(eigs) == 256 and np.all(eigs[2:] == 0)
    assert eigs.sum() == pytest.approx(dm.trace(), abs=1e-8)
    assert dm.purity() == pytest.approx(np.sum(eigs**2), abs=1e-10)
    lines = format_eigenvalues(eigs[:3]).splitlines()
    assert lines[0].split()[0] == "0" and float(lines[0].split()[1]) == eigs[0]
