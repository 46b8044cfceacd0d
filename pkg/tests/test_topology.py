import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import spmd
from qshard.topology import (
    ConfigurationError,
    Topology,
    group_layout,
    same_section,
    section_seat,
    split_groups,
)


@pytest.mark.parametrize("n, n_x, expected", [(0, 4, (0, 0)), (5, 4, (1, 1)), (7, 4, (1, 3))])
def test_section_seat_examples(n, n_x, expected):
    assert section_seat(n, n_x) == expected


def test_section_seat_out_of_range():
    with pytest.raises(IndexError):
        section_seat(8, 4, nq=3)
    with pytest.raises(IndexError):
        section_seat(-1, 4)


def test_same_section_examples():
    assert same_section(2, 1)
    assert not same_section(1, 1)
    assert all(same_section(i, 0) for i in range(1, 6))


@given(st.integers(1, 12), st.data())
def test_section_seat_inverts(nq, data):
    p = data.draw(st.integers(0, nq))
    n_x = 1 << (nq - p)
    n = data.draw(st.integers(0, (1 << nq) - 1))
    section, seat = section_seat(n, n_x, nq)
    assert section * n_x + seat == n
    assert 0 <= seat < n_x and 0 <= section < 1 << p


@given(st.integers(1, 12), st.data())
def test_same_section_matches_stride(nq, data):
    p = data.draw(st.integers(0, nq))
    i_s = data.draw(st.integers(1, nq))
    assert same_section(i_s, p, nq) == ((1 << (nq - i_s)) < (1 << (nq - p)))


def test_topology_fields():
    t = Topology.create(nq=6, n_ranks=8, rank=5, group_count=2)
    assert t.n_x * t.n_ranks == 1 << 6
    assert (t.group_size, t.group_id, t.group_rank) == (4, 1, 1)


@pytest.mark.parametrize("nq, ranks, groups", [(3, 3, 1), (2, 8, 1), (4, 4, 3), (4, 4, 8)])
def test_topology_rejects_bad_layouts(nq, ranks, groups):
    with pytest.raises(ConfigurationError):
        Topology.create(nq, ranks, 0, groups)


def test_group_layout_examples():
    assert group_layout(4, 2) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert group_layout(8, 1) == [(0, r) for r in range(8)]
    assert group_layout(8, 8) == [(r, 0) for r in range(8)]
    with pytest.raises(ConfigurationError):
        group_layout(8, 3)


@pytest.mark.parametrize("groups", [1, 2, 4])
def test_split_groups_partitions_without_messages(groups):
    def work(comm):
        before = comm.messages_sent
        sub = split_groups(comm, groups)
        return sub.members, sub.rank, comm.messages_sent - before

    out = spmd(4, work)
    members = {m for m, _, _ in out}
    assert sorted(r for m in members for r in m) == [0, 1, 2, 3]
    assert all(sent == 0 for _, _, sent in out)
    assert [r for _, r, _ in out] == [r % (4 // groups) for r in range(4)]
