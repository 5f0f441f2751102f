"""Domain-type behaviour: conflicts, timestamp ordering, partitions."""

import pytest
from hypothesis import given, strategies as st

from gmcast.core import (ALL, NONE, RW_KEY, Advance, Begin, GroupPartition,
                         Message, NotCoverable, Operation, OpKind, TsPair,
                         conflict_msg, conflict_rw, gb_conflict,
                         make_custom_relation, partition_of, ts_less)


def read(k):
    return Operation(OpKind.READ, k)


def write(k, v="v"):
    return Operation(OpKind.WRITE, k, (v,))


def msg(mid, dest, *ops, src=0):
    return Message(mid, src, frozenset(dest), tuple(ops) or (read("x"),))


class TestConflictRw:
    def test_two_reads_commute(self):
        assert conflict_rw(read("k"), read("k")) is False

    def test_write_read_conflict(self):
        assert conflict_rw(write("k"), read("k")) is True

    def test_different_keys_commute(self):
        assert conflict_rw(write("k1"), write("k2")) is False

    def test_noop_conflicts_with_nothing(self):
        assert conflict_rw(Operation(OpKind.NOOP), write("k")) is False

    def test_cas_counts_as_update(self):
        cas = Operation(OpKind.CAS, "k", ("1", "2"))
        assert conflict_rw(cas, read("k")) is True
        assert conflict_rw(cas, cas) is True


class TestOperationShape:
    def test_read_refuses_value(self):
        with pytest.raises(ValueError):
            Operation(OpKind.READ, "k", ("v",))

    def test_cas_needs_two_values(self):
        with pytest.raises(ValueError):
            Operation(OpKind.CAS, "k", ("v",))


class TestConflictMsg:
    def test_write_vs_read_shared_dest(self):
        a = msg(1, {0, 1}, write("k"))
        b = msg(2, {1, 2}, read("k"))
        assert conflict_msg(a, b, RW_KEY) is True

    def test_two_reads_never_conflict(self):
        a = msg(1, {0, 1}, read("k"))
        b = msg(2, {0, 1}, read("k"))
        assert conflict_msg(a, b, RW_KEY) is False

    def test_identical_ids_rejected(self):
        a = msg(1, {0, 1}, write("k"))
        with pytest.raises(ValueError):
            conflict_msg(a, a, RW_KEY)

    def test_disjoint_destinations_never_conflict(self):
        a = msg(1, {0}, write("k"))
        b = msg(2, {1}, write("k"))
        assert conflict_msg(a, b, RW_KEY) is False
        assert conflict_msg(a, b, ALL) is False

    def test_all_and_none(self):
        a = msg(1, {0, 1}, read("k"))
        b = msg(2, {1}, read("k2"))
        assert conflict_msg(a, b, ALL) is True
        assert conflict_msg(a, b, NONE) is False


class TestGbConflict:
    def test_advance_conflicts_with_begin(self):
        assert gb_conflict(Advance(5), Begin(msg(1, {0}, write("k"))), RW_KEY)

    def test_two_reads_commute(self):
        x = Begin(msg(1, {0, 1}, read("k")))
        y = Begin(msg(2, {0, 1}, read("k")))
        assert gb_conflict(x, y, RW_KEY) is False

    def test_two_advances_conflict(self):
        assert gb_conflict(Advance(3), Advance(7), RW_KEY) is True

    def test_same_message_twice_commutes(self):
        m = msg(1, {0, 1}, write("k"))
        assert gb_conflict(Begin(m), Begin(m), RW_KEY) is False


class TestTsLess:
    def test_lower_timestamp_wins(self):
        assert ts_less(TsPair(1, 2), TsPair(2, 4)) is True

    def test_tie_broken_by_id(self):
        assert ts_less(TsPair(1, 5), TsPair(2, 5)) is True
        assert ts_less(TsPair(2, 5), TsPair(1, 5)) is False

    def test_same_id_rejected(self):
        with pytest.raises(ValueError):
            ts_less(TsPair(1, 5), TsPair(1, 6))


class TestPartitionOf:
    part = GroupPartition((frozenset({0, 1}), frozenset({2, 3})))

    def test_union_of_both_groups(self):
        assert partition_of(frozenset({0, 1, 2, 3}), self.part) == {0, 1}

    def test_single_group(self):
        assert partition_of(frozenset({0, 1}), self.part) == {0}

    def test_split_group_rejected(self):
        with pytest.raises(NotCoverable):
            partition_of(frozenset({0, 2}), self.part)

    def test_unknown_process_rejected(self):
        with pytest.raises(NotCoverable):
            partition_of(frozenset({9}), self.part)

    def test_overlapping_groups_rejected(self):
        with pytest.raises(ValueError):
            GroupPartition((frozenset({0, 1}), frozenset({1, 2})))


class TestCustomRelation:
    def test_symmetric_closure_and_lookup(self):
        a, b = msg(1, {0, 1}, write("k")), msg(2, {1}, write("k"))
        rel = make_custom_relation([(1, 2)], {1: a, 2: b})
        assert conflict_msg(a, b, rel) and conflict_msg(b, a, rel)

    def test_reflexive_pair_rejected(self):
        a = msg(1, {0}, write("k"))
        with pytest.raises(ValueError):
            make_custom_relation([(1, 1)], {1: a})

    def test_disjoint_pair_rejected(self):
        a, b = msg(1, {0}, write("k")), msg(2, {1}, write("k"))
        with pytest.raises(ValueError):
            make_custom_relation([(1, 2)], {1: a, 2: b})


# -- property tests ---------------------------------------------------------

ops_st = st.one_of(
    st.builds(read, st.sampled_from(["a", "b"])),
    st.builds(write, st.sampled_from(["a", "b"]), st.just("v")),
    st.just(Operation(OpKind.NOOP)),
)
msg_ids = st.integers(min_value=1, max_value=50)


@st.composite
def messages(draw, mid):
    dest = draw(st.sets(st.integers(0, 3), min_size=1, max_size=4))
    ops = draw(st.lists(ops_st, min_size=1, max_size=2))
    return Message(mid, draw(st.integers(0, 3)), frozenset(dest), tuple(ops))


@given(a=messages(1), b=messages(2),
       rel=st.sampled_from([RW_KEY, ALL, NONE]))
def test_conflict_symmetric_and_needs_shared_dest(a, b, rel):
    assert conflict_msg(a, b, rel) == conflict_msg(b, a, rel)
    if conflict_msg(a, b, rel):
        assert a.dest & b.dest


@given(st.lists(st.tuples(msg_ids, st.integers(0, 5)),
                min_size=2, max_size=6, unique_by=lambda t: t[0]))
def test_ts_less_is_a_strict_total_order(pairs):
    ts = [TsPair(mid, t) for mid, t in pairs]
    for i, a in enumerate(ts):
        for b in ts[i + 1:]:
            assert ts_less(a, b) != ts_less(b, a)  # trichotomy, a != b
    ordered = sorted(ts, key=lambda p: (p.ts, p.msg_id))
    for i in range(len(ordered) - 1):
        assert ts_less(ordered[i], ordered[i + 1])
    for i in range(len(ordered) - 2):  # transitivity along the chain
        assert ts_less(ordered[i], ordered[i + 2])


@given(st.lists(st.integers(1, 3), min_size=1, max_size=4),
       st.data())
def test_partition_of_returns_exact_cover(sizes, data):
    groups, start = [], 0
    for size in sizes:
        groups.append(frozenset(range(start, start + size)))
        start += size
    part = GroupPartition(tuple(groups))
    chosen = data.draw(st.sets(st.integers(0, len(groups) - 1), min_size=1))
    dest = frozenset().union(*(groups[i] for i in chosen))
    got = partition_of(dest, part)
    assert frozenset().union(*(part.groups[i] for i in got)) == dest
    assert got == frozenset(chosen)
