"""Group broadcast ordering, latency charging, failure detection."""

from gmcast.core import RW_KEY, Advance, Begin, Message, Operation, OpKind
from gmcast.group_comm import FailureDetector, GbLatency, GroupOrderer


def read(mid, dest=(0, 1)):
    return Message(mid, 9, frozenset(dest), (Operation(OpKind.READ, "x"),))


def write(mid, dest=(0, 1)):
    return Message(mid, 9, frozenset(dest),
                   (Operation(OpKind.WRITE, "x", ("v",)),))


def orderer(order="strict"):
    return GroupOrderer(0, frozenset({0, 1}), RW_KEY, GbLatency(), order)


class TestLatency:
    def test_uncontended_cast_costs_two(self):
        o = orderer()
        assert o.gb_cast(Begin(write(1)), 9, 0).deliver_tick == 2

    def test_conflicting_in_flight_costs_three(self):
        o = orderer()
        o.gb_cast(Begin(write(1)), 9, 0)
        assert o.gb_cast(Begin(write(2)), 9, 0).deliver_tick == 3
        assert o.gb_cast(Begin(read(3)), 9, 1).deliver_tick == 4

    def test_non_conflicting_keep_fast_path(self):
        o = orderer()
        o.gb_cast(Begin(read(1)), 9, 0)
        assert o.gb_cast(Begin(read(2)), 9, 0).deliver_tick == 2

    def test_equal_advances_coalesce(self):
        o = orderer()
        o.gb_cast(Advance(42), 0, 3)
        assert o.gb_cast(Advance(42), 1, 3).deliver_tick == 5
        assert o.gb_cast(Advance(43), 1, 3).deliver_tick == 6

    def test_fixed_model(self):
        o = GroupOrderer(0, frozenset({0, 1}), RW_KEY,
                         GbLatency("fixed", 4), "strict")
        o.gb_cast(Begin(write(1)), 9, 0)
        assert o.gb_cast(Begin(write(2)), 9, 0).deliver_tick == 4

    def test_delivered_casts_stop_counting(self):
        o = orderer()
        o.gb_cast(Begin(write(1)), 9, 0)
        assert o.gb_cast(Begin(write(2)), 9, 2).deliver_tick == 4


class TestOrdering:
    def test_strict_same_order_at_all_members(self):
        o = orderer()
        o.gb_cast(Begin(write(1)), 9, 0)
        g2 = o.gb_cast(Begin(write(2)), 9, 0)
        first = o.order_pending(2, set())
        second = o.order_pending(g2.deliver_tick, set())
        assert [(m, gm.payload.msg.id) for m, gm in first] == [(0, 1), (1, 1)]
        assert [(m, gm.payload.msg.id) for m, gm in second] == [(0, 2), (1, 2)]

    def test_skew_reverses_commuting_runs_for_odd_members(self):
        o = orderer("skew")
        o.gb_cast(Begin(read(1)), 9, 0)
        o.gb_cast(Begin(read(2)), 9, 0)
        got = o.order_pending(2, set())
        assert [(m, gm.payload.msg.id) for m, gm in got] == \
            [(0, 1), (0, 2), (1, 2), (1, 1)]

    def test_skew_never_reorders_conflicting_casts(self):
        o = GroupOrderer(0, frozenset({0, 1}), RW_KEY,
                         GbLatency("fixed", 2), "skew")
        o.gb_cast(Begin(write(1)), 9, 0)
        o.gb_cast(Begin(write(2)), 9, 0)
        got = [(m, gm.payload.msg.id) for m, gm in o.order_pending(2, set())]
        assert got == [(0, 1), (0, 2), (1, 1), (1, 2)]

    def test_crashed_member_receives_nothing(self):
        o = orderer()
        o.gb_cast(Begin(write(1)), 9, 0)
        got = o.order_pending(2, crashed={1})
        assert [m for m, _ in got] == [0]

    def test_correct_members_converge_to_the_full_log(self):
        o = orderer()
        o.gb_cast(Begin(write(1)), 9, 0)
        o.gb_cast(Begin(write(2)), 9, 0)
        o.order_pending(2, set())
        o.order_pending(3, set())
        assert o.delivered_upto == {0: len(o.log), 1: len(o.log)}


class TestFailureDetector:
    def test_suspicion_starts_after_delay(self):
        fd = FailureDetector(range(4), "accurate", suspicion_delay=2)
        fd.note_crash(1, 5)
        assert fd.fd_suspects(0, 6) == set()
        assert fd.fd_suspects(0, 7) == {1}
        assert fd.fd_suspects(3, 9) == {1}

    def test_no_crash_no_suspicion(self):
        fd = FailureDetector(range(4))
        assert fd.fd_suspects(0, 100) == set()

    def test_suspect_all_returns_everyone(self):
        fd = FailureDetector(range(4), "suspect-all", 0)
        assert fd.fd_suspects(2, 0) == {0, 1, 2, 3}
