"""Failure-free state machine: proposal clocks, final timestamps, delivery
fixpoint."""

import pytest

from gmcast.base_protocol import (BaseProcess, Deliver, DuplicateMulticast,
                                  Propose, UnknownMessage)
from gmcast.core import RW_KEY, Begin, Message, Operation, OpKind


def write(k, v="v"):
    return Operation(OpKind.WRITE, k, (v,))


def read(k):
    return Operation(OpKind.READ, k)


def msg(mid, *ops, dest=(0, 1), src=9):
    return Message(mid, src, frozenset(dest), tuple(ops))


def test_gm_send_targets_every_destination():
    p = BaseProcess(9, RW_KEY)
    out = p.gm_send(msg(1, write("k"), dest=(0, 1)))
    assert [(q, type(w)) for q, w in out.sends] == [(0, Begin), (1, Begin)]


def test_gm_send_single_destination():
    p = BaseProcess(9, RW_KEY)
    assert len(p.gm_send(msg(1, write("k"), dest=(0,))).sends) == 1


def test_gm_send_twice_rejected():
    p = BaseProcess(9, RW_KEY)
    m = msg(1, write("k"))
    p.gm_send(m)
    with pytest.raises(DuplicateMulticast):
        p.gm_send(m)


def test_begin_sequence_bumps_only_on_conflict():
    p = BaseProcess(0, RW_KEY)
    out1 = p.on_begin(msg(1, write("k")), 9)
    assert p.clock == 0 and out1.sends == [(9, Propose(msg(1, write("k")), 0))]
    p.on_begin(msg(2, write("k")), 9)       # conflicts with m1
    assert p.clock == 1
    assert [m.id for m in p.recent] == [2]
    out3 = p.on_begin(msg(3, read("k2")), 9)  # no conflict, clock unchanged
    assert p.clock == 1
    assert [m.id for m in p.recent] == [2, 3]
    assert out3.sends[0][1].ts == 1


def test_duplicate_begin_fails_loudly():
    p = BaseProcess(0, RW_KEY)
    p.on_begin(msg(1, write("k")), 9)
    with pytest.raises(AssertionError):
        p.on_begin(msg(1, write("k")), 9)


def test_all_proposals_takes_the_maximum():
    p = BaseProcess(9, RW_KEY)
    m = msg(1, write("k"), dest=(0, 1, 2))
    out = p.on_all_proposals(m, {0: 0, 1: 2, 2: 1})
    assert all(isinstance(w, Deliver) and w.ts == 2 for _, w in out.sends)
    assert [q for q, _ in out.sends] == [0, 1, 2]


def test_all_proposals_accepts_figure_values():
    p = BaseProcess(9, RW_KEY)
    m = msg(1, write("k"), dest=(0, 1))
    out = p.on_all_proposals(m, {0: 42, 1: 3})
    assert out.sends[0][1].ts == 42


def test_all_proposals_single_destination():
    p = BaseProcess(9, RW_KEY)
    m = msg(1, write("k"), dest=(0,))
    assert p.on_all_proposals(m, {0: 7}).sends[0][1].ts == 7


def test_all_proposals_requires_complete_set():
    p = BaseProcess(9, RW_KEY)
    with pytest.raises(ValueError):
        p.on_all_proposals(msg(1, write("k"), dest=(0, 1)), {0: 1})


def test_proposals_buffer_until_complete():
    p = BaseProcess(9, RW_KEY)
    m = msg(1, write("k"), dest=(0, 1))
    assert p.on_propose(m, 0, 0).sends == []
    out = p.on_propose(m, 4, 1)
    assert [w.ts for _, w in out.sends] == [4, 4]


def msg_in_pending(p, mid, ts):
    p.pending[mid] = (msg(mid, write("k")), ts)


def test_deliver_bumps_past_conflicting_recent():
    p = BaseProcess(0, RW_KEY)
    p.clock = 3
    p.recent.append(msg(2, write("k")))
    m = msg(1, write("k"))
    p.pending[1] = (m, 3)
    p.on_deliver_msg(m, 5)
    assert p.clock == 6 and p.recent == []


def test_deliver_syncs_clock_without_conflict():
    p = BaseProcess(0, RW_KEY)
    p.clock = 3
    m = msg(1, write("k"))
    p.pending[1] = (m, 3)
    p.on_deliver_msg(m, 5)
    assert p.clock == 5


def test_deliver_keeps_higher_clock():
    p = BaseProcess(0, RW_KEY)
    p.clock = 7
    m = msg(1, write("k"))
    p.pending[1] = (m, 3)
    p.on_deliver_msg(m, 5)
    assert p.clock == 7


def test_deliver_unknown_message_rejected():
    p = BaseProcess(0, RW_KEY)
    with pytest.raises(UnknownMessage):
        p.on_deliver_msg(msg(1, write("k")), 5)


class TestTryDeliver:
    def test_lower_pair_beats_pending_conflict(self):
        p = BaseProcess(0, RW_KEY)
        m, m2 = msg(1, write("k")), msg(2, write("k"))
        p.delivering[1] = (m, 2)
        p.pending[2] = (m2, 4)
        assert [x.id for x, _ in p.try_deliver()] == [1]

    def test_tie_broken_by_id(self):
        p = BaseProcess(0, RW_KEY)
        m, m2 = msg(1, write("k")), msg(2, write("k"))
        p.delivering[2] = (m2, 2)
        p.delivering[1] = (m, 2)
        assert [x.id for x, _ in p.try_deliver()] == [1, 2]

    def test_blocked_by_lower_pending_conflict(self):
        p = BaseProcess(0, RW_KEY)
        m, m2 = msg(1, write("k")), msg(2, write("k"))
        p.delivering[1] = (m, 2)
        p.pending[2] = (m2, 1)
        assert p.try_deliver() == []

    def test_non_conflicting_go_out_together(self):
        p = BaseProcess(0, RW_KEY)
        m, m2 = msg(1, read("k")), msg(2, read("k"))
        p.delivering[1] = (m, 2)
        p.delivering[2] = (m2, 9)
        assert sorted(x.id for x, _ in p.try_deliver()) == [1, 2]


def test_begin_proposes_past_delivered_conflicting_finals():
    p = BaseProcess(0, RW_KEY)
    m_old = msg(9, write("k"))
    p.pending[9] = (m_old, 0)
    p.on_deliver_msg(m_old, 3)      # clock syncs to the final exactly
    p.try_deliver()
    p.recent.clear()                # as a clock push would leave it
    out = p.on_begin(msg(1, read("k")), 8)
    assert out.sends[0][1].ts == 4  # strictly past the delivered final
    assert p.clock == 4


def test_epoch_gc_bumps_and_clears():
    p = BaseProcess(0, RW_KEY, gc_epoch=2)
    p.on_begin(msg(1, read("a")), 9)
    assert p.clock == 0
    p.on_begin(msg(2, read("b")), 9)
    assert p.clock == 1 and p.recent == []
