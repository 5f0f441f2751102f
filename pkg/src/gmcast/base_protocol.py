"""Failure-free generic multicast: a per-process timestamping state machine.

Each destination proposes a logical-clock value for a message; the sender
collects the proposals, the maximum becomes the final timestamp, and
messages are delivered in (timestamp, id) order among conflicting pairs.
The clock only ticks when a conflict is detected, so non-conflicting
messages never wait on each other.

Handlers are run-to-completion: the simulator feeds one event at a time
and collects the returned sends. Instances never share state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import (Begin, ConflictRelation, GmcastError, Message, ProcessId,
                   TsPair, conflict_msg, ts_less)


class DuplicateMulticast(GmcastError):
    """The same message was multicast twice."""


class UnknownMessage(GmcastError):
    """A final timestamp arrived for a message not in the pending set."""


@dataclass(frozen=True)
class Propose:
    """Timestamp proposal sent back for a message."""
    msg: Message
    ts: int


@dataclass(frozen=True)
class Deliver:
    """Final-timestamp announcement for a message."""
    msg: Message
    ts: int


@dataclass(frozen=True)
class ClockChange:
    old: int
    new: int
    reason: str    # begin | deliver | advance | epoch
    trigger: str   # m<id> for message-triggered bumps, t<ts> for clock pushes


@dataclass
class Output:
    """What one handler invocation produced."""
    sends: list[tuple[ProcessId, object]] = field(default_factory=list)
    casts: list[tuple[int, object]] = field(default_factory=list)
    clock_changes: list[ClockChange] = field(default_factory=list)
    commits: list[tuple[int, int]] = field(default_factory=list)  # (msg id, final ts)


class BaseProcess:
    """State machine for one process running the failure-free algorithm."""

    def __init__(self, pid: ProcessId, rel: ConflictRelation,
                 gc_epoch: Optional[int] = None):
        self.pid = pid
        self.rel = rel
        self.clock = 0
        # msg id -> (message, proposed/final ts); insertion order matters for
        # deterministic delivery scans.
        self.pending: dict[int, tuple[Message, int]] = {}
        self.delivering: dict[int, tuple[Message, int]] = {}
        # Messages accepted since the last conflict bump; pairwise non-conflicting.
        self.recent: list[Message] = []
        # Sender-side bookkeeping: msg id -> {process -> proposal}.
        self.received_proposals: dict[int, dict[ProcessId, int]] = {}
        self.delivered: list[int] = []
        self._delivered_finals: dict[int, tuple[Message, int]] = {}
        self._sent_ids: set[int] = set()
        self._begun_ids: set[int] = set()
        self._gc_epoch = gc_epoch
        self._begin_count = 0

    # -- helpers ---------------------------------------------------------

    def _conflicts(self, a: Message, b: Message) -> bool:
        return a.id != b.id and conflict_msg(a, b, self.rel)

    def _conflicts_recent(self, m: Message) -> bool:
        return any(self._conflicts(m, prev) for prev in self.recent)

    def _fence(self, m: Message, out: Output) -> None:
        """A proposal must exceed the final timestamp of every conflicting
        message already delivered here. A later message could otherwise tie
        with a delivered one on the timestamp and win the id tie-break,
        inverting the agreed order; the conflict check against the
        recent-messages set alone misses this once that set was cleared."""
        ceiling = max((f for m2, f in self._delivered_finals.values()
                       if self._conflicts(m, m2)), default=None)
        if ceiling is not None and self.clock <= ceiling:
            self._bump(ceiling + 1, "begin", f"m{m.id}", out)
            self.recent.clear()

    def _bump(self, new: int, reason: str, trigger: str, out: Output) -> None:
        if new < self.clock:
            raise AssertionError(
                f"p{self.pid}: clock would decrease {self.clock} -> {new}")
        if new != self.clock:
            out.clock_changes.append(ClockChange(self.clock, new, reason, trigger))
            self.clock = new

    def _check_recent(self) -> None:
        for i, a in enumerate(self.recent):
            for b in self.recent[i + 1:]:
                if self._conflicts(a, b):
                    raise AssertionError(
                        f"p{self.pid}: conflicting pair {a.id},{b.id} in the "
                        f"recent-messages set")

    # -- handlers --------------------------------------------------------

    def gm_send(self, m: Message) -> Output:
        """Multicast m: one Begin per destination. No local state change."""
        if m.id in self._sent_ids:
            raise DuplicateMulticast(f"message {m.id} already multicast")
        self._sent_ids.add(m.id)
        out = Output()
        for q in sorted(m.dest):
            out.sends.append((q, Begin(m)))
        return out

    def on_begin(self, m: Message, sender: ProcessId) -> Output:
        """Accept a new message and answer with a timestamp proposal."""
        if m.id in self._begun_ids:
            raise AssertionError(
                f"p{self.pid}: duplicate Begin for message {m.id}; channels "
                f"are reliable, this cannot happen")
        self._begun_ids.add(m.id)
        out = Output()
        self._fence(m, out)
        if self._conflicts_recent(m):
            self._bump(self.clock + 1, "begin", f"m{m.id}", out)
            self.recent.clear()
        self.recent.append(m)
        self._check_recent()
        self.pending[m.id] = (m, self.clock)
        out.sends.append((sender, Propose(m, self.clock)))
        self._begin_count += 1
        if self._gc_epoch and self._begin_count % self._gc_epoch == 0:
            self._bump(self.clock + 1, "epoch", f"e{self._begin_count}", out)
            self.recent.clear()
        return out

    def on_propose(self, m: Message, ts: int, frm: ProcessId) -> Output:
        """Record one proposal; decide once every destination answered."""
        props = self.received_proposals.setdefault(m.id, {})
        props[frm] = ts
        if set(props) == set(m.dest):
            out = self.on_all_proposals(m, props)
            del self.received_proposals[m.id]  # never re-read after deciding
            return out
        return Output()

    def on_all_proposals(self, m: Message,
                         proposals: dict[ProcessId, int]) -> Output:
        """Pick the final timestamp (the maximum) and announce it."""
        missing = set(m.dest) - set(proposals)
        if missing:
            raise ValueError(f"missing proposals from {sorted(missing)}")
        final = max(proposals.values())
        out = Output()
        for q in sorted(m.dest):
            out.sends.append((q, Deliver(m, final)))
        return out

    def on_deliver_msg(self, m: Message, final: int) -> Output:
        """Adopt the final timestamp and stage the message for delivery."""
        if m.id not in self.pending:
            raise UnknownMessage(f"p{self.pid}: {m.id} has no pending entry")
        out = Output()
        if final > self.clock:
            if self._conflicts_recent(m):
                self._bump(final + 1, "deliver", f"m{m.id}", out)
                self.recent.clear()
            else:
                self._bump(final, "deliver", f"m{m.id}", out)
        del self.pending[m.id]
        self.delivering[m.id] = (m, final)
        out.commits.append((m.id, final))
        return out

    def try_deliver(self) -> list[tuple[Message, int]]:
        """Deliver every staged message not blocked by a conflicting one
        with a lower (timestamp, id) pair. Runs to a fixpoint."""
        done: list[tuple[Message, int]] = []
        progress = True
        while progress:
            progress = False
            for mid, (m, t) in list(self.delivering.items()):
                if self._deliverable(m, t):
                    del self.delivering[mid]
                    self.delivered.append(mid)
                    self._delivered_finals[mid] = (m, t)
                    done.append((m, t))
                    progress = True
                    break
        return done

    def _deliverable(self, m: Message, t: int) -> bool:
        mine = TsPair(m.id, t)
        for other in (self.delivering, self.pending):
            for oid, (m2, t2) in other.items():
                if oid == m.id:
                    continue
                if self._conflicts(m, m2) and not ts_less(mine, TsPair(oid, t2)):
                    return False
        return True
