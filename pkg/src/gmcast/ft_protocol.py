"""Fault-tolerant generic multicast over consensus groups, plus the
recovery procedure that un-sticks a message when its sender crashes
mid-dissemination.

Messages are broadcast group-by-group; members of one group always compute
the same proposal, so a single value per group decides the final timestamp.
Groups whose clock lags the final timestamp push it forward with a second
group broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (Advance, Begin, ConflictRelation, GmcastError,
                   GroupPartition, Message, ProcessId, TsPair, conflict_msg,
                   partition_of, ts_less)
from .base_protocol import ClockChange, Output, Propose


class ConflictingGroupProposal(GmcastError):
    """Two members of one group proposed different values for a message."""


PROPOSE = "propose"
DELIVER = "deliver"


@dataclass
class MemEntry:
    """Per-message slot: a proposal waiting for a decision, or a decided
    message waiting for delivery. Kind only ever moves propose -> deliver."""
    kind: str
    msg: Message
    ts: int


class FtProcess:
    """State machine for one process running the fault-tolerant algorithm."""

    def __init__(self, pid: ProcessId, rel: ConflictRelation,
                 part: GroupPartition):
        self.pid = pid
        self.rel = rel
        self.part = part
        self.group = part.group_of(pid)
        self.clock = 0
        self.entries: dict[int, MemEntry] = {}   # msg id -> slot, insertion-ordered
        self.recent: list[Message] = []
        # msg id -> {group index -> proposal}; a value, once set, never changes.
        self.received_proposals: dict[int, dict[int, int]] = {}
        self.delivered: list[int] = []
        self._delivered_finals: dict[int, tuple[Message, int]] = {}
        self._my_proposal: dict[int, int] = {}   # remembered for recovery resends
        self._seen_begin: set[int] = set()

    # -- helpers ---------------------------------------------------------

    def _conflicts(self, a: Message, b: Message) -> bool:
        return a.id != b.id and conflict_msg(a, b, self.rel)

    def _conflicts_recent(self, m: Message) -> bool:
        return any(self._conflicts(m, prev) for prev in self.recent)

    def _fence(self, m: Message, out: Output) -> None:
        """A proposal must exceed the final timestamp of every conflicting
        message already delivered here, or a later message can tie on the
        timestamp and win the id tie-break against one that is already out.
        Clock pushes clear the recent-messages set, so that check alone
        cannot see the collision."""
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

    def _propose_recipients(self, m: Message) -> list[ProcessId]:
        group_members = self.part.groups[self.group]
        return sorted((m.dest - group_members) | {self.pid})

    # -- handlers --------------------------------------------------------

    def gm_send(self, m: Message) -> Output:
        """Broadcast Begin(m) to every group covering the destination.

        The simulator may truncate the returned cast list to model the
        sender crashing partway through.
        """
        out = Output()
        for g in sorted(partition_of(m.dest, self.part)):
            out.casts.append((g, Begin(m)))
        return out

    def on_gb_begin(self, m: Message) -> Output:
        """Group-delivered Begin: propose the current clock for m.

        Recovery can deliver Begin(m) more than once (one instance per
        recovering process); later instances only re-send the remembered
        proposal and touch no state, keeping recovery idempotent.
        """
        out = Output()
        if m.id in self._seen_begin:
            ts = self._my_proposal[m.id]
            for q in self._propose_recipients(m):
                out.sends.append((q, Propose(m, ts)))
            return out
        self._seen_begin.add(m.id)
        self._fence(m, out)
        if self._conflicts_recent(m):
            self._bump(self.clock + 1, "begin", f"m{m.id}", out)
            self.recent.clear()
        self.recent.append(m)
        if m.id in self.entries:
            raise AssertionError(f"p{self.pid}: message {m.id} already has a slot")
        self.entries[m.id] = MemEntry(PROPOSE, m, self.clock)
        self._my_proposal[m.id] = self.clock
        for q in self._propose_recipients(m):
            out.sends.append((q, Propose(m, self.clock)))
        return out

    def on_propose(self, m: Message, ts: int, frm: ProcessId) -> Output:
        """Record a proposal under its sender's group; once every group of
        the destination is represented, decide the final timestamp."""
        g = self.part.group_of(frm)
        props = self.received_proposals.setdefault(m.id, {})
        if g in props:
            if props[g] != ts:
                raise ConflictingGroupProposal(
                    f"group {g} proposed both {props[g]} and {ts} for "
                    f"message {m.id}")
            return Output()
        props[g] = ts
        needed = partition_of(m.dest, self.part)
        if set(props) < set(needed):
            return Output()
        out = Output()
        entry = self.entries.get(m.id)
        if entry is None or entry.kind != PROPOSE:
            # Late duplicates after the decision (recovery resends).
            return out
        final = max(props[g] for g in needed)
        entry.kind = DELIVER
        entry.ts = final
        out.commits.append((m.id, final))
        if self.clock < final:  # strict: no push when already equal
            out.casts.append((self.group, Advance(final)))
        return out

    def on_gb_advance(self, ts: int) -> Output:
        """Group-delivered clock push."""
        out = Output()
        if ts > self.clock:
            self._bump(ts, "advance", f"t{ts}", out)
            self.recent.clear()
        return out

    def try_deliver(self) -> list[tuple[Message, int]]:
        """Deliver every decided message with timestamp at most the clock
        that no other slot (of either kind) blocks. Runs to a fixpoint."""
        done: list[tuple[Message, int]] = []
        progress = True
        while progress:
            progress = False
            for mid, entry in list(self.entries.items()):
                if entry.kind != DELIVER or entry.ts > self.clock:
                    continue
                if self._deliverable(entry):
                    del self.entries[mid]
                    self.delivered.append(mid)
                    self._delivered_finals[mid] = (entry.msg, entry.ts)
                    done.append((entry.msg, entry.ts))
                    progress = True
                    break
        return done

    def _deliverable(self, entry: MemEntry) -> bool:
        mine = TsPair(entry.msg.id, entry.ts)
        for oid, other in self.entries.items():
            if oid == entry.msg.id:
                continue
            if (self._conflicts(entry.msg, other.msg)
                    and not ts_less(mine, TsPair(oid, other.ts))):
                return False
        return True

    def recover(self, m: Message, suspected: set[ProcessId]) -> Output:
        """If m is stuck in the proposal phase and its sender is suspected,
        re-broadcast Begin(m) to every destination group that has not been
        heard from. No-op when the precondition does not hold."""
        out = Output()
        entry = self.entries.get(m.id)
        if entry is None or entry.kind != PROPOSE or m.src not in suspected:
            return out
        heard = set(self.received_proposals.get(m.id, {}))
        for g in sorted(partition_of(m.dest, self.part)):
            if g not in heard:
                out.casts.append((g, Begin(m)))
        return out

    def recovery_candidates(self, suspected: set[ProcessId]) -> list[Message]:
        """Messages whose recovery precondition currently holds."""
        found = []
        for entry in self.entries.values():
            if entry.kind != PROPOSE or entry.msg.src not in suspected:
                continue
            heard = set(self.received_proposals.get(entry.msg.id, {}))
            if set(partition_of(entry.msg.dest, self.part)) - heard:
                found.append(entry.msg)
        return found
