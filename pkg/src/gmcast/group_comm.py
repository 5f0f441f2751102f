"""Per-group broadcast: a simulator-level ordering service standing in for
a consensus-backed generic broadcast, plus the unreliable failure detector.

The orderer keeps one append-only log per group. Conflicting casts are
delivered in identical relative order at every member; non-conflicting
casts leave the implementation some freedom, which the ``skew`` ordering
policy exercises deliberately.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .core import (Advance, Begin, ConflictRelation, GroupPayload, ProcessId,
                   gb_conflict)


@dataclass
class GroupMsg:
    """One cast instance inside a group's ordering pipeline."""
    payload: GroupPayload
    origin: ProcessId
    seq: int           # unique per group, assigned at cast
    cast_tick: int
    deliver_tick: int

    @property
    def kind(self) -> str:
        return "Begin" if isinstance(self.payload, Begin) else "Advance"


@dataclass(frozen=True)
class GbLatency:
    """Cost, in message delays, of one group broadcast.

    ``contention`` charges 2 when no gb-conflicting cast is in flight at
    cast time and 3 otherwise; concurrent clock pushes carrying the same
    timestamp are coalesced onto the fast path (identical values need no
    extra ordering round). ``fixed`` always charges ``fixed_cost``.
    """
    model: str = "contention"
    fixed_cost: int = 2

    def cost(self, payload: GroupPayload, in_flight: Iterable[GroupMsg],
             rel: ConflictRelation) -> int:
        if self.model == "fixed":
            return self.fixed_cost
        for other in in_flight:
            if (isinstance(payload, Advance)
                    and isinstance(other.payload, Advance)
                    and payload.ts == other.payload.ts):
                continue
            if gb_conflict(payload, other.payload, rel):
                return 3
        return 2


class GroupOrderer:
    """Ordering service for one group."""

    def __init__(self, index: int, members: frozenset[ProcessId],
                 rel: ConflictRelation, latency: GbLatency,
                 order: str = "strict"):
        if order not in ("strict", "skew"):
            raise ValueError(f"unknown gb order policy {order!r}")
        self.index = index
        self.members = members
        self.rel = rel
        self.latency = latency
        self.order = order
        self.log: list[GroupMsg] = []
        # How much of the log each member has been handed; correct members
        # converge to the full log.
        self.delivered_upto: dict[ProcessId, int] = {m: 0 for m in members}
        self._in_flight: list[GroupMsg] = []
        self._next_seq = 0

    def gb_cast(self, payload: GroupPayload, origin: ProcessId,
                now: int) -> GroupMsg:
        """Enter a cast into the pipeline; returns the scheduled instance."""
        pending = [g for g in self._in_flight if g.deliver_tick > now]
        cost = self.latency.cost(payload, pending, self.rel)
        gm = GroupMsg(payload, origin, self._next_seq, now, now + cost)
        self._next_seq += 1
        self.log.append(gm)
        self._in_flight.append(gm)
        return gm

    def order_pending(self, tick: int,
                      crashed: set[ProcessId]) -> list[tuple[ProcessId, GroupMsg]]:
        """Hand out the casts due at `tick` to every non-crashed member.

        Conflicting casts keep log order at every member. Under the skew
        policy, odd-indexed members see each maximal run of pairwise
        non-conflicting casts reversed, which is legal for a generic
        broadcast and the source of opposite delivery orders downstream.
        """
        batch = [g for g in self._in_flight if g.deliver_tick == tick]
        self._in_flight = [g for g in self._in_flight if g.deliver_tick != tick]
        deliveries: list[tuple[ProcessId, GroupMsg]] = []
        for member in sorted(self.members):
            if member in crashed:
                continue
            for gm in self._member_order(batch, member):
                deliveries.append((member, gm))
            self.delivered_upto[member] += len(batch)
        return deliveries

    def _member_order(self, batch: list[GroupMsg],
                      member: ProcessId) -> list[GroupMsg]:
        if self.order == "strict" or member % 2 == 0:
            return batch
        out: list[GroupMsg] = []
        run: list[GroupMsg] = []
        for gm in batch:
            if all(not gb_conflict(gm.payload, r.payload, self.rel) for r in run):
                run.append(gm)
            else:
                out.extend(reversed(run))
                run = [gm]
        out.extend(reversed(run))
        return out


class FailureDetector:
    """Unreliable failure detector: complete, not necessarily accurate.

    ``accurate`` mode suspects exactly the crashed processes, starting
    ``suspicion_delay`` ticks after the crash. ``suspect-all`` always
    returns the whole process set, the degenerate but valid implementation.
    """

    def __init__(self, processes: Iterable[ProcessId],
                 mode: str = "accurate", suspicion_delay: int = 2):
        if mode not in ("accurate", "suspect-all"):
            raise ValueError(f"unknown failure detector mode {mode!r}")
        self.processes = frozenset(processes)
        self.mode = mode
        self.suspicion_delay = suspicion_delay
        self.crash_ticks: dict[ProcessId, int] = {}

    def note_crash(self, p: ProcessId, tick: int) -> None:
        self.crash_ticks.setdefault(p, tick)

    def fd_suspects(self, at: ProcessId, now: int) -> set[ProcessId]:
        """The suspected set as seen by process `at` at tick `now`."""
        if self.mode == "suspect-all":
            return set(self.processes)
        return {q for q, t in self.crash_ticks.items()
                if now >= t + self.suspicion_delay}
