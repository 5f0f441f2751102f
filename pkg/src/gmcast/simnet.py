"""Deterministic discrete-event simulator.

One tick is one message delay: every point-to-point send is received
exactly one tick later, group broadcasts cost what the latency model
charges. Events execute in (tick, seq) order, so a run is a pure function
of its scenario. The full run is recorded as a trace of tab-separated
records that round-trips through text.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .core import Advance, Begin, GmcastError, ProcessId
from .base_protocol import BaseProcess, Deliver, Output, Propose
from .ft_protocol import FtProcess
from .group_comm import FailureDetector, GroupOrderer
from .scenario import (CrashSpec, MessageSpec, Scenario, ScenarioInvalid,
                       validate_scenario)


class NonQuiescent(GmcastError):
    """The tick limit was reached with events still pending."""


class DoubleCrash(GmcastError):
    """A process was crashed twice."""


class NotDelivered(GmcastError):
    """A correct destination never delivered the message; doubles as a
    Termination violation signal."""


class EventKind(Enum):
    POINT_TO_POINT = "p2p"
    GB_DELIVERY = "gb"
    CRASH = "crash"
    MULTICAST = "mcast"
    FD_TICK = "fd"


@dataclass(order=True)
class Event:
    tick: int
    seq: int
    kind: EventKind = field(compare=False)
    target: int = field(compare=False)          # process id or group index
    payload: object = field(compare=False, default=None)


@dataclass(frozen=True)
class TraceRecord:
    tick: int
    process: ProcessId
    action: str
    detail: dict[str, str]

    def line(self) -> str:
        detail = " ".join(f"{k}={v}" for k, v in self.detail.items()) or "-"
        return f"{self.tick}\tp{self.process}\t{self.action}\t{detail}"


@dataclass
class Trace:
    """Append-only, totally ordered log of one run."""

    meta: dict[str, object]
    records: list[TraceRecord] = field(default_factory=list)

    # -- serialization ----------------------------------------------------

    def to_text(self, summary: Optional[dict] = None) -> str:
        lines = [f"# meta {json.dumps(self.meta, sort_keys=True)}"]
        lines += [r.line() for r in self.records]
        if summary is not None:
            lines.append(f"# summary {json.dumps(summary, sort_keys=True)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "Trace":
        meta: dict[str, object] = {}
        records: list[TraceRecord] = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("meta "):
                    meta = json.loads(body[len("meta "):])
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"bad trace line: {raw!r}")
            tick, proc, action, detail_raw = parts
            detail: dict[str, str] = {}
            if detail_raw != "-":
                for token in detail_raw.split(" "):
                    k, _, v = token.partition("=")
                    detail[k] = v
            records.append(TraceRecord(int(tick), int(proc.lstrip("p")),
                                       action, detail))
        return cls(meta, records)

    # -- queries ----------------------------------------------------------

    def by_action(self, action: str) -> list[TraceRecord]:
        return [r for r in self.records if r.action == action]

    def crash_ticks(self) -> dict[ProcessId, int]:
        return {r.process: r.tick for r in self.by_action("crash")}

    def correct(self) -> frozenset[ProcessId]:
        n = int(self.meta["n"])
        return frozenset(range(n)) - set(self.crash_ticks())

    def multicasts(self) -> dict[int, TraceRecord]:
        out: dict[int, TraceRecord] = {}
        for r in self.by_action("gm_send"):
            out.setdefault(int(r.detail["msg"]), r)
        return out

    def dest_of(self, mid: int) -> frozenset[ProcessId]:
        rec = self.multicasts()[mid]
        return frozenset(int(tok.lstrip("p"))
                         for tok in rec.detail["dest"].split(","))

    def delivery_orders(self) -> dict[ProcessId, list[int]]:
        orders: dict[ProcessId, list[int]] = {}
        for r in self.by_action("gm_deliver"):
            orders.setdefault(r.process, []).append(int(r.detail["msg"]))
        return orders

    def deliveries_of(self, mid: int) -> dict[ProcessId, TraceRecord]:
        out: dict[ProcessId, TraceRecord] = {}
        for r in self.by_action("gm_deliver"):
            if int(r.detail["msg"]) == mid:
                out.setdefault(r.process, r)
        return out


def delivery_latency(trace: Trace, msg_id: int) -> int:
    """Ticks from multicast until the last correct destination delivered."""
    sends = trace.multicasts()
    if msg_id not in sends:
        raise NotDelivered(f"message {msg_id} was never multicast")
    start = sends[msg_id].tick
    targets = trace.dest_of(msg_id) & trace.correct()
    delivered = trace.deliveries_of(msg_id)
    missing = targets - set(delivered)
    if missing:
        raise NotDelivered(
            f"message {msg_id} undelivered at correct destination(s) "
            f"{sorted(missing)}")
    return max(delivered[p].tick for p in targets) - start


def commit_latency(trace: Trace, msg_id: int) -> int:
    """Ticks from multicast until every correct destination holds the
    decided timestamp for the message."""
    sends = trace.multicasts()
    if msg_id not in sends:
        raise NotDelivered(f"message {msg_id} was never multicast")
    start = sends[msg_id].tick
    targets = trace.dest_of(msg_id) & trace.correct()
    commits: dict[ProcessId, int] = {}
    for r in trace.by_action("commit"):
        if int(r.detail["msg"]) == msg_id:
            commits.setdefault(r.process, r.tick)
    missing = targets - set(commits)
    if missing:
        raise NotDelivered(
            f"message {msg_id} never committed at {sorted(missing)}")
    return max(commits[p] for p in targets) - start


# ---------------------------------------------------------------------------


def _wire_fields(wire: object) -> dict[str, str]:
    if isinstance(wire, Begin):
        return {"kind": "Begin", "msg": str(wire.msg.id)}
    if isinstance(wire, Propose):
        return {"kind": "Propose", "msg": str(wire.msg.id), "ts": str(wire.ts)}
    if isinstance(wire, Deliver):
        return {"kind": "Deliver", "msg": str(wire.msg.id), "ts": str(wire.ts)}
    if isinstance(wire, Advance):
        return {"kind": "Advance", "ts": str(wire.ts)}
    raise TypeError(f"unknown wire payload {wire!r}")


class _Runtime:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.trace = Trace(meta={
            "name": sc.name, "algorithm": sc.algorithm, "n": sc.n,
            "seed": sc.seed, "relation": sc.rel.name,
            "groups": [sorted(g) for g in sc.part.groups],
        })
        self.queue: list[Event] = []
        self.seq = itertools.count()
        self.crashed: set[ProcessId] = set()
        self.fd = FailureDetector(range(sc.n), sc.detector, sc.suspicion_delay)
        if sc.algorithm == "base":
            self.procs: dict[int, Union[BaseProcess, FtProcess]] = {
                p: BaseProcess(p, sc.rel, gc_epoch=sc.gc_epoch)
                for p in range(sc.n)}
        else:
            self.procs = {p: FtProcess(p, sc.rel, sc.part)
                          for p in range(sc.n)}
        for p, k in sc.init_clocks.items():
            self.procs[p].clock = k
        self.orderers = [
            GroupOrderer(i, g, sc.rel, sc.latency, sc.gb_order)
            for i, g in enumerate(sc.part.groups)]
        self._flush_scheduled: set[tuple[int, int]] = set()
        self._send_crashes: dict[tuple[int, int], CrashSpec] = {}
        self._recovery_attempt: dict[tuple[int, int], int] = {}
        self._wakes: set[int] = set()

    # -- scheduling -------------------------------------------------------

    def push(self, tick: int, kind: EventKind, target: int,
             payload: object = None) -> None:
        heapq.heappush(self.queue, Event(tick, next(self.seq), kind, target,
                                         payload))

    def schedule_scenario(self) -> None:
        sc = self.sc
        for c in sc.crashes:
            if c.after_casts is None:
                self.push(c.tick, EventKind.CRASH, c.pid)
            else:
                self._send_crashes[(c.pid, c.tick)] = c
            if sc.algorithm == "ft" and sc.recovery:
                self.push(c.tick + sc.suspicion_delay, EventKind.FD_TICK, 0)
        for spec in sorted(sc.messages, key=lambda s: (s.send_tick, s.msg.id)):
            self.push(spec.send_tick, EventKind.MULTICAST, spec.msg.src, spec)

    # -- trace ------------------------------------------------------------

    def record(self, tick: int, process: ProcessId, action: str,
               detail: dict[str, str]) -> None:
        self.trace.records.append(TraceRecord(tick, process, action, detail))

    # -- main loop --------------------------------------------------------

    def run(self) -> Trace:
        self.schedule_scenario()
        while self.queue:
            tick = self.queue[0].tick
            if tick > self.sc.tick_limit:
                raise NonQuiescent(
                    f"events pending beyond tick limit {self.sc.tick_limit}")
            while self.queue and self.queue[0].tick == tick:
                self.execute(heapq.heappop(self.queue))
            self.end_of_tick(tick)
        return self.trace

    def execute(self, ev: Event) -> None:
        if ev.kind is EventKind.CRASH:
            self.do_crash(ev.target, ev.tick)
        elif ev.kind is EventKind.MULTICAST:
            self.do_multicast(ev.target, ev.payload, ev.tick)
        elif ev.kind is EventKind.POINT_TO_POINT:
            self.do_receive(ev.target, ev.payload, ev.tick)
        elif ev.kind is EventKind.GB_DELIVERY:
            self.do_gb_flush(ev.target, ev.tick)
        elif ev.kind is EventKind.FD_TICK:
            pass  # wake-up only; recovery runs in end_of_tick
        else:  # pragma: no cover
            raise AssertionError(ev.kind)

    def do_crash(self, pid: ProcessId, tick: int) -> None:
        if pid in self.crashed:
            raise DoubleCrash(f"process p{pid} crashed twice")
        self.crashed.add(pid)
        self.fd.note_crash(pid, tick)
        self.record(tick, pid, "crash", {})

    def do_multicast(self, pid: ProcessId, spec: MessageSpec, tick: int) -> None:
        if pid in self.crashed:
            return
        m = spec.msg
        self.record(tick, pid, "gm_send", {
            "msg": str(m.id),
            "dest": ",".join(f"p{q}" for q in sorted(m.dest))})
        out = self.procs[pid].gm_send(m)
        crash = self._send_crashes.pop((pid, tick), None)
        if crash is not None:
            out.casts = out.casts[:crash.after_casts]
            self.apply_output(pid, out, tick)
            self.do_crash(pid, tick)
            return
        self.apply_output(pid, out, tick)
        self.try_deliver(pid, tick)

    def do_receive(self, pid: ProcessId, payload: tuple, tick: int) -> None:
        wire, frm = payload
        if pid in self.crashed:
            return
        detail = _wire_fields(wire)
        detail["from"] = f"p{frm}"
        self.record(tick, pid, "receive", detail)
        proc = self.procs[pid]
        if isinstance(wire, Begin):
            out = proc.on_begin(wire.msg, frm)
        elif isinstance(wire, Propose):
            out = proc.on_propose(wire.msg, wire.ts, frm)
        elif isinstance(wire, Deliver):
            out = proc.on_deliver_msg(wire.msg, wire.ts)
        else:  # pragma: no cover
            raise TypeError(wire)
        self.apply_output(pid, out, tick)
        self.try_deliver(pid, tick)

    def do_gb_flush(self, gidx: int, tick: int) -> None:
        self._flush_scheduled.discard((gidx, tick))
        orderer = self.orderers[gidx]
        for member, gm in orderer.order_pending(tick, self.crashed):
            detail = _wire_fields(gm.payload)
            detail.update({"group": f"g{gidx}", "origin": f"p{gm.origin}",
                           "seq": str(gm.seq)})
            self.record(tick, member, "gb_deliver", detail)
            proc = self.procs[member]
            if isinstance(gm.payload, Begin):
                out = proc.on_gb_begin(gm.payload.msg)
            else:
                out = proc.on_gb_advance(gm.payload.ts)
            self.apply_output(member, out, tick)
            self.try_deliver(member, tick)

    def apply_output(self, pid: ProcessId, out: Output, tick: int) -> None:
        for cc in out.clock_changes:
            self.record(tick, pid, "clock_change", {
                "old": str(cc.old), "new": str(cc.new),
                "reason": cc.reason, "trigger": cc.trigger})
        for mid, ts in out.commits:
            self.record(tick, pid, "commit", {"msg": str(mid), "ts": str(ts)})
        for to, wire in out.sends:
            detail = _wire_fields(wire)
            detail["to"] = f"p{to}"
            self.record(tick, pid, "send", detail)
            self.push(tick + 1, EventKind.POINT_TO_POINT, to, (wire, pid))
        for gidx, payload in out.casts:
            detail = _wire_fields(payload)
            detail["group"] = f"g{gidx}"
            self.record(tick, pid, "gb_cast", detail)
            gm = self.orderers[gidx].gb_cast(payload, pid, tick)
            key = (gidx, gm.deliver_tick)
            if key not in self._flush_scheduled:
                self._flush_scheduled.add(key)
                self.push(gm.deliver_tick, EventKind.GB_DELIVERY, gidx)

    def try_deliver(self, pid: ProcessId, tick: int) -> None:
        for m, ts in self.procs[pid].try_deliver():
            self.record(tick, pid, "gm_deliver",
                        {"msg": str(m.id), "ts": str(ts)})

    def end_of_tick(self, tick: int) -> None:
        sc = self.sc
        if sc.algorithm != "ft" or not sc.recovery:
            return
        pending = False
        for pid in sorted(set(range(sc.n)) - self.crashed):
            suspected = self.fd.fd_suspects(pid, tick)
            if not suspected:
                continue
            proc = self.procs[pid]
            for m in proc.recovery_candidates(suspected):
                pending = True
                last = self._recovery_attempt.get((pid, m.id))
                if last is not None and tick - last < sc.retry_interval:
                    continue
                self._recovery_attempt[(pid, m.id)] = tick
                out = proc.recover(m, suspected)
                self.apply_output(pid, out, tick)
        if pending:
            wake = tick + sc.retry_interval
            if wake not in self._wakes and wake <= sc.tick_limit:
                self._wakes.add(wake)
                self.push(wake, EventKind.FD_TICK, 0)


def run(sc: Scenario) -> Trace:
    """Execute a concrete scenario to quiescence and return its trace."""
    if sc.generate is not None:
        raise ScenarioInvalid("realize the scenario before running it")
    validate_scenario(sc)
    return _Runtime(sc).run()
