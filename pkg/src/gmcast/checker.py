"""Post-hoc trace verification: delivery properties, implementation
properties, and the runtime-invariant monitors.

Every check is a pure function of (trace, scenario); failing verdicts
carry a witness naming the offending records.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .core import Message, ProcessId, TsPair, conflict_msg, ts_less
from .scenario import Scenario
from .simnet import Trace


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    witness: str = ""

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        return f"{self.name}\t{self.status}\t{self.witness or '-'}"


@dataclass
class DeliveryGraph:
    """Nodes are delivered message ids; an edge m -> m' records that some
    process delivered m before m' and the two conflict."""

    nodes: set[int] = field(default_factory=set)
    edges: dict[int, set[int]] = field(default_factory=dict)

    def add_edge(self, a: int, b: int) -> None:
        self.edges.setdefault(a, set()).add(b)

    def successors(self, a: int) -> set[int]:
        return self.edges.get(a, set())

    def find_cycle(self) -> Optional[list[int]]:
        """Shortest directed cycle, or None. Iterative search; traces are
        tiny, clarity wins."""
        best: Optional[list[int]] = None
        for a in sorted(self.nodes):
            for b in sorted(self.successors(a)):
                path = self._shortest_path(b, a)
                if path is not None:
                    cycle = [a] + path
                    if best is None or len(cycle) < len(best):
                        best = cycle
        return best

    def _shortest_path(self, start: int, goal: int) -> Optional[list[int]]:
        parents: dict[int, Optional[int]] = {start: None}
        queue = deque([start])
        while queue:
            node = queue.popleft()
            if node == goal:
                path = [node]
                while parents[node] is not None:
                    node = parents[node]
                    path.append(node)
                return list(reversed(path))
            for nxt in sorted(self.successors(node)):
                if nxt not in parents:
                    parents[nxt] = node
                    queue.append(nxt)
        return None


def build_delivery_graph(trace: Trace, sc: Scenario) -> DeliveryGraph:
    graph = DeliveryGraph()
    orders = trace.delivery_orders()
    for order in orders.values():
        graph.nodes.update(order)
    for order in orders.values():
        for i, a in enumerate(order):
            for b in order[i + 1:]:
                if _conflicts(sc, a, b):
                    graph.add_edge(a, b)
    return graph


def _conflicts(sc: Scenario, a: int, b: int) -> bool:
    if a == b:
        return False
    return conflict_msg(sc.message_by_id(a), sc.message_by_id(b), sc.rel)


# ---------------------------------------------------------------------------
# Delivery properties


def check_integrity(trace: Trace, sc: Scenario) -> Verdict:
    """Each destination delivers a message at most once, only after it was
    multicast, and nobody outside the destination delivers it."""
    sent_at: dict[int, int] = {}
    seen: set[tuple[ProcessId, int]] = set()
    for idx, rec in enumerate(trace.records):
        if rec.action == "gm_send":
            sent_at.setdefault(int(rec.detail["msg"]), idx)
        elif rec.action == "gm_deliver":
            mid = int(rec.detail["msg"])
            if mid not in sent_at or sent_at[mid] > idx:
                return Verdict("integrity", False,
                               f"m{mid} delivered at p{rec.process} before "
                               f"any multicast")
            if (rec.process, mid) in seen:
                return Verdict("integrity", False,
                               f"p{rec.process} delivered m{mid} twice")
            seen.add((rec.process, mid))
            if rec.process not in sc.message_by_id(mid).dest:
                return Verdict("integrity", False,
                               f"p{rec.process} delivered m{mid} but is not "
                               f"a destination")
    return Verdict("integrity", True)


def exempt_messages(trace: Trace, sc: Scenario) -> set[int]:
    """Messages the liveness obligation does not cover: the sender is
    faulty and no process ever saw the message begin (nor delivered it)."""
    crashed = set(trace.crash_ticks())
    begun: set[int] = set()
    for rec in trace.records:
        if (rec.action == "gb_deliver" or rec.action == "receive") \
                and rec.detail.get("kind") == "Begin":
            begun.add(int(rec.detail["msg"]))
        elif rec.action == "gm_deliver":
            begun.add(int(rec.detail["msg"]))
    out = set()
    for spec in sc.messages:
        if spec.msg.src in crashed and spec.msg.id not in begun:
            out.add(spec.msg.id)
    return out


def check_termination(trace: Trace, sc: Scenario) -> Verdict:
    """Every correct destination of every obligated message delivers it."""
    exempt = exempt_messages(trace, sc)
    correct = trace.correct()
    missing: list[str] = []
    for spec in sc.messages:
        if spec.msg.id in exempt:
            continue
        delivered = set(trace.deliveries_of(spec.msg.id))
        for q in sorted(spec.msg.dest & correct):
            if q not in delivered:
                missing.append(f"m{spec.msg.id}@p{q}")
    if missing:
        return Verdict("termination", False,
                       "missing delivery " + ",".join(missing))
    return Verdict("termination", True)


def check_ordering(trace: Trace, sc: Scenario) -> Verdict:
    """The global delivery order over conflicting pairs is acyclic."""
    graph = build_delivery_graph(trace, sc)
    cycle = graph.find_cycle()
    if cycle is not None:
        pretty = "->".join(f"m{x}" for x in cycle + [cycle[0]])
        return Verdict("ordering", False, f"cycle {pretty}")
    return Verdict("ordering", True)


def check_minimality(trace: Trace, sc: Scenario) -> Verdict:
    """Only destinations and senders of multicast messages communicate."""
    involved: set[ProcessId] = set()
    sent = set(trace.multicasts())
    for spec in sc.messages:
        if spec.msg.id in sent:
            involved |= spec.msg.dest
            involved.add(spec.msg.src)
    busy_actions = ("send", "receive", "gb_cast", "gb_deliver")
    for rec in trace.records:
        if rec.action in busy_actions and rec.process not in involved:
            return Verdict("minimality", False,
                           f"uninvolved p{rec.process} has {rec.action} "
                           f"at tick {rec.tick}")
    return Verdict("minimality", True)


def find_strictness_witness(
        runs: Iterable[tuple[Trace, Scenario]]
) -> Optional[tuple[ProcessId, ProcessId, int, int]]:
    """First (p, q, m, m') with non-conflicting m, m' both addressed to p
    and q but delivered in opposite orders, scanning the given runs."""
    for trace, sc in runs:
        orders = trace.delivery_orders()
        pids = sorted(orders)
        for i, p in enumerate(pids):
            pos_p = {mid: k for k, mid in enumerate(orders[p])}
            for q in pids[i + 1:]:
                pos_q = {mid: k for k, mid in enumerate(orders[q])}
                common = sorted(set(pos_p) & set(pos_q))
                for ai, a in enumerate(common):
                    for b in common[ai + 1:]:
                        if _conflicts(sc, a, b):
                            continue
                        shared = (sc.message_by_id(a).dest
                                  & sc.message_by_id(b).dest)
                        if not {p, q} <= shared:
                            continue
                        if ((pos_p[a] < pos_p[b]) != (pos_q[a] < pos_q[b])):
                            return (p, q, a, b)
    return None


# ---------------------------------------------------------------------------
# Runtime-invariant monitors


def check_invariants(trace: Trace, sc: Scenario) -> list[Verdict]:
    """One verdict per protocol invariant monitor."""
    return [
        _monitor_deliver_once(trace),
        _monitor_clock_monotone(trace),
        _monitor_distinct_proposals(trace, sc),
        _monitor_group_block_order(trace, sc),
        _monitor_group_proposal_agreement(trace, sc),
        _monitor_final_ts_agreement(trace),
        _monitor_deliver_lower_first(trace, sc),
        _monitor_conflict_ts_order(trace, sc),
    ]


def _monitor_deliver_once(trace: Trace) -> Verdict:
    name = "deliver-once"
    seen: set[tuple[ProcessId, int]] = set()
    for rec in trace.by_action("gm_deliver"):
        key = (rec.process, int(rec.detail["msg"]))
        if key in seen:
            return Verdict(name, False,
                           f"p{key[0]} delivered m{key[1]} twice")
        seen.add(key)
    return Verdict(name, True)


def _monitor_clock_monotone(trace: Trace) -> Verdict:
    name = "clock-monotone"
    last: dict[ProcessId, int] = {}
    for rec in trace.by_action("clock_change"):
        old, new = int(rec.detail["old"]), int(rec.detail["new"])
        if new < old or old < last.get(rec.process, 0):
            return Verdict(name, False,
                           f"p{rec.process} clock moved {old}->{new} after "
                           f"{last.get(rec.process, 0)} at tick {rec.tick}")
        last[rec.process] = new
    return Verdict(name, True)


def _proposals_by_process(trace: Trace) -> dict[ProcessId, dict[int, int]]:
    """First proposal value each process emitted per message."""
    out: dict[ProcessId, dict[int, int]] = {}
    for rec in trace.by_action("send"):
        if rec.detail.get("kind") != "Propose":
            continue
        mine = out.setdefault(rec.process, {})
        mine.setdefault(int(rec.detail["msg"]), int(rec.detail["ts"]))
    return out


def _monitor_distinct_proposals(trace: Trace, sc: Scenario) -> Verdict:
    """A process never proposes equal timestamps for conflicting messages."""
    name = "distinct-conflicting-proposals"
    for pid, props in sorted(_proposals_by_process(trace).items()):
        mids = sorted(props)
        for i, a in enumerate(mids):
            for b in mids[i + 1:]:
                if props[a] == props[b] and _conflicts(sc, a, b):
                    return Verdict(name, False,
                                   f"p{pid} proposed {props[a]} for both "
                                   f"m{a} and m{b}")
    return Verdict(name, True)


def _monitor_group_block_order(trace: Trace, sc: Scenario) -> Verdict:
    """Members of one group run the clock-mutating blocks in the same
    order (crashed members may hold a prefix)."""
    name = "group-block-order"
    logs: dict[ProcessId, list[tuple[str, str]]] = {}
    for rec in trace.by_action("clock_change"):
        if rec.detail["reason"] in ("begin", "advance"):
            logs.setdefault(rec.process, []).append(
                (rec.detail["reason"], rec.detail["trigger"]))
    for gidx, group in enumerate(sc.part.groups):
        members = sorted(group)
        for i, p in enumerate(members):
            for q in members[i + 1:]:
                a, b = logs.get(p, []), logs.get(q, [])
                short = min(len(a), len(b))
                if a[:short] != b[:short]:
                    return Verdict(name, False,
                                   f"group g{gidx}: p{p} and p{q} ran "
                                   f"clock blocks in different orders")
    return Verdict(name, True)


def _monitor_group_proposal_agreement(trace: Trace, sc: Scenario) -> Verdict:
    """All members of a group propose the same value for a message."""
    name = "group-proposal-agreement"
    per_group: dict[tuple[int, int], dict[ProcessId, int]] = {}
    for pid, props in _proposals_by_process(trace).items():
        gidx = sc.part.group_of(pid)
        for mid, ts in props.items():
            per_group.setdefault((gidx, mid), {})[pid] = ts
    for (gidx, mid), values in sorted(per_group.items()):
        if len(set(values.values())) > 1:
            detail = ",".join(f"p{p}:{t}" for p, t in sorted(values.items()))
            return Verdict(name, False,
                           f"group g{gidx} split on m{mid}: {detail}")
    return Verdict(name, True)


def _final_ts(trace: Trace) -> dict[int, int]:
    out: dict[int, int] = {}
    for rec in trace.records:
        if rec.action in ("commit", "gm_deliver"):
            out.setdefault(int(rec.detail["msg"]), int(rec.detail["ts"]))
    return out


def _monitor_final_ts_agreement(trace: Trace) -> Verdict:
    """Everyone that decides or delivers a message uses one timestamp."""
    name = "final-ts-agreement"
    final = _final_ts(trace)
    for rec in trace.records:
        if rec.action in ("commit", "gm_deliver"):
            mid, ts = int(rec.detail["msg"]), int(rec.detail["ts"])
            if final[mid] != ts:
                return Verdict(name, False,
                               f"m{mid} decided as both {final[mid]} and "
                               f"{ts} (p{rec.process}, tick {rec.tick})")
    return Verdict(name, True)


def _monitor_deliver_lower_first(trace: Trace, sc: Scenario) -> Verdict:
    """At delivery time no conflicting lower-pair slot may remain, and every
    conflicting message with a lower final pair addressed to the process is
    already delivered."""
    name = "deliver-lower-first"
    final = _final_ts(trace)
    slots: dict[ProcessId, dict[int, int]] = {}
    done: dict[ProcessId, set[int]] = {}
    for rec in trace.records:
        pid = rec.process
        if rec.action == "send" and rec.detail.get("kind") == "Propose":
            mid = int(rec.detail["msg"])
            if mid in done.get(pid, set()):
                continue  # recovery resend; slots are never resurrected
            slots.setdefault(pid, {}).setdefault(mid, int(rec.detail["ts"]))
        elif rec.action == "commit":
            slots.setdefault(pid, {})[int(rec.detail["msg"])] = \
                int(rec.detail["ts"])
        elif rec.action == "gm_deliver":
            mid, ts = int(rec.detail["msg"]), int(rec.detail["ts"])
            mine = TsPair(mid, ts)
            for oid, ots in slots.get(pid, {}).items():
                if oid == mid:
                    continue
                if _conflicts(sc, mid, oid) and ts_less(TsPair(oid, ots), mine):
                    return Verdict(
                        name, False,
                        f"p{pid} delivered m{mid}@{ts} while m{oid}@{ots} "
                        f"was still undelivered (tick {rec.tick})")
            for oid, ots in final.items():
                if oid == mid or pid not in sc.message_by_id(oid).dest:
                    continue
                if (_conflicts(sc, mid, oid)
                        and ts_less(TsPair(oid, ots), mine)
                        and oid not in done.get(pid, set())):
                    return Verdict(
                        name, False,
                        f"p{pid} delivered m{mid}@{ts} before conflicting "
                        f"lower m{oid}@{ots}")
            slots.get(pid, {}).pop(mid, None)
            done.setdefault(pid, set()).add(mid)
    return Verdict(name, True)


def _monitor_conflict_ts_order(trace: Trace, sc: Scenario) -> Verdict:
    """Delivered conflicting pairs appear in (timestamp, id) order at every
    process."""
    name = "conflict-ts-order"
    per_proc: dict[ProcessId, list[tuple[int, int]]] = {}
    for rec in trace.by_action("gm_deliver"):
        per_proc.setdefault(rec.process, []).append(
            (int(rec.detail["msg"]), int(rec.detail["ts"])))
    for pid, seq in sorted(per_proc.items()):
        for i, (a, ta) in enumerate(seq):
            for b, tb in seq[i + 1:]:
                if _conflicts(sc, a, b) and not ts_less(TsPair(a, ta),
                                                        TsPair(b, tb)):
                    return Verdict(name, False,
                                   f"p{pid} delivered m{a}@{ta} before "
                                   f"m{b}@{tb}")
    return Verdict(name, True)


def run_all_checks(trace: Trace, sc: Scenario) -> list[Verdict]:
    """The full battery: delivery properties plus every monitor."""
    verdicts = [
        check_integrity(trace, sc),
        check_termination(trace, sc),
        check_ordering(trace, sc),
        check_minimality(trace, sc),
    ]
    verdicts.extend(check_invariants(trace, sc))
    return verdicts
