"""Replicated key-value store demo: replicas apply operations in their
local delivery order; convergence is checked per key across replicas.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import Operation, OpKind, ProcessId
from .checker import Verdict
from .scenario import Scenario
from .simnet import Trace

# Reads of absent keys return this distinguished empty value.
EMPTY = None


@dataclass
class Store:
    """One replica's state plus its ordered application log."""

    data: dict[str, str] = field(default_factory=dict)
    applied: list[tuple[int, Operation, object]] = field(default_factory=list)

    def apply(self, op: Operation, msg_id: int = -1) -> object:
        result = apply(self, op)
        self.applied.append((msg_id, op, result))
        return result


def apply(store: Store, op: Operation) -> object:
    """Execute one operation; returns read value, previous value, or the
    compare-and-swap success flag."""
    if op.kind is OpKind.READ:
        return store.data.get(op.key, EMPTY)
    if op.kind is OpKind.WRITE:
        previous = store.data.get(op.key, EMPTY)
        store.data[op.key] = op.args[0]
        return previous
    if op.kind is OpKind.CAS:
        expected, new = op.args
        if store.data.get(op.key, EMPTY) == expected:
            store.data[op.key] = new
            return True
        return False
    return EMPTY  # noop


def replay_stores(trace: Trace, sc: Scenario) -> dict[ProcessId, Store]:
    """Feed every replica its own delivery order from the trace."""
    stores: dict[ProcessId, Store] = {}
    for rec in trace.by_action("gm_deliver"):
        store = stores.setdefault(rec.process, Store())
        msg = sc.message_by_id(int(rec.detail["msg"]))
        for op in msg.ops:
            store.apply(op, msg.id)
    return stores


def check_convergence(trace: Trace, sc: Scenario) -> Verdict:
    """Replicas that hold a key agree on its final value and apply the
    key's updates in one order; read placement may differ."""
    name = "kv-convergence"
    stores = replay_stores(trace, sc)
    keys = {op.key for spec in sc.messages for op in spec.msg.ops
            if op.kind is not OpKind.NOOP}
    for key in sorted(keys):
        holders = [p for p, s in sorted(stores.items())
                   if any(op.key == key for _, op, _ in s.applied)]
        if not holders:
            continue
        finals = {p: stores[p].data.get(key, EMPTY) for p in holders}
        if len(set(finals.values())) > 1:
            detail = ",".join(f"p{p}:{v if v is not None else '-'}"
                              for p, v in finals.items())
            return Verdict(name, False, f"key {key} diverged: {detail}")
        updates = {p: tuple(mid for mid, op, _ in stores[p].applied
                            if op.key == key and op.kind is not OpKind.READ)
                   for p in holders}
        if len(set(updates.values())) > 1:
            return Verdict(name, False,
                           f"key {key}: update orders differ across replicas")
    return Verdict(name, True)
