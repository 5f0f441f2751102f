"""Domain types shared by every module: operations, messages, conflict
relations, timestamp ordering, and the partition of processes into groups.

Everything here is an immutable value; instances are safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Union


class GmcastError(Exception):
    """Base class for all errors raised by this package."""


class NotCoverable(GmcastError):
    """A destination set is not a union of whole groups."""


# Dense 0-based index, stable for a whole run.
ProcessId = int


class OpKind(str, Enum):
    READ = "read"
    WRITE = "write"
    CAS = "cas"
    NOOP = "noop"


@dataclass(frozen=True)
class Operation:
    """A key-value store operation carried by a message."""

    kind: OpKind
    key: str = ""
    args: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is OpKind.READ and self.args:
            raise ValueError("read carries no value")
        if self.kind is OpKind.WRITE and len(self.args) != 1:
            raise ValueError("write carries exactly one value")
        if self.kind is OpKind.CAS and len(self.args) != 2:
            raise ValueError("cas carries exactly an expected and a new value")
        if self.kind is OpKind.NOOP and (self.key or self.args):
            raise ValueError("noop carries nothing")

    @property
    def is_read(self) -> bool:
        return self.kind is OpKind.READ


@dataclass(frozen=True)
class Message:
    """A multicast payload: unique id, source, destination set, operations."""

    id: int
    src: ProcessId
    dest: frozenset[ProcessId]
    ops: tuple[Operation, ...]

    def __post_init__(self) -> None:
        if not self.dest:
            raise ValueError(f"message {self.id}: empty destination set")
        if not self.ops:
            raise ValueError(f"message {self.id}: empty operation list")


@dataclass(frozen=True, order=False)
class TsPair:
    """A (message id, timestamp) pair, ordered lexicographically on (ts, id)."""

    msg_id: int
    ts: int


def ts_less(a: TsPair, b: TsPair) -> bool:
    """Strict total order on timestamp pairs: by timestamp, ties by id."""
    if a.msg_id == b.msg_id:
        raise ValueError("ts_less is only defined on distinct messages")
    return (a.ts, a.msg_id) < (b.ts, b.msg_id)


def conflict_rw(c: Operation, d: Operation) -> bool:
    """Read/write conflict on a key: same key and not both reads.

    cas counts as a non-read (it both reads and writes); noop conflicts
    with nothing.
    """
    if c.kind is OpKind.NOOP or d.kind is OpKind.NOOP:
        return False
    return c.key == d.key and not (c.is_read and d.is_read)


@dataclass(frozen=True)
class ConflictRelation:
    """Symmetric, irreflexive predicate over messages.

    Built-ins: ``rw-key`` (some operation pair conflicts under
    :func:`conflict_rw` and the destinations intersect), ``all``
    (destinations intersect), ``none`` (never). ``custom`` takes an
    explicit pair list; :func:`make_custom_relation` validates it.
    """

    name: str
    pairs: frozenset[tuple[int, int]] = frozenset()

    def conflicts(self, m: Message, m2: Message) -> bool:
        return conflict_msg(m, m2, self)


RW_KEY = ConflictRelation("rw-key")
ALL = ConflictRelation("all")
NONE = ConflictRelation("none")


def conflict_msg(m: Message, m2: Message, rel: ConflictRelation) -> bool:
    """Evaluate the conflict relation on two distinct messages."""
    if m.id == m2.id:
        raise ValueError("conflict relation is irreflexive; got identical ids")
    if rel.name == "none":
        return False
    if rel.name == "all":
        return bool(m.dest & m2.dest)
    if rel.name == "rw-key":
        if not (m.dest & m2.dest):
            return False
        return any(conflict_rw(c, d) for c in m.ops for d in m2.ops)
    if rel.name == "custom":
        return (m.id, m2.id) in rel.pairs
    raise ValueError(f"unknown conflict relation {rel.name!r}")


def make_custom_relation(pairs: Iterable[tuple[int, int]],
                         messages: dict[int, Message]) -> ConflictRelation:
    """Build a custom relation from message-id pairs, validating that it is
    irreflexive, symmetric (closure taken automatically) and that every
    conflicting pair shares a destination."""
    closed: set[tuple[int, int]] = set()
    for a, b in pairs:
        if a == b:
            raise ValueError(f"custom relation must be irreflexive; got {a}~{a}")
        for x in (a, b):
            if x not in messages:
                raise ValueError(f"custom relation names unknown message {x}")
        if not (messages[a].dest & messages[b].dest):
            raise ValueError(
                f"custom relation pair {a}~{b} has disjoint destinations")
        closed.add((a, b))
        closed.add((b, a))
    return ConflictRelation("custom", frozenset(closed))


# Payloads of the per-group broadcast: start processing a message, or push
# the group clock forward.

@dataclass(frozen=True)
class Begin:
    msg: Message


@dataclass(frozen=True)
class Advance:
    ts: int


GroupPayload = Union[Begin, Advance]


def gb_conflict(x: GroupPayload, y: GroupPayload, rel: ConflictRelation) -> bool:
    """Conflict relation used inside a group's broadcast: clock pushes
    conflict with everything; Begin wrappers conflict iff their messages do.

    Two Begin instances wrapping the same message (recovery duplicates) do
    not conflict, since the underlying relation is irreflexive.
    """
    if isinstance(x, Advance) or isinstance(y, Advance):
        return True
    if x.msg.id == y.msg.id:
        return False
    return conflict_msg(x.msg, y.msg, rel)


@dataclass(frozen=True)
class GroupPartition:
    """Partition of the process set into disjoint, non-empty groups."""

    groups: tuple[frozenset[ProcessId], ...]

    def __post_init__(self) -> None:
        seen: set[ProcessId] = set()
        for i, g in enumerate(self.groups):
            if not g:
                raise ValueError(f"group {i} is empty")
            if seen & g:
                raise ValueError(f"group {i} overlaps an earlier group")
            seen |= g

    @property
    def members(self) -> frozenset[ProcessId]:
        return frozenset().union(*self.groups)

    def group_of(self, p: ProcessId) -> int:
        for i, g in enumerate(self.groups):
            if p in g:
                return i
        raise KeyError(f"process {p} is in no group")


def partition_of(dest: frozenset[ProcessId],
                 part: GroupPartition) -> frozenset[int]:
    """Return the unique set of group indices whose union is exactly `dest`."""
    indices: set[int] = set()
    for p in dest:
        try:
            indices.add(part.group_of(p))
        except KeyError:
            raise NotCoverable(f"process {p} is in no group") from None
    covered = frozenset().union(*(part.groups[i] for i in indices))
    if covered != dest:
        raise NotCoverable(
            f"destination {sorted(dest)} splits groups "
            f"{sorted(sorted(part.groups[i]) for i in indices)}")
    return frozenset(indices)
