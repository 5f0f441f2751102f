"""Scenario configs: a small sectioned text format, semantic validation,
and seeded generation of scenario families for sweeps.

Format (one ``key = value`` per line, ``#``/``;`` comments)::

    [scenario]
    name = figure2
    algorithm = ft            # base | ft
    seed = 1
    tick_limit = 1000
    kv_check = off

    [processes]
    count = 5

    [groups]                  # optional for base (defaults to singletons)
    g0 = p0
    g1 = p1 p2

    [relation]
    kind = rw-key             # rw-key | all | none | custom
    pairs = m1~m2             # custom only

    [clocks]                  # optional initial clock values
    p1 = 42

    [messages]
    m1 = src=p0 dest=g1+g2 ops=write:x:v1 at=0

    [crashes]                 # ft only
    c1 = p=p0 at=0 after_casts=1

    [latency]
    model = contention        # contention | fixed
    gb_order = strict         # strict | skew
    detector = accurate       # accurate | suspect-all
    suspicion_delay = 2
    recovery = on
    retry_interval = 5

A ``[generate]`` section replaces ``[messages]`` (and friends) with ranges
that are drawn per seed; see the profile functions at the bottom.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from .core import (ALL, NONE, RW_KEY, ConflictRelation, GmcastError,
                   GroupPartition, Message, NotCoverable, Operation, OpKind,
                   ProcessId, make_custom_relation, partition_of)
from .group_comm import GbLatency


class ConfigError(GmcastError):
    """Malformed config text; message carries ``source:line``."""


class ScenarioInvalid(GmcastError):
    """A scenario violates a model invariant; message names it."""


@dataclass(frozen=True)
class MessageSpec:
    msg: Message
    send_tick: int

    @property
    def label(self) -> str:
        return f"m{self.msg.id}"


@dataclass(frozen=True)
class CrashSpec:
    pid: ProcessId
    tick: int
    # Number of group casts the crashing sender completes at `tick` before
    # halting; None means a plain crash at the start of the tick.
    after_casts: Optional[int] = None


@dataclass
class Scenario:
    name: str
    n: int
    algorithm: str                     # base | ft
    part: GroupPartition
    rel: ConflictRelation
    messages: tuple[MessageSpec, ...] = ()
    crashes: tuple[CrashSpec, ...] = ()
    init_clocks: dict[ProcessId, int] = field(default_factory=dict)
    latency: GbLatency = GbLatency()
    gb_order: str = "strict"
    detector: str = "accurate"
    suspicion_delay: int = 2
    recovery: bool = True
    retry_interval: int = 5
    # Base path only: bump and clear the recent-messages set every N begins
    # so it cannot grow without bound. Off by default.
    gc_epoch: Optional[int] = None
    seed: int = 0
    tick_limit: int = 1000
    kv_check: bool = False
    generate: Optional[dict] = None

    def message_by_id(self, mid: int) -> Message:
        for spec in self.messages:
            if spec.msg.id == mid:
                return spec.msg
        raise KeyError(mid)

    def crashed_pids(self) -> set[ProcessId]:
        return {c.pid for c in self.crashes}

    def realize(self, seed: Optional[int] = None) -> "Scenario":
        """Return a concrete, validated scenario for the given seed."""
        use = self.seed if seed is None else seed
        if self.generate is None:
            concrete = replace(self, seed=use)
        else:
            concrete = generate_scenario(self, use)
        validate_scenario(concrete)
        return concrete


def validate_scenario(sc: Scenario) -> None:
    """Raise :class:`ScenarioInvalid` naming the first violated invariant."""
    if sc.generate is not None:
        raise ScenarioInvalid("scenario still carries a generate section")
    if sc.n < 2:
        raise ScenarioInvalid(f"need at least 2 processes, got {sc.n}")
    if sc.algorithm not in ("base", "ft"):
        raise ScenarioInvalid(f"unknown algorithm {sc.algorithm!r}")
    if sc.part.members != frozenset(range(sc.n)):
        raise ScenarioInvalid("groups do not partition the full process set")
    ids = [spec.msg.id for spec in sc.messages]
    if len(ids) != len(set(ids)):
        raise ScenarioInvalid("duplicate message ids")
    for spec in sc.messages:
        m = spec.msg
        if not (0 <= m.src < sc.n):
            raise ScenarioInvalid(f"message {m.id}: unknown source p{m.src}")
        if not m.dest <= frozenset(range(sc.n)):
            raise ScenarioInvalid(f"message {m.id}: destination outside the system")
        if spec.send_tick < 0:
            raise ScenarioInvalid(f"message {m.id}: negative send tick")
    if sc.algorithm == "base":
        if sc.crashes:
            raise ScenarioInvalid("the base algorithm tolerates no crashes; "
                                  "remove the crash schedule or use ft")
    else:
        _validate_ft(sc)
    crash_pids = [c.pid for c in sc.crashes]
    if len(crash_pids) != len(set(crash_pids)):
        raise ScenarioInvalid("a process appears twice in the crash schedule")
    for c in sc.crashes:
        if not (0 <= c.pid < sc.n):
            raise ScenarioInvalid(f"crash names unknown process p{c.pid}")
        if c.tick < 0:
            raise ScenarioInvalid("negative crash tick")
        if c.after_casts is not None:
            sends = [s for s in sc.messages
                     if s.msg.src == c.pid and s.send_tick == c.tick]
            if not sends:
                raise ScenarioInvalid(
                    f"crash of p{c.pid} at {c.tick} has after_casts but "
                    f"p{c.pid} multicasts nothing then")
    for pid, k in sc.init_clocks.items():
        if not (0 <= pid < sc.n):
            raise ScenarioInvalid(f"initial clock for unknown process p{pid}")
        if k < 0:
            raise ScenarioInvalid("negative initial clock")
    if sc.gc_epoch is not None:
        if sc.gc_epoch < 1:
            raise ScenarioInvalid("gc_epoch must be at least 1")
        if sc.algorithm == "ft":
            raise ScenarioInvalid("gc_epoch applies to the base path only")
    if sc.tick_limit < 1:
        raise ScenarioInvalid("tick limit must be positive")


def _validate_ft(sc: Scenario) -> None:
    for spec in sc.messages:
        m = spec.msg
        try:
            partition_of(m.dest, sc.part)
        except NotCoverable as e:
            raise ScenarioInvalid(
                f"message {m.id}: destination is not a union of groups ({e})")
        if len(m.ops) != 1:
            raise ScenarioInvalid(
                f"message {m.id}: the ft path carries exactly one operation")
    if sc.rel.name == "custom":
        raise ScenarioInvalid("the ft path supports rw-key, all or none")
    if sc.rel.name == "rw-key":
        keys = {op.key for spec in sc.messages for op in spec.msg.ops
                if op.kind is not OpKind.NOOP}
        if len(keys) > 1:
            raise ScenarioInvalid(
                f"the ft path under rw-key requires a single key, got "
                f"{sorted(keys)}")
    crashed = sc.crashed_pids()
    for i, g in enumerate(sc.part.groups):
        if not (g - crashed):
            raise ScenarioInvalid(f"every member of group {i} crashes; "
                                  f"each group needs a correct process")
    for i, g in enumerate(sc.part.groups):
        clocks = {sc.init_clocks.get(p, 0) for p in g}
        if len(clocks) > 1:
            raise ScenarioInvalid(
                f"initial clocks differ inside group {i}; members of a "
                f"group must start aligned")


def renumber_by_send_tick(
        messages: list[MessageSpec]) -> tuple[tuple[MessageSpec, ...],
                                              dict[int, int]]:
    """Assign dense ids in (send tick, prior id) order.

    Ids break timestamp ties, so they must not contradict multicast order:
    a late message with a small id would tie a delivered message's final
    timestamp and preempt it, stalling delivery behind its own decision.
    Returns the renumbered specs and the old-to-new id mapping.
    """
    ordered = sorted(messages, key=lambda s: (s.send_tick, s.msg.id))
    mapping = {spec.msg.id: i + 1 for i, spec in enumerate(ordered)}
    renumbered = tuple(
        MessageSpec(replace(spec.msg, id=mapping[spec.msg.id]),
                    spec.send_tick)
        for spec in ordered)
    return renumbered, mapping


# ---------------------------------------------------------------------------
# Config text parsing


def _parse_sections(text: str, source: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if not current:
                raise ConfigError(f"{source}:{lineno}: empty section name")
            sections.setdefault(current, {})
            continue
        if current is None:
            raise ConfigError(f"{source}:{lineno}: entry outside any section")
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in sections[current]:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} in "
                              f"[{current}]")
        sections[current][key] = (value, lineno)
    return sections


def _fail(source: str, lineno: int, why: str) -> ConfigError:
    return ConfigError(f"{source}:{lineno}: {why}")


def _pid(token: str, source: str, lineno: int) -> int:
    if not token.startswith("p") or not token[1:].isdigit():
        raise _fail(source, lineno, f"expected a process name like p0, got {token!r}")
    return int(token[1:])


def _int(value: str, source: str, lineno: int, what: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise _fail(source, lineno, f"{what} must be an integer, got {value!r}")


def _kvpairs(value: str, source: str, lineno: int) -> dict[str, str]:
    out: dict[str, str] = {}
    for token in value.split():
        if "=" not in token:
            raise _fail(source, lineno, f"expected key=value tokens, got {token!r}")
        k, _, v = token.partition("=")
        out[k] = v
    return out


def _parse_op(spec: str, source: str, lineno: int) -> Operation:
    parts = spec.split(":")
    kind = parts[0]
    try:
        if kind == "read" and len(parts) == 2:
            return Operation(OpKind.READ, parts[1])
        if kind == "write" and len(parts) == 3:
            return Operation(OpKind.WRITE, parts[1], (parts[2],))
        if kind == "cas" and len(parts) == 4:
            return Operation(OpKind.CAS, parts[1], (parts[2], parts[3]))
        if kind == "noop" and len(parts) == 1:
            return Operation(OpKind.NOOP)
    except ValueError as e:
        raise _fail(source, lineno, str(e))
    raise _fail(source, lineno,
                f"bad operation {spec!r} (read:k, write:k:v, cas:k:u:v, noop)")


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), source=str(path),
                          default_name=path.stem)


def parse_scenario(text: str, source: str = "<config>",
                   default_name: str = "scenario") -> Scenario:
    """Parse config text into a (possibly generator-backed) scenario."""
    sections = _parse_sections(text, source)

    def get(section: str, key: str, default: Optional[str] = None
            ) -> tuple[Optional[str], int]:
        entry = sections.get(section, {}).get(key)
        if entry is None:
            return default, 0
        return entry

    def get_int(section: str, key: str, default: str) -> int:
        value, ln = get(section, key, default)
        return _int(value, source, ln, key)

    name = get("scenario", "name", default_name)[0] or default_name
    algorithm, ln = get("scenario", "algorithm", "base")
    if algorithm not in ("base", "ft"):
        raise _fail(source, ln, f"algorithm must be base or ft, got {algorithm!r}")
    seed = get_int("scenario", "seed", "0")
    tick_limit = get_int("scenario", "tick_limit", "1000")
    kv_check = _onoff(get("scenario", "kv_check", "off"), source, "kv_check")

    gen = None
    if "generate" in sections:
        if "messages" in sections:
            raise ConfigError(f"{source}: [generate] and [messages] are "
                              f"mutually exclusive")
        gen = {k: v for k, (v, _) in sections["generate"].items()}

    if "processes" not in sections and gen is None:
        raise ConfigError(f"{source}: missing [processes] section")
    count = get_int("processes", "count", "0") if "processes" in sections else 0

    # Groups: order of appearance defines the group index.
    group_names: dict[str, int] = {}
    groups: list[frozenset[int]] = []
    if "groups" in sections:
        for label, (value, ln) in sections["groups"].items():
            members = frozenset(_pid(tok, source, ln) for tok in value.split())
            if not members:
                raise _fail(source, ln, f"group {label!r} has no members")
            for p in members:
                if count and not (0 <= p < count):
                    raise _fail(source, ln, f"group {label!r} names unknown "
                                            f"process p{p}")
            group_names[label] = len(groups)
            groups.append(members)
    elif count:
        groups = [frozenset({p}) for p in range(count)]
        group_names = {f"g{p}": p for p in range(count)}
    try:
        part = GroupPartition(tuple(groups)) if groups else GroupPartition(
            (frozenset({0}),))
    except ValueError as e:
        lines = [ln for _, ln in sections.get("groups", {}).values()]
        raise _fail(source, min(lines, default=0), str(e))

    rel_kind, rel_ln = get("relation", "kind", "rw-key")
    if rel_kind not in ("rw-key", "all", "none", "custom"):
        raise _fail(source, rel_ln, f"unknown relation kind {rel_kind!r}")

    # Messages: ids are assigned densely in order of appearance.
    label_to_id: dict[str, int] = {}
    messages: list[MessageSpec] = []
    for label, (value, ln) in sections.get("messages", {}).items():
        kv = _kvpairs(value, source, ln)
        for req in ("src", "dest", "ops", "at"):
            if req not in kv:
                raise _fail(source, ln, f"message {label!r} is missing {req}=")
        src = _pid(kv["src"], source, ln)
        dest: set[int] = set()
        for tok in kv["dest"].replace("+", ",").split(","):
            tok = tok.strip()
            if not tok:
                continue
            if tok in group_names:
                dest |= part.groups[group_names[tok]]
            else:
                dest.add(_pid(tok, source, ln))
        ops = tuple(_parse_op(o, source, ln) for o in kv["ops"].split("+"))
        mid = len(messages) + 1
        label_to_id[label] = mid
        try:
            msg = Message(mid, src, frozenset(dest), ops)
        except ValueError as e:
            raise _fail(source, ln, str(e))
        messages.append(MessageSpec(msg, _int(kv["at"], source, ln, "at")))

    renumbered, id_map = renumber_by_send_tick(messages)
    messages = list(renumbered)
    label_to_id = {label: id_map[old] for label, old in label_to_id.items()}

    if rel_kind == "custom":
        pairs_raw, pln = get("relation", "pairs", "")
        pairs = []
        for tok in (pairs_raw or "").split():
            if "~" not in tok:
                raise _fail(source, pln, f"custom pair {tok!r} must look like m1~m2")
            a, _, b = tok.partition("~")
            for lbl in (a, b):
                if lbl not in label_to_id:
                    raise _fail(source, pln, f"custom pair names unknown "
                                             f"message {lbl!r}")
            pairs.append((label_to_id[a], label_to_id[b]))
        try:
            rel = make_custom_relation(
                pairs, {s.msg.id: s.msg for s in messages})
        except ValueError as e:
            raise _fail(source, pln, str(e))
    else:
        rel = {"rw-key": RW_KEY, "all": ALL, "none": NONE}[rel_kind]

    init_clocks: dict[int, int] = {}
    for label, (value, ln) in sections.get("clocks", {}).items():
        init_clocks[_pid(label, source, ln)] = _int(value, source, ln, "clock")

    crashes: list[CrashSpec] = []
    for label, (value, ln) in sections.get("crashes", {}).items():
        kv = _kvpairs(value, source, ln)
        if "p" not in kv or "at" not in kv:
            raise _fail(source, ln, f"crash {label!r} needs p= and at=")
        after = (None if "after_casts" not in kv
                 else _int(kv["after_casts"], source, ln, "after_casts"))
        crashes.append(CrashSpec(_pid(kv["p"], source, ln),
                                 _int(kv["at"], source, ln, "at"), after))

    model, mln = get("latency", "model", "contention")
    if model not in ("contention", "fixed"):
        raise _fail(source, mln, f"unknown latency model {model!r}")
    gb_order, oln = get("latency", "gb_order", "strict")
    if gb_order not in ("strict", "skew"):
        raise _fail(source, oln, f"unknown gb_order {gb_order!r}")
    detector, dln = get("latency", "detector", "accurate")
    if detector not in ("accurate", "suspect-all"):
        raise _fail(source, dln, f"unknown detector {detector!r}")

    gc_epoch = get_int("latency", "gc_epoch", "0") or None

    return Scenario(
        name=name, n=count, algorithm=algorithm, part=part, rel=rel,
        messages=tuple(messages), crashes=tuple(crashes),
        init_clocks=init_clocks,
        latency=GbLatency(model, get_int("latency", "fixed_cost", "2")),
        gb_order=gb_order, detector=detector,
        suspicion_delay=get_int("latency", "suspicion_delay", "2"),
        recovery=_onoff(get("latency", "recovery", "on"), source, "recovery"),
        retry_interval=get_int("latency", "retry_interval", "5"),
        gc_epoch=gc_epoch,
        seed=seed, tick_limit=tick_limit, kv_check=kv_check, generate=gen)


def _onoff(entry: tuple[Optional[str], int], source: str, what: str) -> bool:
    value, ln = entry
    if value in ("on", "true", "yes"):
        return True
    if value in ("off", "false", "no"):
        return False
    raise _fail(source, ln, f"{what} must be on or off, got {value!r}")


def bundled_path(name: str) -> Path:
    """Path of a scenario config shipped with the package."""
    return Path(str(resources.files("gmcast").joinpath("data", name)))


# ---------------------------------------------------------------------------
# Seeded generation


def _span(raw: Optional[str], default: tuple[int, int]) -> tuple[int, int]:
    if raw is None:
        return default
    if ".." in raw:
        lo, _, hi = raw.partition("..")
        return int(lo), int(hi)
    return int(raw), int(raw)


def _draw(rng: random.Random, span: tuple[int, int]) -> int:
    return rng.randint(span[0], span[1])


def generate_scenario(template: Scenario, seed: int) -> Scenario:
    """Draw a concrete scenario from a template's [generate] ranges."""
    gen = template.generate or {}
    profile = gen.get("profile", "conflict-free")
    rng = random.Random(seed)
    builders = {
        "conflict-free": _gen_conflict_free,
        "collision-free": _gen_collision_free,
        "contended": _gen_contended,
        "crash-recovery": _gen_crash_recovery,
        "strictness": _gen_strictness,
        "degenerate": _gen_degenerate,
        "random": _gen_random,
    }
    if profile not in builders:
        raise ScenarioInvalid(f"unknown generate profile {profile!r}")
    sc = builders[profile](template, gen, rng)
    if sc.rel.name != "custom":  # custom builders renumber before pairing
        sc = replace(sc, messages=renumber_by_send_tick(list(sc.messages))[0])
    return replace(sc, seed=seed, generate=None,
                   name=f"{template.name}[seed={seed}]")


def _make_groups(rng: random.Random, gen: dict) -> GroupPartition:
    n_groups = _draw(rng, _span(gen.get("groups"), (2, 4)))
    sizes = [_draw(rng, _span(gen.get("group_size"), (2, 3)))
             for _ in range(n_groups)]
    groups, start = [], 0
    for size in sizes:
        groups.append(frozenset(range(start, start + size)))
        start += size
    return GroupPartition(tuple(groups))


def _ft_skeleton(template: Scenario, gen: dict, rng: random.Random,
                 rel: ConflictRelation) -> tuple[Scenario, GroupPartition]:
    part = _make_groups(rng, gen)
    n = len(part.members)
    sc = replace(template, n=n, algorithm="ft", part=part, rel=rel,
                 messages=(), crashes=(), init_clocks={}, generate=None)
    return sc, part

def _group_union_dest(rng: random.Random, part: GroupPartition) -> frozenset[int]:
    count = rng.randint(1, len(part.groups))
    chosen = rng.sample(range(len(part.groups)), count)
    return frozenset().union(*(part.groups[i] for i in chosen))


def _gen_conflict_free(template: Scenario, gen: dict,
                       rng: random.Random) -> Scenario:
    """Read-only traffic: nothing conflicts, so delivery is never delayed."""
    algorithm = gen.get("algorithm", template.algorithm)
    key = gen.get("key", "x")
    window = _span(gen.get("send_window"), (0, 6))
    n_msgs = _draw(rng, _span(gen.get("messages"), (1, 8)))
    if algorithm == "ft":
        sc, part = _ft_skeleton(template, gen, rng, RW_KEY)
        dests = [_group_union_dest(rng, part) for _ in range(n_msgs)]
    else:
        n = _draw(rng, _span(gen.get("processes"), (3, 6)))
        part = GroupPartition(tuple(frozenset({p}) for p in range(n)))
        sc = replace(template, n=n, algorithm="base", part=part, rel=RW_KEY,
                     messages=(), crashes=(), init_clocks={}, generate=None)
        dests = [frozenset(rng.sample(range(n), rng.randint(1, n)))
                 for _ in range(n_msgs)]
    messages = []
    for i, dest in enumerate(dests, start=1):
        src = rng.randrange(sc.n)
        msg = Message(i, src, dest, (Operation(OpKind.READ, key),))
        messages.append(MessageSpec(msg, _draw(rng, window)))
    return replace(sc, messages=tuple(messages))


def _gen_collision_free(template: Scenario, gen: dict,
                        rng: random.Random) -> Scenario:
    """Sequential traffic: each message is fully delivered before the next
    is multicast, so conflicts exist but collisions do not."""
    algorithm = gen.get("algorithm", template.algorithm)
    key = gen.get("key", "x")
    gap = _span(gen.get("gap"), (13, 18))
    n_msgs = _draw(rng, _span(gen.get("messages"), (1, 6)))
    if algorithm == "ft":
        sc, part = _ft_skeleton(template, gen, rng, RW_KEY)
        dests = [_group_union_dest(rng, part) for _ in range(n_msgs)]
    else:
        n = _draw(rng, _span(gen.get("processes"), (3, 6)))
        part = GroupPartition(tuple(frozenset({p}) for p in range(n)))
        sc = replace(template, n=n, algorithm="base", part=part, rel=RW_KEY,
                     messages=(), crashes=(), init_clocks={}, generate=None)
        dests = [frozenset(rng.sample(range(n), rng.randint(1, n)))
                 for _ in range(n_msgs)]
    messages, tick = [], 0
    for i, dest in enumerate(dests, start=1):
        src = rng.randrange(sc.n)
        op = (Operation(OpKind.WRITE, key, (f"v{i}",)) if rng.random() < 0.7
              else Operation(OpKind.READ, key))
        messages.append(MessageSpec(Message(i, src, dest, (op,)), tick))
        tick += _draw(rng, gap)
    return replace(sc, messages=tuple(messages))


def _gen_contended(template: Scenario, gen: dict,
                   rng: random.Random) -> Scenario:
    """Concurrent conflicting traffic: writes to one key in a tight window,
    every destination sharing at least one group (or process)."""
    algorithm = gen.get("algorithm", template.algorithm)
    key = gen.get("key", "x")
    window = _span(gen.get("send_window"), (0, 4))
    n_msgs = _draw(rng, _span(gen.get("messages"), (2, 6)))
    if algorithm == "ft":
        sc, part = _ft_skeleton(template, gen, rng, RW_KEY)
        shared = rng.randrange(len(part.groups))
        dests = []
        for _ in range(n_msgs):
            extra = [i for i in range(len(part.groups))
                     if i != shared and rng.random() < 0.4]
            dests.append(frozenset().union(part.groups[shared],
                                           *(part.groups[i] for i in extra)))
    else:
        n = _draw(rng, _span(gen.get("processes"), (3, 6)))
        part = GroupPartition(tuple(frozenset({p}) for p in range(n)))
        sc = replace(template, n=n, algorithm="base", part=part, rel=RW_KEY,
                     messages=(), crashes=(), init_clocks={}, generate=None)
        shared = rng.randrange(n)
        dests = [frozenset({shared}) | frozenset(
            p for p in range(n) if rng.random() < 0.5) for _ in range(n_msgs)]
    messages = []
    for i, dest in enumerate(dests, start=1):
        src = rng.randrange(sc.n)
        op = (Operation(OpKind.WRITE, key, (f"v{i}",)) if rng.random() < 0.8
              else Operation(OpKind.READ, key))
        messages.append(MessageSpec(Message(i, src, dest, (op,)),
                                    _draw(rng, window)))
    return replace(sc, messages=tuple(messages))


def _gen_crash_recovery(template: Scenario, gen: dict,
                        rng: random.Random) -> Scenario:
    """A sender crashes partway through disseminating one message; its own
    group keeps a correct buddy so the partition stays serviceable."""
    sc, part = _ft_skeleton(template, gen, rng, RW_KEY)
    key = gen.get("key", "x")
    sender_group = rng.randrange(len(part.groups))
    sender = min(part.groups[sender_group])
    others = [i for i in range(len(part.groups)) if i != sender_group]
    dest_groups = rng.sample(others, min(2, len(others)))
    dest = frozenset().union(*(part.groups[i] for i in dest_groups))
    pos_raw = gen.get("crash_position", "random")
    position = (rng.randint(0, len(dest_groups))
                if pos_raw == "random" else int(pos_raw))
    msg = Message(1, sender, dest, (Operation(OpKind.WRITE, key, ("v1",)),))
    messages = [MessageSpec(msg, 0)]
    for i in range(2, 2 + _draw(rng, _span(gen.get("extra_messages"), (0, 2)))):
        src = rng.choice(sorted(frozenset(range(sc.n)) - {sender}))
        messages.append(MessageSpec(
            Message(i, src, _group_union_dest(rng, part),
                    (Operation(OpKind.READ, key),)),
            _draw(rng, (0, 4))))
    crashes = (CrashSpec(sender, 0, after_casts=position),)
    return replace(sc, messages=tuple(messages), crashes=crashes)


def _gen_strictness(template: Scenario, gen: dict,
                    rng: random.Random) -> Scenario:
    """Two concurrent reads addressed to a fast and a slow group. The slow
    group's clock push unlocks both at once, so skewed members emit them in
    opposite orders (read-only on purpose: the skew policy is only safe
    without conflict bumps)."""
    rel = {"rw-key": RW_KEY, "all": ALL, "none": NONE}[
        gen.get("relation", "rw-key")]
    gen = dict(gen)
    gen.setdefault("groups", "2")
    sc, part = _ft_skeleton(template, gen, rng, rel)
    key = gen.get("key", "x")
    dest = frozenset().union(*part.groups)
    fast = rng.randint(5, 9)
    init_clocks = {p: fast for p in part.groups[0]}
    tick = _draw(rng, _span(gen.get("send_window"), (0, 3)))
    messages = []
    for i in (1, 2):
        src = rng.randrange(sc.n)
        messages.append(MessageSpec(
            Message(i, src, dest, (Operation(OpKind.READ, key),)), tick))
    return replace(sc, messages=tuple(messages), gb_order="skew",
                   init_clocks=init_clocks)


def _gen_degenerate(template: Scenario, gen: dict,
                    rng: random.Random) -> Scenario:
    """Base-path traffic under the all / none relations, multiple keys."""
    rel = {"all": ALL, "none": NONE}[gen.get("relation", "all")]
    n = _draw(rng, _span(gen.get("processes"), (3, 5)))
    part = GroupPartition(tuple(frozenset({p}) for p in range(n)))
    n_msgs = _draw(rng, _span(gen.get("messages"), (2, 5)))
    window = _span(gen.get("send_window"), (0, 4))
    messages = []
    for i in range(1, n_msgs + 1):
        dest = frozenset(rng.sample(range(n), rng.randint(2, n)))
        op = Operation(OpKind.WRITE, f"k{rng.randint(1, 3)}", (f"v{i}",))
        messages.append(MessageSpec(
            Message(i, rng.randrange(n), dest, (op,)), _draw(rng, window)))
    return replace(template, n=n, algorithm="base", part=part, rel=rel,
                   messages=tuple(messages), crashes=(), init_clocks={},
                   generate=None)


def _gen_random(template: Scenario, gen: dict, rng: random.Random) -> Scenario:
    """Mixed-everything scenarios for safety sweeps: either algorithm, any
    built-in relation, crashes on the ft path."""
    algorithm = gen.get("algorithm") or rng.choice(["base", "ft"])
    sub = dict(gen)
    sub["algorithm"] = algorithm
    if algorithm == "ft":
        rel_name = rng.choice(["rw-key", "all", "none"])
        profile = rng.choice(["conflict-free", "contended", "collision-free"])
        built = {"conflict-free": _gen_conflict_free,
                 "contended": _gen_contended,
                 "collision-free": _gen_collision_free}[profile](
                     template, sub, rng)
        built = replace(built, rel={"rw-key": RW_KEY, "all": ALL,
                                    "none": NONE}[rel_name])
        if rng.random() < 0.4 and built.messages:
            built = _inject_crash(built, rng)
        return built
    rel_name = rng.choice(["rw-key", "all", "none", "custom"])
    n = _draw(rng, _span(gen.get("processes"), (3, 6)))
    part = GroupPartition(tuple(frozenset({p}) for p in range(n)))
    n_msgs = _draw(rng, _span(gen.get("messages"), (1, 6)))
    messages = []
    for i in range(1, n_msgs + 1):
        dest = frozenset(rng.sample(range(n), rng.randint(1, n)))
        ops = []
        for _ in range(rng.randint(1, 2)):
            kind = rng.choice([OpKind.READ, OpKind.WRITE, OpKind.CAS, OpKind.NOOP])
            k = f"k{rng.randint(1, 2)}"
            if kind is OpKind.READ:
                ops.append(Operation(kind, k))
            elif kind is OpKind.WRITE:
                ops.append(Operation(kind, k, (f"v{i}",)))
            elif kind is OpKind.CAS:
                ops.append(Operation(kind, k, (f"u{i}", f"v{i}")))
            else:
                ops.append(Operation(OpKind.NOOP))
        messages.append(MessageSpec(
            Message(i, rng.randrange(n), dest, tuple(ops)),
            rng.randint(0, 5)))
    messages = list(renumber_by_send_tick(messages)[0])
    if rel_name == "custom":
        by_id = {s.msg.id: s.msg for s in messages}
        pairs = []
        for a in range(1, n_msgs + 1):
            for b in range(a + 1, n_msgs + 1):
                if by_id[a].dest & by_id[b].dest and rng.random() < 0.5:
                    pairs.append((a, b))
        rel = make_custom_relation(pairs, by_id)
    else:
        rel = {"rw-key": RW_KEY, "all": ALL, "none": NONE}[rel_name]
    return replace(template, n=n, algorithm="base", part=part, rel=rel,
                   messages=tuple(messages), crashes=(), init_clocks={},
                   generate=None)


def _inject_crash(sc: Scenario, rng: random.Random) -> Scenario:
    """Crash one message's sender mid-send if the partition allows it."""
    spec = rng.choice(sc.messages)
    sender = spec.msg.src
    group = sc.part.groups[sc.part.group_of(sender)]
    if len(group - {sender}) == 0:
        return sc
    n_casts = len(partition_of(spec.msg.dest, sc.part))
    crash = CrashSpec(sender, spec.send_tick,
                      after_casts=rng.randint(0, n_casts))
    return replace(sc, crashes=(crash,))
