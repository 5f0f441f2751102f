"""Run reports: per-message latency, run classification, property verdicts,
and the optional matplotlib figures rendered next to the delimited output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .checker import Verdict, exempt_messages, run_all_checks
from .kvstore import check_convergence
from .scenario import Scenario
from .simnet import (NotDelivered, Trace, commit_latency, delivery_latency)
from .core import conflict_msg

CONFLICT_FREE = "conflict-free"
COLLISION_FREE = "collision-free"
CONTENDED = "contended"


def classify_run(trace: Trace, sc: Scenario) -> str:
    """Conflict-free when no delivered pair conflicts; collision-free when
    no two messages with a common destination are concurrent; contended
    otherwise. A run in both classes reports the stronger one."""
    delivered = sorted({int(r.detail["msg"])
                        for r in trace.by_action("gm_deliver")})
    conflict_free = True
    for i, a in enumerate(delivered):
        for b in delivered[i + 1:]:
            if conflict_msg(sc.message_by_id(a), sc.message_by_id(b), sc.rel):
                conflict_free = False
    if conflict_free:
        return CONFLICT_FREE
    sent = trace.multicasts()
    last_deliver: dict[int, int] = {}
    for rec in trace.by_action("gm_deliver"):
        mid = int(rec.detail["msg"])
        last_deliver[mid] = max(last_deliver.get(mid, -1), rec.tick)
    mids = sorted(sent)
    for i, a in enumerate(mids):
        for b in mids[i + 1:]:
            if not (sc.message_by_id(a).dest & sc.message_by_id(b).dest):
                continue
            a_first = a in last_deliver and last_deliver[a] < sent[b].tick
            b_first = b in last_deliver and last_deliver[b] < sent[a].tick
            if not a_first and not b_first:
                return CONTENDED
    return COLLISION_FREE


@dataclass
class RunReport:
    """Everything one simulation run reports."""

    scenario: str
    classification: str
    latencies: dict[int, Optional[int]]          # msg id -> ticks, None if exempt
    commit_latencies: dict[int, Optional[int]] = field(default_factory=dict)
    verdicts: list[Verdict] = field(default_factory=list)
    assert_latency: Optional[int] = None
    notes: list[str] = field(default_factory=list)

    @property
    def max_latency(self) -> Optional[int]:
        values = [v for v in self.latencies.values() if v is not None]
        return max(values) if values else None

    @property
    def ok(self) -> bool:
        if any(not v.passed for v in self.verdicts):
            return False
        if self.assert_latency is not None:
            if any(v is not None and v > self.assert_latency
                   for v in self.latencies.values()):
                return False
        return True

    @property
    def exit_status(self) -> int:
        return 0 if self.ok else 1

    def to_text(self) -> str:
        lines = [f"scenario\t{self.scenario}",
                 f"class\t{self.classification}"]
        for mid in sorted(self.latencies):
            lat = self.latencies[mid]
            commit = self.commit_latencies.get(mid)
            lines.append(
                f"latency\tm{mid}\t{lat if lat is not None else '-'}"
                f"\t{commit if commit is not None else '-'}")
        for v in self.verdicts:
            lines.append(f"verdict\t{v.line()}")
        if self.assert_latency is not None:
            held = self.max_latency is None or \
                self.max_latency <= self.assert_latency
            lines.append(f"assert-latency\t{self.assert_latency}"
                         f"\t{'PASS' if held else 'FAIL'}")
        for note in self.notes:
            lines.append(f"note\t{note}")
        lines.append(f"result\t{'PASS' if self.ok else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "class": self.classification,
            "latency": {f"m{k}": v for k, v in sorted(self.latencies.items())},
            "commit": {f"m{k}": v
                       for k, v in sorted(self.commit_latencies.items())},
            "delivered": sum(1 for v in self.latencies.values()
                             if v is not None),
            "violations": [v.name for v in self.verdicts if not v.passed],
        }


def build_report(trace: Trace, sc: Scenario,
                 assert_latency: Optional[int] = None) -> RunReport:
    """Run every check and latency measurement over one finished trace."""
    verdicts = run_all_checks(trace, sc)
    if sc.kv_check:
        verdicts.append(check_convergence(trace, sc))
    exempt = exempt_messages(trace, sc)
    latencies: dict[int, Optional[int]] = {}
    commits: dict[int, Optional[int]] = {}
    notes: list[str] = []
    for spec in sc.messages:
        mid = spec.msg.id
        if mid in exempt:
            latencies[mid] = None
            commits[mid] = None
            notes.append(f"m{mid} exempt: faulty sender, never begun")
            continue
        try:
            latencies[mid] = delivery_latency(trace, mid)
        except NotDelivered as e:
            latencies[mid] = None
            verdicts.append(Verdict("delivery", False, str(e)))
        try:
            commits[mid] = commit_latency(trace, mid)
        except NotDelivered:
            commits[mid] = None
    return RunReport(scenario=sc.name,
                     classification=classify_run(trace, sc),
                     latencies=latencies, commit_latencies=commits,
                     verdicts=verdicts, assert_latency=assert_latency,
                     notes=notes)


# ---------------------------------------------------------------------------
# Figures


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_run_figure(trace: Trace, sc: Scenario, path: str | Path) -> Path:
    """Space-time diagram of one run: processes on the y axis, ticks on the
    x axis, sends as arrows, deliveries as dots, crashes as crosses."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(9, 0.9 * sc.n + 1.5))
    last_tick = max((r.tick for r in trace.records), default=0)
    for p in range(sc.n):
        ax.axhline(p, color="0.85", lw=0.8, zorder=0)
    for rec in trace.records:
        if rec.action == "send":
            to = int(rec.detail["to"].lstrip("p"))
            ax.annotate("", xy=(rec.tick + 1, to),
                        xytext=(rec.tick, rec.process),
                        arrowprops=dict(arrowstyle="->", color="0.5", lw=0.7))
        elif rec.action == "gb_cast":
            ax.plot(rec.tick, rec.process, marker="s", ms=4,
                    color="tab:blue", zorder=3)
        elif rec.action == "gb_deliver":
            ax.plot(rec.tick, rec.process, marker="s", ms=4, mfc="white",
                    color="tab:blue", zorder=3)
        elif rec.action == "gm_deliver":
            ax.plot(rec.tick, rec.process, marker="o", ms=7,
                    color="tab:green", zorder=4)
            ax.annotate(f"m{rec.detail['msg']}",
                        (rec.tick, rec.process),
                        textcoords="offset points", xytext=(4, 6),
                        fontsize=8, color="tab:green")
        elif rec.action == "crash":
            ax.plot(rec.tick, rec.process, marker="x", ms=9,
                    color="tab:red", zorder=5)
    ax.set_yticks(range(sc.n), [f"p{p}" for p in range(sc.n)])
    ax.set_xlim(-0.5, last_tick + 1.5)
    ax.set_xlabel("tick (message delays)")
    ax.set_title(f"{sc.name}: {sc.algorithm} run")
    ax.invert_yaxis()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_sweep_figure(latencies: list[int], bound: Optional[int],
                        title: str, path: str | Path) -> Path:
    """Histogram of per-message delivery latencies across a sweep."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    if latencies:
        top = max(latencies + ([bound] if bound else []))
        bins = [x - 0.5 for x in range(0, top + 2)]
        ax.hist(latencies, bins=bins, color="tab:blue", rwidth=0.85)
    if bound is not None:
        ax.axvline(bound, color="tab:red", ls="--", label=f"bound {bound}")
        ax.legend()
    ax.set_xlabel("delivery latency (ticks)")
    ax.set_ylabel("messages")
    ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
