"""Run classification, report assembly, figure rendering."""

from gmcast.report import (CONFLICT_FREE, COLLISION_FREE, CONTENDED,
                           build_report, classify_run, render_run_figure,
                           render_sweep_figure)
from gmcast.scenario import bundled_path, load_scenario, parse_scenario
from gmcast.simnet import run


def ft(messages, count=4, extra=""):
    return parse_scenario(f"""
[scenario]
algorithm = ft
[processes]
count = {count}
[groups]
g0 = p0 p1
g1 = p2 p3
[relation]
kind = rw-key
[messages]
{messages}
{extra}
""", source="<rep>").realize()


def test_single_message_reports_conflict_free():
    sc = ft("m1 = src=p0 dest=g0 ops=write:x:1 at=0")
    assert classify_run(run(sc), sc) == CONFLICT_FREE


def test_concurrent_writes_report_contended():
    sc = ft("m1 = src=p0 dest=g0+g1 ops=write:x:1 at=0\n"
            "m2 = src=p2 dest=g0+g1 ops=write:x:2 at=0")
    assert classify_run(run(sc), sc) == CONTENDED


def test_spaced_writes_report_collision_free():
    sc = ft("m1 = src=p0 dest=g0+g1 ops=write:x:1 at=0\n"
            "m2 = src=p2 dest=g0+g1 ops=write:x:2 at=20")
    assert classify_run(run(sc), sc) == COLLISION_FREE


def test_report_carries_latencies_and_verdicts():
    sc = load_scenario(bundled_path("figure2.cfg")).realize()
    trace = run(sc)
    report = build_report(trace, sc, assert_latency=5)
    assert report.latencies == {1: 5}
    assert report.commit_latencies == {1: 3}
    assert report.ok and report.exit_status == 0
    text = report.to_text()
    assert "latency\tm1\t5\t3" in text and "result\tPASS" in text


def test_violated_latency_assertion_fails_the_report():
    sc = load_scenario(bundled_path("figure2.cfg")).realize()
    report = build_report(run(sc), sc, assert_latency=4)
    assert not report.ok and report.exit_status == 1


def test_undelivered_message_fails_the_report():
    from dataclasses import replace
    sc = load_scenario(bundled_path("crash_between_casts.cfg")).realize()
    sc = replace(sc, recovery=False)
    report = build_report(run(sc), sc)
    assert not report.ok
    assert any(v.name in ("termination", "delivery") and not v.passed
               for v in report.verdicts)


def test_exempt_message_is_noted_not_failed():
    sc = load_scenario(bundled_path("crash_before_cast.cfg")).realize()
    report = build_report(run(sc), sc)
    assert report.latencies == {1: None}
    assert report.ok
    assert any("exempt" in n for n in report.notes)


def test_figures_render_to_files(tmp_path):
    sc = load_scenario(bundled_path("figure2.cfg")).realize()
    trace = run(sc)
    timeline = render_run_figure(trace, sc, tmp_path / "timeline.png")
    hist = render_sweep_figure([3, 3, 5], 5, "demo", tmp_path / "hist.png")
    assert timeline.stat().st_size > 0
    assert hist.stat().st_size > 0
