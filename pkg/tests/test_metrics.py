"""Invisibility/staleness: hand-derived cases, streaming-vs-batch, invariances."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from viewlens.engine import Engine
from viewlens.errors import MissingVersionHistory, UnorderedTrace
from viewlens.graph import build_graph
from viewlens.lenses import Lens, MetaInfo
from viewlens.metrics import (
    MetricsAccumulator,
    compute_report,
    invisibility,
    staleness,
)
from viewlens.scheduler import Policy
from viewlens.trace import ReadEvent, Trace, VersionRecord
from viewlens.workloads import DEMO_GRAPH_SPEC, random_workload
from viewlens.simulator import run_experiment


def event(seq, at, states, t_s=1, viewport=None, lens=Lens("gcpb")):
    return ReadEvent(
        seq=seq,
        issued_at=at,
        returned_at=at,
        viewport=tuple(viewport or sorted(states)),
        lens=lens,
        chosen_version=t_s,
        states=states,
        meta_at_read=MetaInfo(0, t_s, 0),
    )


def two_event_trace():
    trace = Trace()
    trace.versions.append(
        VersionRecord(1, ("n1",), ("n1", "n3", "n4"), 0.0, {}, None)
    )
    trace.append(event(0, 0, {"n3": ("uc", 1), "n4": ("uc", 1)}))
    trace.append(event(1, 100, {"n3": ("result", 1), "n4": ("result", 1)}))
    return trace


class TestInvisibility:
    def test_two_ucs_for_one_interval(self):
        assert invisibility(two_event_trace()) == 200.0

    def test_clean_trace_is_zero(self):
        trace = Trace()
        trace.append(event(0, 0, {"n3": ("result", 0)}))
        trace.append(event(1, 100, {"n3": ("result", 0)}))
        assert invisibility(trace) == 0.0

    def test_single_event_contributes_nothing(self):
        trace = Trace()
        trace.append(event(0, 0, {"n3": ("uc", 1)}))
        assert invisibility(trace) == 0.0

    def test_unordered_trace_rejected(self):
        trace = Trace()
        trace.events = [
            event(0, 100, {"n3": ("result", 0)}),
            event(1, 50, {"n3": ("result", 0)}),
        ]
        with pytest.raises(UnorderedTrace):
            invisibility(trace)


class TestStaleness:
    def test_gcnb_mid_write_counts_updated_viewport_nodes(self):
        # committed results on n3,n4,n5 while the write on n1 refreshes
        # n3..n6: three stale views for one 100 ms interval
        trace = Trace()
        trace.versions.append(
            VersionRecord(1, ("n1",), ("n1", "n3", "n4", "n5", "n6"), 0.0, {}, None)
        )
        states = {n: ("result", 0) for n in ("n3", "n4", "n5")}
        trace.append(event(0, 0, dict(states)))
        trace.append(event(1, 100, dict(states)))
        assert staleness(trace) == 300.0

    def test_gcpb_trace_is_never_stale(self):
        cfg = random_workload(7, behavior="regular")
        trace, report = run_experiment(cfg)
        assert report.staleness_ms == 0.0
        assert staleness(trace) == 0.0

    def test_fresh_event_contributes_nothing(self):
        trace = two_event_trace()
        assert staleness(trace) == 0.0  # UCs never count; results are at t_s

    def test_missing_history_detected(self):
        trace = Trace()
        trace.append(event(0, 0, {"n3": ("result", 0)}, t_s=2))
        trace.append(event(1, 100, {"n3": ("result", 0)}, t_s=2))
        with pytest.raises(MissingVersionHistory):
            staleness(trace)


def random_trace(rng: random.Random) -> Trace:
    """Synthetic trace: random writes, instants, and returned states."""
    trace = Trace()
    nodes = [f"n{i}" for i in range(rng.randint(1, 6))]
    n_writes = rng.randint(0, 4)
    for ts in range(1, n_writes + 1):
        covered = rng.sample(nodes, k=rng.randint(1, len(nodes)))
        trace.versions.append(
            VersionRecord(ts, tuple(covered[:1]), tuple(sorted(covered)),
                          float(ts * 10), {}, None)
        )
    at = 0.0
    for seq in range(rng.randint(1, 30)):
        at += rng.randint(0, 300)
        t_s = rng.randint(0, n_writes)
        states = {}
        for node in rng.sample(nodes, k=rng.randint(1, len(nodes))):
            kind = rng.choice(["result", "uc"])
            states[node] = (kind, rng.randint(0, t_s))
        trace.append(
            ReadEvent(
                seq=seq,
                issued_at=at,
                returned_at=at,
                viewport=tuple(sorted(states)),
                lens=Lens("gcpb"),
                chosen_version=t_s,
                states=states,
                meta_at_read=MetaInfo(0, t_s, 0),
            )
        )
    return trace


def test_streaming_equals_batch_on_1000_random_traces():
    rng = random.Random(1234)
    for _ in range(1000):
        trace = random_trace(rng)
        batch = compute_report(trace)
        acc = MetricsAccumulator()
        for rec in trace.versions:
            acc.write_started(rec.ts, rec.update_set)
        for ev in trace.events:
            acc.push(ev)
        assert acc.report.invisibility_ms == batch.invisibility_ms
        assert acc.report.staleness_ms == batch.staleness_ms
        assert acc.report.intervals == batch.intervals


@given(st.integers(min_value=0, max_value=10_000),
       st.integers(min_value=1, max_value=7),
       st.integers())
@settings(max_examples=60)
def test_translation_invariance_and_dilation_linearity(shift, scale, seed):
    trace = random_trace(random.Random(seed))
    base_i, base_s = invisibility(trace), staleness(trace)

    shifted = Trace(versions=trace.versions)
    dilated = Trace(versions=trace.versions)
    for ev in trace.events:
        for target, factor, offset in ((shifted, 1, shift), (dilated, scale, 0)):
            target.events.append(
                ReadEvent(
                    seq=ev.seq,
                    issued_at=ev.issued_at * factor + offset,
                    returned_at=ev.returned_at * factor + offset,
                    viewport=ev.viewport,
                    lens=ev.lens,
                    chosen_version=ev.chosen_version,
                    states=ev.states,
                    meta_at_read=ev.meta_at_read,
                )
            )
    assert invisibility(shifted) == base_i
    assert staleness(shifted) == base_s
    assert invisibility(dilated) == base_i * scale
    assert staleness(dilated) == base_s * scale


def test_report_totals_equal_breakdown_sums():
    cfg = random_workload(3, behavior="regular")
    trace, report = run_experiment(cfg)
    assert report.invisibility_ms == sum(
        iv.uc_count * iv.duration_ms for iv in report.intervals
    )
    assert report.staleness_ms == sum(
        iv.stale_count * iv.duration_ms for iv in report.intervals
    )


def test_csv_export_shape():
    trace = two_event_trace()
    report = compute_report(trace)
    lines = report.to_csv().strip().splitlines()
    assert lines[0] == "interval_start_ms,uc_count,stale_count"
    assert lines[1] == "0,2,0"


def test_engine_accumulator_matches_batch_recomputation():
    e = Engine(build_graph(DEMO_GRAPH_SPEC), policy=Policy("antifreeze"))
    txn = e.begin_write(["n1"], 0)
    now = 0
    viewports = [["n3", "n4"], ["n4", "n5"], ["n5", "n6", "n7"]]
    for i in range(12):
        e.read(viewports[i % 3], Lens("lcmb"), now)
        now += 100
        if i % 4 == 3 and txn.status == "running":
            e.step_write(txn, now)
    batch = compute_report(e.trace)
    assert e.accumulator.report.invisibility_ms == batch.invisibility_ms
    assert e.accumulator.report.staleness_ms == batch.staleness_ms
