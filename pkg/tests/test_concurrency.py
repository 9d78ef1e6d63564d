"""Reader/writer/GC stress against one shared engine with the wall clock."""

import random
import threading
import time

from viewlens.checker import DECLARED_PROPERTIES, check_trace
from viewlens.engine import Engine
from viewlens.graph import build_graph
from viewlens.lenses import Lens
from viewlens.metrics import compute_report
from viewlens.scheduler import Policy

STRESS_SPEC = {
    "nodes": [
        {"id": "n1", "cost_ms": 30, "base": True},
        {"id": "n2", "cost_ms": 20, "base": True},
        {"id": "n3", "cost_ms": 40},
        {"id": "n4", "cost_ms": 25},
        {"id": "n5", "cost_ms": 35},
        {"id": "n6", "cost_ms": 50},
        {"id": "n7", "cost_ms": 30},
        {"id": "n8", "cost_ms": 45},
    ],
    "edges": [
        ["n1", "n3"], ["n1", "n4"], ["n1", "n5"], ["n1", "n6"],
        ["n2", "n6"], ["n2", "n7"], ["n2", "n8"],
    ],
}

VIEWPORTS = [
    ("n3", "n4", "n5"),
    ("n4", "n5", "n6"),
    ("n5", "n6", "n7"),
    ("n6", "n7", "n8"),
]


def run_stress(
    lens: Lens,
    duration_s: float,
    readers: int = 4,
    with_gc: bool = True,
    queue_depth: int = 2,
):
    """Live writer + concurrent pollers + GC for ``duration_s`` wall seconds."""
    graph = build_graph(STRESS_SPEC)
    started = time.monotonic()

    def clock() -> float:
        return (time.monotonic() - started) * 1000.0

    engine = Engine(graph, policy=Policy("tp"), graph_spec=STRESS_SPEC, clock=clock)
    deadline = started + duration_s
    stop = threading.Event()
    errors: list[BaseException] = []
    reads_done = [0] * readers

    def guarded(fn):
        def run():
            try:
                fn()
            except BaseException as exc:  # surfaced by the main thread
                errors.append(exc)
                stop.set()

        return run

    def writer():
        rng = random.Random(99)
        while time.monotonic() < deadline and not stop.is_set():
            txns = [engine.begin_write(["n1", "n2"], clock())]
            if rng.random() < 0.5:  # stack a queued write mid-flight
                txns.append(engine.begin_write([rng.choice(["n1", "n2"])], clock()))
            for txn in txns[:queue_depth]:
                while txn.status == "running" and not stop.is_set():
                    if txn.exhausted:
                        engine.commit_write(txn, clock())
                        break
                    node, cost = engine.next_node(txn)
                    time.sleep(cost / 1000.0 * 0.2)
                    engine.complete_node(txn, node, clock())
            time.sleep(0.01)

    def reader(idx: int):
        rng = random.Random(1000 + idx)
        position = idx % len(VIEWPORTS)
        while time.monotonic() < deadline and not stop.is_set():
            if rng.random() < 0.3:
                position = (position + 1) % len(VIEWPORTS)
            engine.read(VIEWPORTS[position], lens, clock())
            reads_done[idx] += 1
            time.sleep(rng.uniform(0.001, 0.010))

    def collector():
        while time.monotonic() < deadline and not stop.is_set():
            engine.collect_garbage()
            time.sleep(0.05)

    threads = [threading.Thread(target=guarded(writer))]
    threads += [
        threading.Thread(target=guarded(lambda i=i: reader(i))) for i in range(readers)
    ]
    if with_gc:
        threads.append(threading.Thread(target=guarded(collector)))
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=duration_s + 30)
    assert not errors, errors
    return engine, sum(reads_done)


def stress_violations(engine: Engine, lens: Lens):
    return check_trace(engine.trace, DECLARED_PROPERTIES[lens.kind])


def test_lcmb_stress_holds_declared_properties():
    lens = Lens("lcmb")
    engine, reads = run_stress(lens, duration_s=2.0)
    assert reads > 200
    assert stress_violations(engine, lens) == []


def test_icnb_stress_holds_declared_properties():
    lens = Lens("icnb")
    engine, reads = run_stress(lens, duration_s=1.5)
    assert reads > 100
    assert stress_violations(engine, lens) == []


def test_gc_under_stress_is_invisible_to_readers():
    # Consistency reconstruction is GC-independent: any read whose answer
    # was changed by collection would mismatch its version-history replay.
    lens = Lens("gcnb")
    engine, _ = run_stress(lens, duration_s=1.5, with_gc=True)
    assert stress_violations(engine, lens) == []
    assert engine.collect_garbage() >= 0  # idempotent afterwards


def test_live_accumulator_matches_batch_after_stress():
    lens = Lens("lcnb")
    engine, _ = run_stress(lens, duration_s=1.0, with_gc=False)
    batch = compute_report(engine.trace)
    assert engine.accumulator.report.invisibility_ms == batch.invisibility_ms
    assert engine.accumulator.report.staleness_ms == batch.staleness_ms


def test_ten_thousand_reads_against_running_writes():
    """Tight polling: >=10k reads through the writer's lifetime, all clean."""
    lens = Lens("lcmb")
    graph = build_graph(STRESS_SPEC)
    started = time.monotonic()

    def clock() -> float:
        return (time.monotonic() - started) * 1000.0

    engine = Engine(graph, policy=Policy("tp"), graph_spec=STRESS_SPEC, clock=clock)
    stop = threading.Event()
    errors: list[BaseException] = []

    def writer():
        try:
            while not stop.is_set():
                txn = engine.begin_write(["n1", "n2"], clock())
                while txn.status == "running":
                    if txn.exhausted:
                        engine.commit_write(txn, clock())
                        break
                    node, cost = engine.next_node(txn)
                    time.sleep(cost / 1000.0 * 0.05)
                    engine.complete_node(txn, node, clock())
        except BaseException as exc:
            errors.append(exc)
            stop.set()

    def reader(idx: int):
        rng = random.Random(idx)
        try:
            for _ in range(2600):
                if stop.is_set():
                    return
                engine.read(VIEWPORTS[rng.randrange(len(VIEWPORTS))], lens, clock())
        except BaseException as exc:
            errors.append(exc)
            stop.set()

    writer_thread = threading.Thread(target=writer)
    readers = [threading.Thread(target=lambda i=i: reader(i)) for i in range(4)]
    writer_thread.start()
    for t in readers:
        t.start()
    for t in readers:
        t.join(timeout=60)
    stop.set()
    writer_thread.join(timeout=60)
    assert not errors, errors
    assert len(engine.trace.events) >= 10_000
    assert stress_violations(engine, lens) == []
