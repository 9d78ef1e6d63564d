"""Randomized single-write workloads for the verification suites.

Generates small layered DAGs and workload knobs from a seed, replays each
workload across the lens set, and runs the ordering and per-lens property
checks. Single-write only: the metric ordering guarantees assume one write
transaction shared by all lenses.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Iterable

from .checker import (
    DECLARED_PROPERTIES,
    Violation,
    check_orderings,
    check_trace,
)
from .engine import Engine
from .graph import build_graph
from .lenses import Lens
from .metrics import MetricsReport, compute_report
from .scheduler import Policy
from .simulator import (
    RANDOM_MOVE,
    REGULAR_MOVE,
    ExperimentConfig,
    run_lens_suite,
)
from .trace import Trace

BASE_LENSES = tuple(Lens(kind) for kind in ("gcpb", "gcnb", "lcnb", "lcmb", "icnb"))


def random_graph_spec(rng: random.Random, min_nodes: int = 5, max_nodes: int = 30) -> dict:
    """A random layered DAG with heterogeneous refresh costs."""
    n_nodes = rng.randint(min_nodes, max_nodes)
    n_base = rng.randint(1, max(1, n_nodes // 4))
    names = [f"v{i:02d}" for i in range(n_nodes)]
    bases, views = names[:n_base], names[n_base:]
    nodes = [
        {"id": b, "cost_ms": rng.randint(10, 80), "base": True} for b in bases
    ]
    nodes += [{"id": v, "cost_ms": rng.randint(50, 400)} for v in views]
    edges = []
    for idx, view in enumerate(views):
        upstream = bases + views[:idx]
        for pred in rng.sample(upstream, k=min(len(upstream), rng.randint(1, 3))):
            edges.append([pred, view])
    return {"nodes": nodes, "edges": edges}


def random_workload(seed: int, behavior: str | None = None) -> ExperimentConfig:
    """One seeded single-write workload over a random graph."""
    rng = random.Random(f"{seed}:workload")
    spec = random_graph_spec(rng)
    graph = build_graph(spec)
    dashboard_size = len(graph.node_ids) - len(graph.base_nodes)
    viewport = rng.randint(1, max(1, min(4, dashboard_size)))
    explore = rng.randint(viewport, dashboard_size)
    write_set = tuple(
        sorted(
            rng.sample(
                sorted(graph.base_nodes),
                k=rng.randint(1, len(graph.base_nodes)),
            )
        )
    )
    return ExperimentConfig(
        graph_spec=spec,
        lens=Lens("gcpb"),
        policy=rng.choice(["tp", "noopt", "antifreeze", "metricopt"]),
        behavior=behavior or rng.choice([REGULAR_MOVE, RANDOM_MOVE]),
        explore_range=explore,
        viewport_size=viewport,
        writes=((0, write_set),),
        seed=seed,
    )


def lens_set_for(seed: int, viewport_size: int) -> list[Lens]:
    """Base lenses plus the three k-variants at one sampled k."""
    rng = random.Random(f"{seed}:k")
    k = rng.randint(1, max(1, viewport_size))
    return list(BASE_LENSES) + [
        Lens("k-gcnb", k), Lens("k-lcnb", k), Lens("k-lcmb", k)
    ]


@dataclass
class SuiteReport:
    workloads: int = 0
    traces: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def run_ordering_suite(
    n_workloads: int, base_seed: int = 0, behaviors: Iterable[str] | None = None
) -> SuiteReport:
    """Theorem ordering checks across seeded workloads; zero tolerance."""
    report = SuiteReport()
    behaviors = list(behaviors or (REGULAR_MOVE, RANDOM_MOVE))
    for i in range(n_workloads):
        seed = base_seed + i
        config = random_workload(seed, behavior=behaviors[i % len(behaviors)])
        lenses = lens_set_for(seed, config.viewport_size)
        results = run_lens_suite(config, lenses)
        report.workloads += 1
        report.traces += len(results)
        report.violations.extend(check_orderings(results, workload_id=f"seed={seed}"))
    return report


def run_property_suite(
    n_workloads: int, base_seed: int = 0, behaviors: Iterable[str] | None = None
) -> SuiteReport:
    """Per-lens declared property checks across seeded workloads."""
    report = SuiteReport()
    behaviors = list(behaviors or (REGULAR_MOVE, RANDOM_MOVE))
    for i in range(n_workloads):
        seed = base_seed + i
        config = random_workload(seed, behavior=behaviors[i % len(behaviors)])
        lenses = lens_set_for(seed, config.viewport_size)
        results = run_lens_suite(config, lenses)
        report.workloads += 1
        for key, (trace, _) in results.items():
            kind = key.split(":")[0]
            report.traces += 1
            for violation in check_trace(trace, DECLARED_PROPERTIES[kind]):
                violation.detail = f"[seed={seed} lens={key}] {violation.detail}"
                report.violations.append(violation)
    return report


# -- the impossibility counterexample -----------------------------------------

DEMO_GRAPH_SPEC: dict[str, Any] = {
    "nodes": [
        {"id": "n1", "cost_ms": 10, "base": True},
        {"id": "n2", "cost_ms": 10, "base": True},
        {"id": "n3", "cost_ms": 10},
        {"id": "n4", "cost_ms": 10},
        {"id": "n5", "cost_ms": 10},
        {"id": "n6", "cost_ms": 10},
        {"id": "n7", "cost_ms": 10},
        {"id": "n8", "cost_ms": 10},
    ],
    "edges": [
        ["n1", "n3"], ["n1", "n4"], ["n1", "n5"], ["n1", "n6"],
        ["n2", "n6"], ["n2", "n7"], ["n2", "n8"],
    ],
}


def replay_impossibility_counterexample(lens: Lens) -> Trace:
    """The two-read trace showing M, V, and minimal-UC consistency clash.

    A write updates n1 and its dependents n3..n6; results for n1 and
    n3..n5 land, n6 stays under computation. The first read covers
    {n3,n4,n5}, then the viewport shifts to {n5,n6,n7}.
    """
    graph = build_graph(DEMO_GRAPH_SPEC)
    engine = Engine(graph, policy=Policy("antifreeze"), graph_spec=DEMO_GRAPH_SPEC)
    engine.trace.meta = {"lens": lens.kind, "k": lens.k, "counterexample": True}
    txn = engine.begin_write(["n1"], 0)
    for now, node in ((10, "n1"), (20, "n3"), (30, "n4"), (40, "n5")):
        picked, _ = engine.next_node(txn)
        assert picked == node, f"schedule drifted: {picked} != {node}"
        engine.complete_node(txn, node, now)
    engine.read(("n3", "n4", "n5"), lens, 50)
    engine.read(("n5", "n6", "n7"), lens, 60)
    return engine.trace


def counterexample_outcomes() -> dict[str, list[Violation]]:
    """Violations per lens on the counterexample trace.

    lcnb trades away monotonicity (one violation on n5), lcmb trades away
    visibility (one violation on n6), gcnb shows neither.
    """
    out: dict[str, list[Violation]] = {}
    for kind in ("lcnb", "lcmb", "gcnb"):
        trace = replay_impossibility_counterexample(Lens(kind))
        out[kind] = check_trace(trace, ("M", "V"))
    return out
