"""Deterministic discrete-event harness for refresh experiments.

Drives the same engine used in live service mode with a simulated
millisecond clock: reads tick on a fixed interval, the viewport moves per
the configured behavior, and a single simulated writer occupies itself
for each view's configured cost. Identical (config, seed) pairs produce
byte-identical traces.
"""

from __future__ import annotations

import heapq
import random
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping

from .engine import Engine, WriteTxn
from .errors import ConfigInvalid
from .graph import RESULT, ViewGraph, build_graph
from .lenses import Lens
from .metrics import MetricsReport, compute_report
from .scheduler import Policy
from .trace import Trace

REGULAR_MOVE = "regular"
WAIT_AND_MOVE = "wait"
RANDOM_MOVE = "random"

BEHAVIORS = (REGULAR_MOVE, WAIT_AND_MOVE, RANDOM_MOVE)

# Event priorities at equal instants: writer activity settles first, then
# the viewport moves, then reads observe the result.
_PRIO_WRITE = 0
_PRIO_MOVE = 1
_PRIO_READ = 2


def default_dashboard_spec() -> dict[str, Any]:
    """A bundled 22-visualization dashboard over three base tables.

    Heterogeneous per-view refresh costs; one full refresh totals exactly
    3700 ms of simulated compute.
    """
    query_costs = {
        "q01": 260, "q02": 60, "q03": 180, "q04": 120, "q05": 200,
        "q06": 90, "q07": 190, "q08": 210, "q09": 270, "q10": 170,
        "q11": 70, "q12": 130, "q13": 240, "q14": 100, "q15": 110,
        "q16": 80, "q17": 200, "q18": 250, "q19": 160, "q20": 140,
        "q21": 260, "q22": 90,
    }
    feeds = {
        "lineitem": ["q01", "q03", "q04", "q05", "q06", "q07", "q08", "q09",
                     "q10", "q12", "q14", "q15", "q17", "q18", "q19", "q20",
                     "q21"],
        "orders": ["q03", "q04", "q05", "q07", "q08", "q09", "q10", "q12",
                   "q13", "q18", "q21", "q22"],
        "partsupp": ["q02", "q09", "q11", "q16", "q20"],
    }
    base_costs = {"lineitem": 60, "orders": 40, "partsupp": 20}
    nodes = [
        {"id": name, "cost_ms": cost, "base": True}
        for name, cost in base_costs.items()
    ]
    nodes += [{"id": q, "cost_ms": c} for q, c in sorted(query_costs.items())]
    edges = [[t, q] for t, qs in sorted(feeds.items()) for q in qs]
    return {"nodes": nodes, "edges": edges}


@dataclass(frozen=True)
class Dashboard:
    """Grid layout: which views the user can scroll over, rows of per_row."""

    layout: tuple[str, ...]
    per_row: int = 2

    def window(self, top_row: int, size: int) -> tuple[str, ...]:
        start = top_row * self.per_row
        return self.layout[start : start + size]


@dataclass
class ExperimentConfig:
    graph_spec: dict[str, Any]
    lens: Lens
    policy: str = "tp"
    behavior: str = REGULAR_MOVE
    explore_range: int = 22
    viewport_size: int = 4
    read_interval_ms: int = 100
    move_interval_ms: int = 1000
    writes: tuple[tuple[int, tuple[str, ...]], ...] = ()  # (start_ms, write_set)
    refresh_interval_ms: int | None = None
    refresh_count: int = 1
    seed: int = 0
    layout: tuple[str, ...] | None = None  # defaults to non-base nodes in order
    per_row: int = 2

    def dashboard(self, graph: ViewGraph) -> Dashboard:
        layout = self.layout
        if layout is None:
            layout = tuple(
                n for n in graph.node_ids if n not in graph.base_nodes
            )
        return Dashboard(tuple(layout), self.per_row)

    def write_plan(self, graph: ViewGraph) -> list[tuple[int, tuple[str, ...]]]:
        all_bases = tuple(sorted(graph.base_nodes))
        if self.refresh_interval_ms is not None:
            return [
                (i * self.refresh_interval_ms, all_bases)
                for i in range(self.refresh_count)
            ]
        if self.writes:
            return [(at, ws if ws else all_bases) for at, ws in self.writes]
        return [(0, all_bases)]

    def validate(self, graph: ViewGraph) -> None:
        dash = self.dashboard(graph)
        if len(set(dash.layout)) != len(dash.layout):
            raise ConfigInvalid("layout lists a node more than once")
        if self.behavior not in BEHAVIORS:
            raise ConfigInvalid(f"unknown read behavior: {self.behavior!r}")
        if not (0 < self.viewport_size <= self.explore_range <= len(dash.layout)):
            raise ConfigInvalid(
                "need 0 < viewport_size <= explore_range <= dashboard size, got "
                f"{self.viewport_size} / {self.explore_range} / {len(dash.layout)}"
            )
        if self.read_interval_ms <= 0 or self.move_interval_ms <= 0:
            raise ConfigInvalid("intervals must be positive")
        if not self.write_plan(graph):
            raise ConfigInvalid("write plan is empty; the run would never end")
        for node in dash.layout:
            if node not in graph:
                raise ConfigInvalid(f"layout references unknown node {node!r}")

    def to_meta(self) -> dict[str, Any]:
        return {
            "lens": self.lens.kind,
            "k": self.lens.k,
            "policy": self.policy,
            "behavior": self.behavior,
            "explore_range": self.explore_range,
            "viewport_size": self.viewport_size,
            "seed": self.seed,
        }


class ViewportController:
    """Produces the viewport for each read tick per the read behavior."""

    def __init__(
        self,
        config: ExperimentConfig,
        dashboard: Dashboard,
        rng: random.Random,
    ):
        self.behavior = config.behavior
        self.dashboard = dashboard
        self.size = config.viewport_size
        rows_in_range = -(-config.explore_range // dashboard.per_row)
        viewport_rows = -(-config.viewport_size // dashboard.per_row)
        self.max_top = max(rows_in_range - viewport_rows, 0)
        self.top = 0
        self.direction = 1
        self.rng = rng
        self.last_states: dict[str, tuple[str, int]] = {}

    def current(self) -> tuple[str, ...]:
        return self.dashboard.window(self.top, self.size)

    def observe(self, states: Mapping[str, tuple[str, int]]) -> None:
        self.last_states.update(states)

    def move(self, engine: Engine) -> None:
        if self.max_top == 0:
            return
        if self.behavior == RANDOM_MOVE:
            self.top = self.rng.randint(0, self.max_top)
            return
        if self.behavior == WAIT_AND_MOVE and not self._viewport_fresh(engine):
            return
        nxt = self.top + self.direction
        if nxt > self.max_top or nxt < 0:
            self.direction = -self.direction
            nxt = self.top + self.direction
        self.top = nxt

    def _viewport_fresh(self, engine: Engine) -> bool:
        # "Refreshed" = the last returned state is a result and matches the
        # latest graph (nodes outside the update set are vacuously fresh).
        t_s = engine.snapshot_meta().t_s
        for node in self.current():
            state = self.last_states.get(node)
            if state is None or state[0] != RESULT:
                return False
            latest = engine.graph.item_at(node, t_s)
            if latest.kind != RESULT or latest.version != state[1]:
                return False
        return True


class _SimWriter:
    """Single writer: one view computation in flight at a time."""

    def __init__(self, engine: Engine):
        self.engine = engine
        self.queue: list[WriteTxn] = []
        self.busy = False
        self.pending_writes = 0

    def submit(self, txn: WriteTxn) -> None:
        self.queue.append(txn)
        self.pending_writes += 1

    def start_step(self, now: int) -> tuple[int, WriteTxn, str] | None:
        """Pick the next view; returns (finish_at, txn, node) or None."""
        if self.busy or not self.queue:
            return None
        txn = self.queue[0]
        node, cost = self.engine.next_node(txn)
        self.busy = True
        return (now + int(cost), txn, node)

    def finish_step(self, txn: WriteTxn, node: str, now: int) -> bool:
        """Install; commit when exhausted. Returns True on commit."""
        self.busy = False
        self.engine.complete_node(txn, node, now)
        if txn.exhausted:
            self.engine.commit_write(txn, now)
            self.queue.pop(0)
            self.pending_writes -= 1
            return True
        return False


def run_experiment(
    config: ExperimentConfig, graph: ViewGraph | None = None
) -> tuple[Trace, MetricsReport]:
    """Run one seeded experiment; returns the trace and its metrics."""
    if graph is None:
        graph = build_graph(config.graph_spec)
    config.validate(graph)
    engine = Engine(
        graph,
        policy=Policy(config.policy, seed=config.seed),
        graph_spec=config.graph_spec,
    )
    engine.trace.meta = config.to_meta()
    dashboard = config.dashboard(graph)
    controller = ViewportController(
        config, dashboard, random.Random(f"{config.seed}:viewport")
    )

    plan = config.write_plan(graph)
    heap: list[tuple[int, int, int, str, Any]] = []
    counter = 0

    def push(at: int, prio: int, kind: str, payload: Any = None) -> None:
        nonlocal counter
        heapq.heappush(heap, (at, prio, counter, kind, payload))
        counter += 1

    for at, write_set in plan:
        push(at, _PRIO_WRITE, "begin", write_set)
    push(0, _PRIO_READ, "read")
    push(config.move_interval_ms, _PRIO_MOVE, "move")

    writer = _SimWriter(engine)
    remaining_begins = len(plan)
    finished = False

    while heap:
        now, _, _, kind, payload = heapq.heappop(heap)
        if kind == "begin":
            txn = engine.begin_write(payload, now)
            writer.submit(txn)
            remaining_begins -= 1
            step = writer.start_step(now)
            if step:
                push(step[0], _PRIO_WRITE, "install", step[1:])
        elif kind == "install":
            txn, node = payload
            committed = writer.finish_step(txn, node, now)
            if committed and remaining_begins == 0 and not writer.queue:
                finished = True
                push(now, _PRIO_READ, "final_read")
            else:
                step = writer.start_step(now)
                if step:
                    push(step[0], _PRIO_WRITE, "install", step[1:])
        elif kind == "move":
            if not finished:
                controller.move(engine)
                push(now + config.move_interval_ms, _PRIO_MOVE, "move")
        elif kind == "read":
            if not finished:
                event = engine.read(controller.current(), config.lens, now)
                controller.observe(event.states)
                push(now + config.read_interval_ms, _PRIO_READ, "read")
        elif kind == "final_read":
            event = engine.read(controller.current(), config.lens, now)
            controller.observe(event.states)
            break

    return engine.trace, compute_report(engine.trace)


def run_lens_suite(
    config: ExperimentConfig,
    lenses: Iterable[Lens],
    graph_spec: dict[str, Any] | None = None,
) -> dict[str, tuple[Trace, MetricsReport]]:
    """One workload replayed across lenses (shared everything but the lens)."""
    spec = graph_spec or config.graph_spec
    out: dict[str, tuple[Trace, MetricsReport]] = {}
    for lens in lenses:
        cfg = replace(config, graph_spec=spec, lens=lens)
        out[lens.key] = run_experiment(cfg)
    return out


@dataclass
class GridResult:
    rows: list[dict[str, Any]] = field(default_factory=list)

    def to_csv(self) -> str:
        header = (
            "lens,k,policy,behavior,explore_range,viewport_size,seed,"
            "invisibility_ms,staleness_ms"
        )
        template = (
            "{lens},{k},{policy},{behavior},{explore_range},"
            "{viewport_size},{seed},{invisibility_ms:g},{staleness_ms:g}"
        )
        # interval sweeps carry one extra trailing column
        if any("refresh_interval_ms" in row for row in self.rows):
            header += ",refresh_interval_ms"
            template += ",{refresh_interval_ms}"
        lines = [header]
        for row in self.rows:
            lines.append(template.format(**row))
        return "\n".join(lines) + "\n"

    def aggregate(self, metric: str) -> dict[tuple, dict[str, float]]:
        """min/mean/max of one metric across seeds, per non-seed cell."""
        cells: dict[tuple, list[float]] = {}
        for row in self.rows:
            key = (
                row["lens"], row["k"], row["policy"], row["behavior"],
                row["explore_range"], row["viewport_size"],
            )
            if "refresh_interval_ms" in row:
                key += (row["refresh_interval_ms"],)
            cells.setdefault(key, []).append(row[metric])
        return {
            key: {
                "min": min(vals),
                "mean": statistics.fmean(vals),
                "max": max(vals),
            }
            for key, vals in cells.items()
        }


def run_grid(
    base: ExperimentConfig,
    lenses: Iterable[Lens],
    seeds: Iterable[int],
    explore_ranges: Iterable[int] | None = None,
    viewport_sizes: Iterable[int] | None = None,
    policies: Iterable[str] | None = None,
    behaviors: Iterable[str] | None = None,
    refresh_intervals: Iterable[int] | None = None,
    max_workers: int = 4,
) -> GridResult:
    """Cross-product of config axes; one run per cell per seed.

    Cells run in parallel across threads — every cell gets a fresh engine
    and graph — and rows come back in cell order regardless of completion
    order, so the CSV is deterministic.
    """
    cells: list[ExperimentConfig] = []
    for behavior in behaviors or [base.behavior]:
        for explore in explore_ranges or [base.explore_range]:
            for vsize in viewport_sizes or [base.viewport_size]:
                for policy in policies or [base.policy]:
                    for interval in refresh_intervals or [base.refresh_interval_ms]:
                        for lens in lenses:
                            for seed in seeds:
                                cells.append(
                                    replace(
                                        base,
                                        behavior=behavior,
                                        explore_range=explore,
                                        viewport_size=vsize,
                                        policy=policy,
                                        refresh_interval_ms=interval,
                                        lens=lens,
                                        seed=seed,
                                    )
                                )

    def run_cell(cfg: ExperimentConfig) -> dict[str, Any]:
        _, report = run_experiment(cfg)
        row = {
            "lens": cfg.lens.kind,
            "k": cfg.lens.k,
            "policy": cfg.policy,
            "behavior": cfg.behavior,
            "explore_range": cfg.explore_range,
            "viewport_size": cfg.viewport_size,
            "seed": cfg.seed,
            "invisibility_ms": report.invisibility_ms,
            "staleness_ms": report.staleness_ms,
        }
        if refresh_intervals:
            row["refresh_interval_ms"] = cfg.refresh_interval_ms
        return row

    result = GridResult()
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        result.rows = list(pool.map(run_cell, cells))
    return result


def config_from_dict(obj: Mapping[str, Any]) -> ExperimentConfig:
    """Build a config from a parsed JSON object (CLI surface)."""
    spec = obj.get("graph_spec") or default_dashboard_spec()
    writes: list[tuple[int, tuple[str, ...]]] = []
    for entry in obj.get("writes", []):
        writes.append((int(entry.get("at_ms", 0)), tuple(entry.get("write_set", ()))))
    return ExperimentConfig(
        graph_spec=spec,
        lens=Lens.parse(obj.get("lens", "gcpb"), obj.get("k")),
        policy=obj.get("policy", "tp"),
        behavior=obj.get("behavior", REGULAR_MOVE),
        explore_range=int(obj.get("explore_range", 22)),
        viewport_size=int(obj.get("viewport_size", 4)),
        read_interval_ms=int(obj.get("read_interval_ms", 100)),
        move_interval_ms=int(obj.get("move_interval_ms", 1000)),
        writes=tuple(writes),
        refresh_interval_ms=obj.get("refresh_interval_ms"),
        refresh_count=int(obj.get("refresh_count", 1)),
        seed=int(obj.get("seed", 0)),
        layout=tuple(obj["layout"]) if obj.get("layout") else None,
        per_row=int(obj.get("per_row", 2)),
    )
