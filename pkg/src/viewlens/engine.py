"""Write/read transaction processing over a multi-versioned view graph.

One engine instance is shared by a single writer worker and any number of
reader threads. Latching discipline:

* each node's item list has its own latch (inside :class:`ViewGraph`);
* the MetaInfo triple (t_c, t_s, c_uc) has a dedicated latch, never held
  while a node latch is held;
* the read path is serialized by a reader latch so the trace is a total
  order and LastRead updates are atomic relative to other readers —
  readers never wait for view computation, only for other O(viewport)
  read sections. Writers never take the reader latch.

A write transaction runs in three steps: stamp UC placeholders and
publish the new latest timestamp, install results one by one in the order
the scheduler picks, then advance the committed timestamp. Queued writes
are allowed: each stacks its placeholders on top and executes strictly in
submission order.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .errors import (
    AlreadyCommitted,
    EmptyGroup,
    EmptyViewport,
    EmptyWriteSet,
    UnknownNode,
    WriteOrderViolation,
)
from .graph import RESULT, T0, UC, ViewGraph
from .lenses import Lens, MetaInfo, select_version
from .metrics import MetricsAccumulator
from .scheduler import CostModel, DwellTracker, Policy, next_view
from .trace import ReadEvent, Trace, VersionRecord

RUNNING = "running"
COMMITTED = "committed"


@dataclass
class StepResult:
    committed: bool
    node: str | None = None
    cost_ms: float = 0.0


@dataclass
class WriteTxn:
    ts: int
    write_set: tuple[str, ...]
    update_set: tuple[str, ...]
    groups: list[list[str]]  # remaining topological strata, consumed in place
    tracker: DwellTracker
    record: VersionRecord
    status: str = RUNNING
    remaining: set[str] = field(default_factory=set)

    @property
    def exhausted(self) -> bool:
        return not self.remaining


class Engine:
    """The shared transaction managers plus auxiliary tables."""

    def __init__(
        self,
        graph: ViewGraph,
        policy: Policy | None = None,
        costs: CostModel | None = None,
        graph_spec: dict | None = None,
        clock: Callable[[], float] | None = None,
    ):
        self.graph = graph
        self.policy = policy or Policy()
        self.costs = costs or CostModel(dict(graph.costs))
        self._clock = clock  # wall mode only; simulated instants come via `now`
        self._meta_latch = threading.Lock()
        self._read_latch = threading.Lock()
        self._begin_latch = threading.Lock()
        self._t_c = T0
        self._t_s = T0
        self._c_uc = 0
        self._t_r = T0  # GC watermark: committed version at the last read
        self._active_read_floors: list[int] = []
        self._running: list[WriteTxn] = []
        self.last_read: dict[str, int] = {}
        self.trace = Trace(graph_spec=graph_spec)
        self.accumulator = MetricsAccumulator()
        self._seq = 0

    # -- MetaInfo ------------------------------------------------------------

    def snapshot_meta(self) -> MetaInfo:
        """Atomic copy of (t_c, t_s, c_uc)."""
        with self._meta_latch:
            return MetaInfo(self._t_c, self._t_s, self._c_uc)

    def has_running_write(self) -> bool:
        with self._meta_latch:
            return bool(self._running)

    def running_writes(self) -> list[WriteTxn]:
        with self._meta_latch:
            return list(self._running)

    # -- write transactions ----------------------------------------------------

    def begin_write(self, write_set: Iterable[str], now: float) -> WriteTxn:
        """Stamp a new version: UC placeholders plus the t_s/c_uc update."""
        wset = tuple(sorted(set(write_set)))
        if not wset:
            raise EmptyWriteSet("write_set is empty")
        for node in wset:
            if node not in self.graph:
                raise UnknownNode(f"no such node: {node!r}")
            if node not in self.graph.base_nodes:
                raise UnknownNode(f"not a base node: {node!r}")
        with self._begin_latch:
            with self._meta_latch:
                ts = self._t_s + 1
            update_set = tuple(
                sorted(set(wset) | self.graph.dependents(wset))
            )
            # Stamp placeholders before publishing t_s: readers filter items
            # by version, so half-stamped versions stay invisible. A node
            # joins the latest-graph UC count only if it was not already
            # showing a UC (a queued write stacking on a pending one).
            newly_uc = 0
            for node in update_set:
                prev_kind = self.graph.mark_under_computation(node, ts)
                if prev_kind == RESULT:
                    newly_uc += 1
            record = VersionRecord(
                ts=ts, write_set=wset, update_set=update_set, begin_at=now
            )
            txn = WriteTxn(
                ts=ts,
                write_set=wset,
                update_set=update_set,
                groups=self.graph.topo_groups(update_set),
                tracker=DwellTracker(ts, now),
                record=record,
                remaining=set(update_set),
            )
            self.trace.versions.append(record)
            self.accumulator.write_started(ts, update_set)
            with self._meta_latch:
                self._t_s = ts
                self._c_uc += newly_uc
                self._running.append(txn)
        return txn

    def next_node(self, txn: WriteTxn) -> tuple[str, float]:
        """Ask the scheduler which view of the current stratum to compute."""
        self._require_head(txn)
        while txn.groups and not txn.groups[0]:
            txn.groups.pop(0)
        if not txn.groups:
            raise EmptyGroup(f"write {txn.ts} has no views left to schedule")
        group = txn.groups[0]
        node = next_view(self.policy, txn.tracker, self.costs, group)
        group.remove(node)
        return node, self.costs.cost(node)

    def complete_node(
        self, txn: WriteTxn, node: str, now: float, payload: Any = None
    ) -> None:
        """Install the computed result and settle the UC bookkeeping."""
        self._require_head(txn)
        cost = self.costs.cost(node)
        tail_kind = self.graph.install_result(
            node, txn.ts, payload if payload is not None else f"{node}@v{txn.ts}", cost
        )
        txn.remaining.discard(node)
        txn.record.installs[node] = now
        # The node still shows a UC in the latest graph iff a queued write
        # stacked a newer placeholder above the one just replaced.
        if tail_kind == RESULT:
            with self._meta_latch:
                self._c_uc -= 1

    def commit_write(self, txn: WriteTxn, now: float) -> None:
        """Step 3: advance the committed timestamp, in submission order."""
        self._require_head(txn)
        if not txn.exhausted:
            raise WriteOrderViolation(
                f"write {txn.ts} still has {len(txn.remaining)} views pending"
            )
        txn.status = COMMITTED
        txn.record.commit_at = now
        with self._meta_latch:
            self._t_c = txn.ts
            self._running.pop(0)

    def step_write(self, txn: WriteTxn, now: float) -> StepResult:
        """One scheduling step at a single instant.

        Installs the next scheduled view (``StepResult(node=...)``), or —
        once the update set is exhausted — commits and reports it.
        """
        if txn.status == COMMITTED:
            raise AlreadyCommitted(f"write {txn.ts} already committed")
        if txn.exhausted:
            self.commit_write(txn, now)
            return StepResult(committed=True)
        node, cost = self.next_node(txn)
        self.complete_node(txn, node, now)
        return StepResult(committed=False, node=node, cost_ms=cost)

    def run_write(self, write_set: Iterable[str], now: float) -> WriteTxn:
        """begin + all steps at one instant; test/replay convenience."""
        txn = self.begin_write(write_set, now)
        while txn.status == RUNNING:
            self.step_write(txn, now)
        return txn

    def _require_head(self, txn: WriteTxn) -> None:
        if txn.status == COMMITTED:
            raise AlreadyCommitted(f"write {txn.ts} already committed")
        with self._meta_latch:
            head = self._running[0] if self._running else None
        if head is not txn:
            raise WriteOrderViolation(
                f"write {txn.ts} is not the oldest running write"
            )

    # -- read transactions -----------------------------------------------------

    def read(self, viewport: Iterable[str], lens: Lens, now: float) -> ReadEvent:
        """Process one read transaction and record it in the trace."""
        nodes = tuple(sorted(set(viewport)))
        if not nodes:
            raise EmptyViewport("viewport is empty")
        for node in nodes:
            if node not in self.graph:
                raise UnknownNode(f"no such node: {node!r}")
        with self._read_latch:
            with self._meta_latch:
                meta = MetaInfo(self._t_c, self._t_s, self._c_uc)
                self._t_r = meta.t_c
                self._active_read_floors.append(meta.t_c)
            try:
                choice = select_version(lens, meta, nodes, self.last_read, self.graph)
                states: dict[str, tuple[str, int]] = {}
                for node in nodes:
                    if choice.per_node:
                        item = self.graph.newest_result(node)
                    else:
                        item = self.graph.item_at(node, choice.version)
                    states[node] = item.as_state()
                for node, (_, version) in states.items():
                    if version > self.last_read.get(node, T0):
                        self.last_read[node] = version
                # Snapshot the running writes BEFORE capturing the return
                # instant: any tracker in the snapshot was created no later
                # than the instant, so dwell time never runs backwards.
                running = self.running_writes()
                returned_at = self._clock() if self._clock else now
                event = ReadEvent(
                    seq=self._seq,
                    issued_at=now,
                    returned_at=returned_at,
                    viewport=nodes,
                    lens=lens,
                    chosen_version=choice.version,
                    states=states,
                    meta_at_read=meta,
                )
                self._seq += 1
                self.trace.append(event)
                self.accumulator.push(event)
                for txn in running:
                    txn.tracker.record_read(nodes, returned_at)
            finally:
                with self._meta_latch:
                    self._active_read_floors.remove(meta.t_c)
        return event

    def clear_last_read(self) -> None:
        """Forget monotonicity floors; used when the lens changes."""
        with self._read_latch:
            self.last_read.clear()

    # -- garbage collection ------------------------------------------------------

    def gc_watermark(self) -> int:
        with self._meta_latch:
            floors = [self._t_r, *self._active_read_floors]
            return min(floors)

    def collect_garbage(self) -> int:
        """Drop item-list prefixes no current or future read can return."""
        return self.graph.collect_garbage(self.gc_watermark())

    # -- test support -------------------------------------------------------------

    def count_ucs_at_latest(self) -> int:
        """Brute-force rescan of the latest graph's UC count."""
        with self._meta_latch:
            t_s = self._t_s
        return sum(
            1 for n in self.graph.node_ids if self.graph.item_at(n, t_s).kind == UC
        )
