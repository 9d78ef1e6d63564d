"""Invisibility and staleness over a trace.

Both metrics are sums over consecutive read pairs: the count observed by
read i is charged for the interval until read i+1 returns, so the final
read contributes nothing. A returned result is stale when some write with
a newer timestamp (up to the latest graph at that read, whether or not its
result landed yet) covers the node; UC states never count toward
staleness, only toward invisibility.
"""

from __future__ import annotations

import json
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import MissingVersionHistory
from .trace import ReadEvent, Trace


def stale_nodes(
    event: ReadEvent, updates_by_node: Mapping[str, list[int]]
) -> set[str]:
    """Nodes whose returned result is inconsistent with the latest graph.

    A result at version v is stale when some write in (v, t_s] covers the
    node, whether or not its new result has landed yet; UC states never
    count.
    """
    t_latest = event.meta_at_read.t_s
    stale: set[str] = set()
    for node, (kind, version) in event.states.items():
        if kind != "result":
            continue
        tss = updates_by_node.get(node)
        if not tss:
            continue
        lo = bisect_right(tss, version)
        hi = bisect_right(tss, t_latest)
        if hi > lo:
            stale.add(node)
    return stale


def stale_count(event: ReadEvent, updates_by_node: Mapping[str, list[int]]) -> int:
    return len(stale_nodes(event, updates_by_node))


@dataclass
class Interval:
    start_ms: float
    duration_ms: float
    uc_count: int
    stale_count: int


@dataclass
class MetricsReport:
    invisibility_ms: float = 0.0
    staleness_ms: float = 0.0
    intervals: list[Interval] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "invisibility_ms": self.invisibility_ms,
            "staleness_ms": self.staleness_ms,
            "intervals": [
                {
                    "start_ms": iv.start_ms,
                    "duration_ms": iv.duration_ms,
                    "uc_count": iv.uc_count,
                    "stale_count": iv.stale_count,
                }
                for iv in self.intervals
            ],
        }

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def to_csv(self) -> str:
        lines = ["interval_start_ms,uc_count,stale_count"]
        for iv in self.intervals:
            lines.append(f"{iv.start_ms:g},{iv.uc_count},{iv.stale_count}")
        return "\n".join(lines) + "\n"


def invisibility(trace: Trace) -> float:
    """Total view-milliseconds spent showing UC placeholders."""
    trace.check_ordered()
    total = 0.0
    events = trace.events
    for cur, nxt in zip(events, events[1:]):
        total += cur.uc_count() * (nxt.returned_at - cur.returned_at)
    return total


def require_version_history(trace: Trace) -> None:
    """Every version any event could reference must have a write record."""
    needed = max((ev.meta_at_read.t_s for ev in trace.events), default=0)
    have = {rec.ts for rec in trace.versions}
    missing = [v for v in range(1, needed + 1) if v not in have]
    if missing:
        raise MissingVersionHistory(f"no write records for versions {missing}")


def staleness(trace: Trace) -> float:
    """Total view-milliseconds spent showing outdated results."""
    require_version_history(trace)
    trace.check_ordered()
    updates = trace.updates_by_node()
    total = 0.0
    events = trace.events
    for cur, nxt in zip(events, events[1:]):
        total += stale_count(cur, updates) * (nxt.returned_at - cur.returned_at)
    return total


def compute_report(trace: Trace) -> MetricsReport:
    """Batch recomputation of both metrics with the per-interval series."""
    trace.check_ordered()
    updates = trace.updates_by_node()
    report = MetricsReport()
    events = trace.events
    for cur, nxt in zip(events, events[1:]):
        gap = nxt.returned_at - cur.returned_at
        ucs = cur.uc_count()
        stale = stale_count(cur, updates)
        report.intervals.append(Interval(cur.returned_at, gap, ucs, stale))
        report.invisibility_ms += ucs * gap
        report.staleness_ms += stale * gap
    return report


class MetricsAccumulator:
    """Streaming twin of :func:`compute_report`.

    Feed write begins and read events as they happen; totals equal the
    batch recomputation exactly at every point. Writes with timestamps
    newer than a read's latest graph can never mark that read stale, so
    the incremental node index is safe.
    """

    def __init__(self):
        import threading

        self._updates: dict[str, list[int]] = {}
        self._prev: ReadEvent | None = None
        self._prev_stale: int = 0
        self._lock = threading.Lock()
        self.report = MetricsReport()

    def write_started(self, ts: int, update_set: Iterable[str]) -> None:
        with self._lock:
            for node in update_set:
                tss = self._updates.setdefault(node, [])
                tss.insert(bisect_left(tss, ts), ts)

    def push(self, event: ReadEvent) -> None:
        with self._lock:
            prev = self._prev
            if prev is not None:
                gap = event.returned_at - prev.returned_at
                ucs = prev.uc_count()
                self.report.intervals.append(
                    Interval(prev.returned_at, gap, ucs, self._prev_stale)
                )
                self.report.invisibility_ms += ucs * gap
                self.report.staleness_ms += self._prev_stale * gap
            self._prev = event
            self._prev_stale = stale_count(event, self._updates)
