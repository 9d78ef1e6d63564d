"""Refresh ordering inside a write transaction.

The write transaction walks topologically independent groups of its
update set; within a group the policy picks which view to recompute next.
The throughput-per-cost policy ("tp") ranks views by accumulated viewport
dwell time divided by estimated recompute cost, so views the user keeps
looking at and that finish quickly come first.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import ClockWentBackwards, EmptyGroup, UnknownNode, UnknownPolicy

TP = "tp"
NOOPT = "noopt"
ANTIFREEZE = "antifreeze"
METRICOPT = "metricopt"

POLICIES = (TP, NOOPT, ANTIFREEZE, METRICOPT)

COST_FLOOR_MS = 1.0  # divisor clamp; avoids blow-ups for near-zero costs


class DwellTracker:
    """Accumulated viewport dwell per node since one write began.

    Each read credits the interval since the previous read to the
    *previous* viewport (left-closed convention), then becomes the new
    reference point. Reader threads update the tracker; the writer worker
    consults it, so updates take a latch.
    """

    def __init__(self, write_ts: int, started_at: float):
        self.write_ts = write_ts
        self.dwell: dict[str, float] = {}
        self.last_event_at = started_at
        self.last_viewport: tuple[str, ...] = ()
        self._latch = threading.Lock()

    def record_read(self, viewport: Iterable[str], now: float) -> None:
        with self._latch:
            if now < self.last_event_at:
                raise ClockWentBackwards(
                    f"read at {now} precedes previous event at {self.last_event_at}"
                )
            gap = now - self.last_event_at
            if gap:
                for node in self.last_viewport:
                    self.dwell[node] = self.dwell.get(node, 0.0) + gap
            self.last_viewport = tuple(viewport)
            self.last_event_at = now

    def dwell_of(self, node: str) -> float:
        with self._latch:
            return self.dwell.get(node, 0.0)

    def snapshot(self) -> dict[str, float]:
        with self._latch:
            return dict(self.dwell)


@dataclass
class CostModel:
    """Per-node recompute cost estimates in milliseconds.

    ``known`` mode serves the graph-spec costs unchanged (simulator truth);
    ``ewma`` mode folds in measured refresh durations with alpha = 0.5,
    starting from the spec costs.
    """

    estimates: dict[str, float]
    mode: str = "known"
    alpha: float = 0.5

    def cost(self, node: str) -> float:
        if node not in self.estimates:
            raise UnknownNode(f"no cost estimate for {node!r}")
        return max(self.estimates[node], COST_FLOOR_MS)

    def observe(self, node: str, measured_ms: float) -> None:
        if self.mode != "ewma":
            return
        prev = self.estimates.get(node, measured_ms)
        self.estimates[node] = self.alpha * measured_ms + (1 - self.alpha) * prev


@dataclass
class Policy:
    kind: str = TP
    seed: int = 0
    _rng: random.Random = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise UnknownPolicy(f"unknown policy: {self.kind!r}")
        self._rng = random.Random(self.seed)


def priority(tracker: DwellTracker, costs: CostModel, node: str) -> float:
    """Scheduling priority: dwell time over clamped cost estimate."""
    return tracker.dwell_of(node) / costs.cost(node)


def next_view(
    policy: Policy,
    tracker: DwellTracker,
    costs: CostModel,
    current_group: Iterable[str],
) -> str:
    """Pick the next view to recompute from one topological group.

    tp maximizes dwell/cost, antifreeze minimizes cost, metricopt maximizes
    dwell, noopt draws uniformly (deterministic under its seed). Ties break
    toward the smaller cost, then the lexicographically smaller node id.
    """
    group = sorted(current_group)
    if not group:
        raise EmptyGroup("no views left in the current group")
    if policy.kind == NOOPT:
        return group[policy._rng.randrange(len(group))]
    dwell = tracker.snapshot()

    def tiebreak(node: str) -> tuple[float, str]:
        return (costs.cost(node), node)

    if policy.kind == TP:
        key = lambda n: (-(dwell.get(n, 0.0) / costs.cost(n)), *tiebreak(n))
    elif policy.kind == ANTIFREEZE:
        key = lambda n: tiebreak(n)
    else:  # METRICOPT
        key = lambda n: (-dwell.get(n, 0.0), *tiebreak(n))
    return min(group, key=key)
