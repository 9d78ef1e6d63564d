"""Multi-versioned DAG of views.

Each node owns an ordered *item list*: computed results and
under-computation (UC) placeholders, one per graph version that touched
the node. Versions are logical integers assigned by the engine; version
``T0 = 0`` is fully materialized at build time, so every node always has
at least one result and reads at any version are total.

Item lists are append-only except for the in-place UC -> result
replacement, and each list is guarded by a per-node latch. The node/edge
structure is immutable after :func:`build_graph`.
"""

from __future__ import annotations

import json
import threading
from bisect import bisect_right
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from .errors import (
    ConfigInvalid,
    CycleDetected,
    DuplicateNode,
    NoMatchingUC,
    StaleVersion,
    UnknownNode,
    ViewLensError,
)

RESULT = "result"
UC = "uc"

T0 = 0


@dataclass
class Item:
    """One entry in a node's item list: a result or a UC placeholder."""

    version: int
    kind: str
    payload: Any = None
    cost_ms: float | None = None

    @property
    def is_result(self) -> bool:
        return self.kind == RESULT

    def as_state(self) -> tuple[str, int]:
        """(kind, version) pair, the shape recorded in read events."""
        return (self.kind, self.version)


class _Node:
    __slots__ = ("id", "items", "latch")

    def __init__(self, node_id: str, initial_payload: Any, cost_ms: float):
        self.id = node_id
        self.items: list[Item] = [Item(T0, RESULT, initial_payload, cost_ms)]
        self.latch = threading.Lock()


class ViewGraph:
    """A DAG of views with per-node multi-versioned item lists."""

    def __init__(
        self,
        node_ids: list[str],
        edges: set[tuple[str, str]],
        costs: dict[str, float],
    ):
        self._nodes: dict[str, _Node] = {
            nid: _Node(nid, f"{nid}@v{T0}", costs[nid]) for nid in node_ids
        }
        self.edges = frozenset(edges)
        self.costs = dict(costs)
        self._succs: dict[str, list[str]] = {nid: [] for nid in node_ids}
        self._preds: dict[str, list[str]] = {nid: [] for nid in node_ids}
        for prec, dep in sorted(edges):
            self._succs[prec].append(dep)
            self._preds[dep].append(prec)
        self.base_nodes = frozenset(n for n in node_ids if not self._preds[n])

    # -- structure ---------------------------------------------------------

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    @property
    def node_ids(self) -> list[str]:
        return list(self._nodes)

    def _require(self, node_id: str) -> _Node:
        node = self._nodes.get(node_id)
        if node is None:
            raise UnknownNode(f"no such node: {node_id!r}")
        return node

    def predecessors(self, node_id: str) -> list[str]:
        self._require(node_id)
        return list(self._preds[node_id])

    def dependents(self, sources: Iterable[str]) -> set[str]:
        """All nodes reachable via one or more edges from ``sources``.

        The sources themselves are excluded (the graph is acyclic, so a
        source is never its own dependent).
        """
        frontier = [self._require(s).id for s in sources]
        seen: set[str] = set()
        while frontier:
            nxt = frontier.pop()
            for dep in self._succs[nxt]:
                if dep not in seen:
                    seen.add(dep)
                    frontier.append(dep)
        return seen

    def topo_groups(self, targets: Iterable[str]) -> list[list[str]]:
        """Partition ``targets`` into predecessor-closed strata.

        Group ``i`` holds exactly the targets whose in-target predecessors
        all sit in groups ``< i``; concatenating the groups yields a valid
        topological order of the targets, and no target in a group precedes
        another in the same group.
        """
        target_set = {self._require(t).id for t in targets}
        depth: dict[str, int] = {}

        def resolve(node: str) -> int:
            # Iterative DFS: the acyclic invariant bounds the stack.
            stack = [node]
            while stack:
                cur = stack[-1]
                if cur in depth:
                    stack.pop()
                    continue
                pending = [
                    p for p in self._preds[cur] if p in target_set and p not in depth
                ]
                if pending:
                    stack.extend(pending)
                    continue
                in_target = [depth[p] for p in self._preds[cur] if p in target_set]
                depth[cur] = max(in_target) + 1 if in_target else 0
                stack.pop()
            return depth[node]

        for t in target_set:
            resolve(t)
        if not target_set:
            return []
        groups: list[list[str]] = [[] for _ in range(max(depth.values()) + 1)]
        for t in sorted(target_set):
            groups[depth[t]].append(t)
        return groups

    # -- item lists --------------------------------------------------------

    def mark_under_computation(self, node_id: str, version: int) -> str:
        """Append a UC placeholder at ``version`` to the node's item list.

        Returns the kind of the previous trailing item, atomically with the
        append, so the caller can maintain the latest-graph UC count.
        """
        node = self._require(node_id)
        with node.latch:
            prev = node.items[-1]
            if version <= prev.version:
                raise StaleVersion(
                    f"{node_id}: version {version} is not newer than {prev.version}"
                )
            node.items.append(Item(version, UC))
            return prev.kind

    def install_result(
        self, node_id: str, version: int, payload: Any, cost_ms: float
    ) -> str:
        """Replace the UC at exactly ``version`` with a computed result.

        The placeholder need not be the trailing item: queued writes may
        have stacked newer UCs above it. Returns the kind of the trailing
        item after the replacement, atomically, for UC-count bookkeeping.
        """
        node = self._require(node_id)
        with node.latch:
            idx = self._index_at(node, version)
            if idx < 0 or node.items[idx].version != version:
                raise NoMatchingUC(f"{node_id}: no item at version {version}")
            if node.items[idx].kind != UC:
                raise NoMatchingUC(
                    f"{node_id}: item at version {version} is already a result"
                )
            node.items[idx] = Item(version, RESULT, payload, cost_ms)
            return node.items[-1].kind

    @staticmethod
    def _index_at(node: _Node, version: int) -> int:
        versions = [it.version for it in node.items]
        return bisect_right(versions, version) - 1

    def item_at(self, node_id: str, version: int) -> Item:
        """The item with the largest version <= ``version`` at this node.

        Total for every version >= T0 as long as garbage collection has not
        advanced past ``version``.
        """
        node = self._require(node_id)
        with node.latch:
            idx = self._index_at(node, version)
            if idx < 0:
                raise ViewLensError(
                    f"{node_id}: no item at or below version {version} "
                    "(read below the GC watermark?)"
                )
            return node.items[idx]

    def newest_result(self, node_id: str) -> Item:
        """The most recent computed result, skipping UC placeholders."""
        node = self._require(node_id)
        with node.latch:
            for item in reversed(node.items):
                if item.kind == RESULT:
                    return item
        raise ViewLensError(f"{node_id}: no result item (collected by GC?)")

    def tail_kind(self, node_id: str) -> str:
        node = self._require(node_id)
        with node.latch:
            return node.items[-1].kind

    def items_snapshot(self, node_id: str) -> list[Item]:
        node = self._require(node_id)
        with node.latch:
            return list(node.items)

    def collect_garbage(self, watermark: int) -> int:
        """Drop items no read at version >= ``watermark`` can ever return.

        Per node, keeps the newest item with version <= watermark (the
        retained floor: reading exactly the watermark must still succeed)
        plus everything newer. Idempotent.
        """
        removed = 0
        for node in self._nodes.values():
            with node.latch:
                floor = self._index_at(node, watermark)
                if floor > 0:
                    del node.items[:floor]
                    removed += floor
        return removed


def build_graph(spec: Mapping[str, Any]) -> ViewGraph:
    """Build a fully materialized graph from a specification mapping.

    Spec shape: ``{"nodes": [{"id": "n1", "cost_ms": 0, "base": true}, ...],
    "edges": [["n1", "n3"], ...]}``. Every node starts with one result at
    version T0.
    """
    raw_nodes = spec.get("nodes")
    if not raw_nodes:
        raise ConfigInvalid("graph spec declares no nodes")
    node_ids: list[str] = []
    costs: dict[str, float] = {}
    declared_base: set[str] = set()
    for entry in raw_nodes:
        nid = entry["id"]
        if not nid:
            raise ConfigInvalid("empty node id")
        if nid in costs:
            raise DuplicateNode(f"node declared twice: {nid!r}")
        node_ids.append(nid)
        costs[nid] = float(entry.get("cost_ms", 0.0))
        if entry.get("base"):
            declared_base.add(nid)

    edges: set[tuple[str, str]] = set()
    for prec, dep in spec.get("edges", []):
        for endpoint in (prec, dep):
            if endpoint not in costs:
                raise UnknownNode(f"edge references undeclared node: {endpoint!r}")
        edges.add((prec, dep))

    _check_acyclic(node_ids, edges)

    graph = ViewGraph(node_ids, edges, costs)
    for nid in declared_base:
        if nid not in graph.base_nodes:
            raise ConfigInvalid(f"node {nid!r} is flagged base but has predecessors")
    return graph


def _check_acyclic(node_ids: list[str], edges: set[tuple[str, str]]) -> None:
    indeg = {n: 0 for n in node_ids}
    succs: dict[str, list[str]] = {n: [] for n in node_ids}
    for prec, dep in edges:
        indeg[dep] += 1
        succs[prec].append(dep)
    ready = [n for n in node_ids if indeg[n] == 0]
    visited = 0
    while ready:
        cur = ready.pop()
        visited += 1
        for dep in succs[cur]:
            indeg[dep] -= 1
            if indeg[dep] == 0:
                ready.append(dep)
    if visited != len(node_ids):
        stuck = sorted(n for n in node_ids if indeg[n] > 0)
        raise CycleDetected(f"edge set is not a DAG; cycle through {stuck}")


def load_spec(path: str) -> dict[str, Any]:
    """Read a graph specification JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
