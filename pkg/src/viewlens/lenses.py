"""Version-selection policies ("lenses") for read transactions.

A lens decides which graph version a read returns, trading freshness
against invisible (under-computation) views while honoring its declared
combination of monotonicity, visibility, and consistency. All functions
here are pure over a caller-provided MetaInfo snapshot plus latched
single-item reads, so they are trivially thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import EmptyViewport, UnknownLens
from .graph import T0, UC, ViewGraph

GCPB = "gcpb"
GCNB = "gcnb"
LCNB = "lcnb"
LCMB = "lcmb"
ICNB = "icnb"
KGCNB = "k-gcnb"
KLCNB = "k-lcnb"
KLCMB = "k-lcmb"

BASE_KINDS = (GCPB, GCNB, LCNB, LCMB, ICNB)
K_KINDS = (KGCNB, KLCNB, KLCMB)
ALL_KINDS = BASE_KINDS + K_KINDS


@dataclass(frozen=True)
class Lens:
    kind: str
    k: int = 0

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise UnknownLens(f"unknown lens: {self.kind!r}")
        if self.k < 0:
            raise UnknownLens(f"k must be non-negative, got {self.k}")
        if self.kind in BASE_KINDS and self.k != 0:
            object.__setattr__(self, "k", 0)  # base kinds ignore k

    @property
    def key(self) -> str:
        """Serialized form, e.g. ``gcpb`` or ``k-lcnb:2``."""
        return f"{self.kind}:{self.k}" if self.kind in K_KINDS else self.kind

    @staticmethod
    def parse(name: str, k: int | None = None) -> "Lens":
        name = name.strip().lower()
        if ":" in name:
            name, _, suffix = name.partition(":")
            if k is None:
                k = int(suffix)
        return Lens(name, k or 0)


@dataclass(frozen=True)
class MetaInfo:
    """Atomic snapshot of the engine's (t_c, t_s, c_uc) triple."""

    t_c: int
    t_s: int
    c_uc: int

    def as_dict(self) -> dict[str, int]:
        return {"t_c": self.t_c, "t_s": self.t_s, "c_uc": self.c_uc}


@dataclass(frozen=True)
class VersionChoice:
    """Either one graph version for the whole viewport, or per-node newest
    results (ICNB only), signalled by ``version is None``."""

    version: int | None

    @property
    def per_node(self) -> bool:
        return self.version is None


PER_NODE_NEWEST = VersionChoice(None)


def count_viewport_ucs(graph: ViewGraph, viewport: Iterable[str], version: int) -> int:
    """How many viewport nodes are under computation at ``version``."""
    nodes = list(viewport)
    if not nodes:
        raise EmptyViewport("viewport is empty")
    return sum(1 for n in nodes if graph.item_at(n, version).kind == UC)


def preserves_monotonicity(
    graph: ViewGraph,
    viewport: Iterable[str],
    version: int,
    last_read: Mapping[str, int],
) -> bool:
    """Would reading ``version`` hand back anything older than already seen?

    Absent LastRead entries count as T0, so a fresh engine preserves
    monotonicity vacuously; the newest version always does.
    """
    for node in viewport:
        if graph.item_at(node, version).version < last_read.get(node, T0):
            return False
    return True


def candidate_versions(meta: MetaInfo) -> list[int]:
    """Readable versions, newest first: t_c plus every in-flight write.

    Version timestamps are consecutive integers, so the in-flight set is
    exactly (t_c, t_s].
    """
    return list(range(meta.t_s, meta.t_c - 1, -1))


def select_version(
    lens: Lens,
    meta: MetaInfo,
    viewport: Iterable[str],
    last_read: Mapping[str, int],
    graph: ViewGraph,
) -> VersionChoice:
    """Apply the lens's selection rule to one read.

    GCPB reads the latest graph, GCNB the committed one, and k-GCNB the
    latest when its total UC count is within budget. ICNB ignores versions
    entirely and returns each node's newest result. The locally consistent
    lenses scan candidates newest-first for one whose viewport UC count is
    within budget (k = 0 for the base lenses); LCMB additionally filters
    candidates that would violate monotonicity and, if none survives with
    an acceptable UC count, falls back to the latest graph, which always
    preserves monotonicity.
    """
    viewport = list(viewport)
    kind = lens.kind
    if kind == GCPB:
        return VersionChoice(meta.t_s)
    if kind == GCNB:
        return VersionChoice(meta.t_c)
    if kind == KGCNB:
        return VersionChoice(meta.t_s if meta.c_uc <= lens.k else meta.t_c)
    if kind == ICNB:
        return PER_NODE_NEWEST

    budget = lens.k
    if kind in (LCNB, KLCNB):
        for version in candidate_versions(meta):
            if count_viewport_ucs(graph, viewport, version) <= budget:
                return VersionChoice(version)
        return VersionChoice(meta.t_c)  # unreachable: t_c always has 0 UCs

    # LCMB / k-LCMB
    for version in candidate_versions(meta):
        if not preserves_monotonicity(graph, viewport, version, last_read):
            break  # monotonicity-preserving candidates are up-closed
        if count_viewport_ucs(graph, viewport, version) <= budget:
            return VersionChoice(version)
    return VersionChoice(meta.t_s)
