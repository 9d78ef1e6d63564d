"""Trace records: what every read returned, and the write/version history.

These are the substrate for the metrics module and the property checker.
Serialization is JSON lines: one typed record per line (``header``,
``write``, ``read``), so a trace file is self-contained.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, TextIO

from .errors import UnorderedTrace
from .lenses import Lens, MetaInfo


@dataclass
class ReadEvent:
    seq: int
    issued_at: float
    returned_at: float
    viewport: tuple[str, ...]
    lens: Lens
    chosen_version: int | None  # None: per-node newest result (icnb)
    states: dict[str, tuple[str, int]]  # node -> (kind, version)
    meta_at_read: MetaInfo

    def uc_count(self) -> int:
        return sum(1 for kind, _ in self.states.values() if kind == "uc")

    def to_json(self) -> dict[str, Any]:
        return {
            "type": "read",
            "seq": self.seq,
            "issued_ms": self.issued_at,
            "returned_ms": self.returned_at,
            "viewport": list(self.viewport),
            "lens": self.lens.kind,
            "k": self.lens.k,
            "chosen_version": self.chosen_version,
            "states": {n: list(s) for n, s in self.states.items()},
            "meta": self.meta_at_read.as_dict(),
        }

    @staticmethod
    def from_json(obj: Mapping[str, Any]) -> "ReadEvent":
        meta = obj["meta"]
        return ReadEvent(
            seq=obj["seq"],
            issued_at=obj["issued_ms"],
            returned_at=obj["returned_ms"],
            viewport=tuple(obj["viewport"]),
            lens=Lens(obj["lens"], obj.get("k", 0)),
            chosen_version=obj["chosen_version"],
            states={n: (s[0], s[1]) for n, s in obj["states"].items()},
            meta_at_read=MetaInfo(meta["t_c"], meta["t_s"], meta["c_uc"]),
        )


@dataclass
class VersionRecord:
    """One write transaction's footprint: when it began, what it touched,
    when each new result landed, and when it committed."""

    ts: int
    write_set: tuple[str, ...]
    update_set: tuple[str, ...]
    begin_at: float
    installs: dict[str, float] = field(default_factory=dict)
    commit_at: float | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "type": "write",
            "ts": self.ts,
            "write_set": list(self.write_set),
            "update_set": list(self.update_set),
            "begin_ms": self.begin_at,
            "installs": dict(self.installs),
            "commit_ms": self.commit_at,
        }

    @staticmethod
    def from_json(obj: Mapping[str, Any]) -> "VersionRecord":
        return VersionRecord(
            ts=obj["ts"],
            write_set=tuple(obj["write_set"]),
            update_set=tuple(obj["update_set"]),
            begin_at=obj["begin_ms"],
            installs=dict(obj["installs"]),
            commit_at=obj["commit_ms"],
        )


@dataclass
class Trace:
    graph_spec: dict[str, Any] | None = None
    meta: dict[str, Any] = field(default_factory=dict)  # lens/policy/seed/...
    events: list[ReadEvent] = field(default_factory=list)
    versions: list[VersionRecord] = field(default_factory=list)

    def append(self, event: ReadEvent) -> None:
        if self.events and event.returned_at < self.events[-1].returned_at:
            raise UnorderedTrace(
                f"event {event.seq} returned at {event.returned_at}, before "
                f"the previous event at {self.events[-1].returned_at}"
            )
        self.events.append(event)

    def check_ordered(self) -> None:
        last = None
        for ev in self.events:
            if last is not None and ev.returned_at < last:
                raise UnorderedTrace(f"event {ev.seq} out of order")
            last = ev.returned_at

    def updates_by_node(self) -> dict[str, list[int]]:
        """Node -> sorted write timestamps that (re)computed it."""
        out: dict[str, list[int]] = {}
        for rec in self.versions:
            for node in rec.update_set:
                out.setdefault(node, []).append(rec.ts)
        for tss in out.values():
            tss.sort()
        return out

    # -- serialization -----------------------------------------------------

    def dump_jsonl(self, fh: TextIO) -> None:
        header = {"type": "header", "graph": self.graph_spec, **self.meta}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in self.versions:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
        for ev in self.events:
            fh.write(json.dumps(ev.to_json(), sort_keys=True) + "\n")

    def to_jsonl(self) -> str:
        import io

        buf = io.StringIO()
        self.dump_jsonl(buf)
        return buf.getvalue()

    @staticmethod
    def from_jsonl(lines: Iterable[str]) -> "Trace":
        trace = Trace()
        for line in lines:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            kind = obj.get("type")
            if kind == "header":
                trace.graph_spec = obj.get("graph")
                trace.meta = {
                    k: v for k, v in obj.items() if k not in ("type", "graph")
                }
            elif kind == "write":
                trace.versions.append(VersionRecord.from_json(obj))
            elif kind == "read":
                trace.events.append(ReadEvent.from_json(obj))
        return trace
