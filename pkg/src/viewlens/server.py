"""HTTP facade over one live engine for the browser dashboard.

Single-user model: one active session per server. Request handlers run on
a thread per request (stdlib ThreadingHTTPServer); one dedicated writer
worker executes refreshes, sleeping each view's cost (scaled by
``time_scale``) to emulate computation. Clients poll `/read` with their
viewport; every poll is one engine read transaction, so the live metrics
equal a batch recomputation over the exported trace.

Endpoints (JSON over HTTP), all carrying ``meta: {t_c, t_s, c_uc}``:
POST /dashboard, GET /dashboard, GET /read?nodes=..., POST /refresh,
POST /configure, GET /metrics, GET /trace (JSON lines).
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .engine import Engine, RUNNING
from .errors import (
    ConfigInvalid,
    EmptyViewport,
    EmptyWriteSet,
    UnknownLens,
    UnknownNode,
    ViewLensError,
    WriteInProgress,
)
from .graph import build_graph
from .lenses import Lens
from .metrics import stale_nodes
from .scheduler import POLICIES, CostModel, Policy


class DashboardSession:
    """One engine plus the user-facing configuration knobs."""

    def __init__(self, graph_spec: dict, time_scale: float = 1.0):
        self.graph_spec = graph_spec
        self.graph = build_graph(graph_spec)
        self._started = time.monotonic()
        # Live mode estimates per-view cost from measured refresh durations
        # (EWMA seeded with the spec costs); the scheduler consults the
        # estimates while the worker executes the true costs.
        self.engine = Engine(
            self.graph,
            policy=Policy("tp"),
            costs=CostModel(dict(self.graph.costs), mode="ewma"),
            graph_spec=graph_spec,
            clock=self.now,
        )
        self.engine.trace.meta = {"mode": "live"}
        self.lens = Lens("gcpb")
        self.time_scale = time_scale
        self.layout = [n for n in self.graph.node_ids if n not in self.graph.base_nodes]
        self.per_row = 2
        self.periodic_interval_ms: int | None = None
        self._config_latch = threading.Lock()
        self._wake = threading.Event()
        self._stop = threading.Event()
        self._worker = threading.Thread(target=self._write_loop, daemon=True)
        self._worker.start()
        self._timer = threading.Thread(target=self._periodic_loop, daemon=True)
        self._timer.start()

    def now(self) -> float:
        return (time.monotonic() - self._started) * 1000.0

    def close(self) -> None:
        self._stop.set()
        self._wake.set()

    # -- write path ---------------------------------------------------------

    def refresh(self, write_set: list[str] | None) -> int:
        nodes = write_set or sorted(self.graph.base_nodes)
        if not nodes:
            raise EmptyWriteSet("dashboard has no base nodes")
        txn = self.engine.begin_write(nodes, self.now())
        self._wake.set()
        return txn.ts

    def _write_loop(self) -> None:
        while not self._stop.is_set():
            self._wake.wait(timeout=0.05)
            self._wake.clear()
            while not self._stop.is_set():
                running = self.engine.running_writes()
                if not running:
                    break
                txn = running[0]
                while txn.status == RUNNING and not self._stop.is_set():
                    if txn.exhausted:
                        self.engine.commit_write(txn, self.now())
                        break
                    node, _estimate = self.engine.next_node(txn)
                    begun = time.monotonic()
                    time.sleep(self.graph.costs[node] * self.time_scale / 1000.0)
                    measured_ms = (time.monotonic() - begun) * 1000.0
                    self.engine.complete_node(txn, node, self.now())
                    # fold the measured duration back into model-time units
                    self.engine.costs.observe(
                        node, measured_ms / max(self.time_scale, 1e-9)
                    )

    def _periodic_loop(self) -> None:
        next_fire: float | None = None
        interval_seen: int | None = None
        while not self._stop.is_set():
            time.sleep(0.025)
            interval = self.periodic_interval_ms
            if interval is None:
                next_fire, interval_seen = None, None
                continue
            if interval != interval_seen:
                interval_seen = interval
                next_fire = self.now() + interval
            if next_fire is not None and self.now() >= next_fire:
                next_fire += interval
                try:
                    self.refresh(None)
                except ViewLensError:
                    pass

    # -- read path ----------------------------------------------------------

    def read(self, nodes: list[str]) -> dict:
        event = self.engine.read(nodes, self.lens, self.now())
        stale = stale_nodes(event, self.engine.trace.updates_by_node())
        states = []
        for node in event.viewport:
            kind, version = event.states[node]
            states.append(
                {
                    "id": node,
                    "kind": kind,
                    "version": version,
                    "stale": node in stale,
                    "payload": f"{node}@v{version}" if kind == "result" else None,
                }
            )
        report = self.engine.accumulator.report
        return {
            "states": states,
            "lens": self.lens.kind,
            "k": self.lens.k,
            "chosen_version": event.chosen_version,
            "meta": event.meta_at_read.as_dict(),
            "metrics": {
                "invisibility_ms": report.invisibility_ms,
                "staleness_ms": report.staleness_ms,
            },
        }

    # -- configuration ---------------------------------------------------------

    def configure(self, body: dict) -> dict:
        with self._config_latch:
            if self.engine.has_running_write():
                raise WriteInProgress("cannot change configuration mid-write")
            if "lens" in body:
                lens = Lens.parse(str(body["lens"]), body.get("k"))
                if lens != self.lens:
                    self.engine.clear_last_read()  # fresh monotonicity floors
                self.lens = lens
            elif "k" in body:
                lens = Lens(self.lens.kind, int(body["k"]))
                if lens != self.lens:
                    self.engine.clear_last_read()
                self.lens = lens
            if "policy" in body:
                policy = str(body["policy"])
                if policy not in POLICIES:
                    raise ConfigInvalid(f"unknown policy: {policy!r}")
                self.engine.policy = Policy(policy)
            if "periodic_interval_ms" in body:
                raw = body["periodic_interval_ms"]
                self.periodic_interval_ms = int(raw) if raw else None
        return self.describe_config()

    def describe_config(self) -> dict:
        return {
            "lens": self.lens.kind,
            "k": self.lens.k,
            "policy": self.engine.policy.kind,
            "periodic_interval_ms": self.periodic_interval_ms,
        }


class _Handler(BaseHTTPRequestHandler):
    server_version = "viewlens"

    # -- plumbing -------------------------------------------------------------

    def _session(self) -> DashboardSession | None:
        return self.server.session  # type: ignore[attr-defined]

    def _send_json(self, obj: dict, status: int = 200) -> None:
        payload = json.dumps(obj).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(payload)

    def _error(self, status: int, message: str) -> None:
        self._send_json({"error": message}, status=status)

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if not length:
            return {}
        return json.loads(self.rfile.read(length) or b"{}")

    def log_message(self, fmt, *args):  # quiet by default
        if getattr(self.server, "verbose", False):
            super().log_message(fmt, *args)

    def _meta(self, session: DashboardSession) -> dict:
        return session.engine.snapshot_meta().as_dict()

    # -- routes --------------------------------------------------------------

    def do_GET(self) -> None:
        parsed = urlparse(self.path)
        route = parsed.path.rstrip("/") or "/"
        session = self._session()
        try:
            if route == "/dashboard":
                if session is None:
                    return self._error(409, "no dashboard loaded")
                return self._send_json(
                    {
                        "layout": session.layout,
                        "per_row": session.per_row,
                        "base_nodes": sorted(session.graph.base_nodes),
                        "config": session.describe_config(),
                        "meta": self._meta(session),
                    }
                )
            if route == "/read":
                if session is None:
                    return self._error(409, "no dashboard loaded")
                query = parse_qs(parsed.query)
                raw = ",".join(query.get("nodes", []))
                nodes = [n for n in raw.split(",") if n]
                response = session.read(nodes)
                return self._send_json(response)
            if route == "/metrics":
                if session is None:
                    return self._error(409, "no dashboard loaded")
                report = session.engine.accumulator.report
                return self._send_json(
                    {**report.to_json(), "meta": self._meta(session)}
                )
            if route == "/trace":
                if session is None:
                    return self._error(409, "no dashboard loaded")
                payload = session.engine.trace.to_jsonl().encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/x-ndjson")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)
                return None
            if self._serve_static(route):
                return None
            return self._error(404, f"no such route: {route}")
        except WriteInProgress as exc:
            return self._error(409, str(exc))
        except ViewLensError as exc:
            return self._error(400, str(exc))

    def do_POST(self) -> None:
        route = urlparse(self.path).path.rstrip("/")
        session = self._session()
        try:
            body = self._body()
            if route == "/dashboard":
                session = DashboardSession(
                    body, time_scale=getattr(self.server, "time_scale", 1.0)
                )
                old, self.server.session = self.server.session, session  # type: ignore[attr-defined]
                if old is not None:
                    old.close()
                return self._send_json(
                    {
                        "layout": session.layout,
                        "per_row": session.per_row,
                        "meta": self._meta(session),
                    },
                    status=201,
                )
            if session is None:
                return self._error(409, "no dashboard loaded")
            if route == "/refresh":
                ts = session.refresh(body.get("write_set"))
                return self._send_json(
                    {"version": ts, "meta": self._meta(session)}, status=202
                )
            if route == "/configure":
                applied = session.configure(body)
                return self._send_json({**applied, "meta": self._meta(session)})
            return self._error(404, f"no such route: {route}")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            return self._error(400, f"bad request: {exc}")
        except WriteInProgress as exc:
            return self._error(409, str(exc))
        except ViewLensError as exc:  # bad specs, unknown nodes/lenses, ...
            return self._error(400, str(exc))

    # -- static UI -------------------------------------------------------------

    def _serve_static(self, route: str) -> bool:
        root = getattr(self.server, "ui_dir", None)
        if root is None:
            return False
        rel = "index.html" if route == "/" else route.lstrip("/")
        target = (Path(root) / rel).resolve()
        if not str(target).startswith(str(Path(root).resolve())) or not target.is_file():
            return False
        content_types = {
            ".html": "text/html",
            ".js": "application/javascript",
            ".css": "text/css",
            ".json": "application/json",
        }
        payload = target.read_bytes()
        self.send_response(200)
        self.send_header(
            "Content-Type", content_types.get(target.suffix, "application/octet-stream")
        )
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)
        return True


class DashboardServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(
        self,
        address: tuple[str, int] = ("127.0.0.1", 0),
        graph_spec: dict | None = None,
        time_scale: float = 1.0,
        ui_dir: str | None = None,
        verbose: bool = False,
    ):
        super().__init__(address, _Handler)
        self.time_scale = time_scale
        self.ui_dir = ui_dir
        self.verbose = verbose
        self.session: DashboardSession | None = (
            DashboardSession(graph_spec, time_scale) if graph_spec else None
        )

    @property
    def port(self) -> int:
        return self.server_address[1]

    def shutdown_session(self) -> None:
        if self.session is not None:
            self.session.close()


def serve_forever(
    graph_spec: dict,
    port: int,
    time_scale: float = 1.0,
    ui_dir: str | None = None,
    verbose: bool = False,
) -> None:
    server = DashboardServer(
        ("0.0.0.0", port), graph_spec, time_scale, ui_dir, verbose
    )
    try:
        server.serve_forever()
    finally:
        server.shutdown_session()
