"""Command line entry point.

Subcommands: ``simulate`` (one config or a grid, emitting traces and a
results CSV), ``verify`` (theorem/property suites over fresh seeded
workloads, stored traces, or the impossibility counterexample),
``serve`` (the live HTTP demo), and ``replay`` (recompute metrics from a
stored trace). Exit codes: 0 success, 1 violations found, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .checker import DECLARED_PROPERTIES, check_orderings, check_trace
from .errors import ViewLensError
from .graph import load_spec
from .lenses import Lens
from .metrics import compute_report
from .simulator import (
    GridResult,
    config_from_dict,
    default_dashboard_spec,
    run_experiment,
    run_grid,
)
from .trace import Trace
from .workloads import (
    counterexample_outcomes,
    run_ordering_suite,
    run_property_suite,
)


def _cmd_simulate(args: argparse.Namespace) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if args.spec:
        raw["graph_spec"] = load_spec(args.spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    grid_axes = raw.get("grid")
    base = config_from_dict(raw.get("base", raw))
    if args.seed is not None:
        base = dataclasses.replace(base, seed=args.seed)

    if grid_axes:
        lenses = [Lens.parse(name, k) for name in grid_axes.get("lens", [base.lens.kind])
                  for k in (grid_axes.get("k") or [None])]
        seeds = grid_axes.get("seeds", [base.seed])
        if isinstance(seeds, int):
            seeds = list(range(base.seed, base.seed + seeds))
        result = run_grid(
            base,
            lenses=lenses,
            seeds=seeds,
            explore_ranges=grid_axes.get("explore_range"),
            viewport_sizes=grid_axes.get("viewport_size"),
            policies=grid_axes.get("policy"),
            behaviors=grid_axes.get("behavior"),
            refresh_intervals=grid_axes.get("refresh_interval_ms"),
        )
        aggregates = {
            "|".join(map(str, key)): {
                "invisibility_ms": result.aggregate("invisibility_ms")[key],
                "staleness_ms": stats,
            }
            for key, stats in result.aggregate("staleness_ms").items()
        }
        (out_dir / "aggregates.json").write_text(
            json.dumps(aggregates, indent=2, sort_keys=True) + "\n"
        )
    else:
        trace, report = run_experiment(base)
        trace_path = out_dir / "trace.jsonl"
        with open(trace_path, "w", encoding="utf-8") as fh:
            trace.dump_jsonl(fh)
        (out_dir / "metrics.json").write_text(report.to_json_str() + "\n")
        (out_dir / "metrics.csv").write_text(report.to_csv())
        result = GridResult(
            rows=[
                {
                    **base.to_meta(),
                    "invisibility_ms": report.invisibility_ms,
                    "staleness_ms": report.staleness_ms,
                }
            ]
        )
        print(f"trace: {trace_path}")
    csv_path = out_dir / "results.csv"
    csv_path.write_text(result.to_csv())
    print(f"results: {csv_path} ({len(result.rows)} rows)")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    if args.counterexample:
        if args.counterexample != "theorem3":
            print(f"unknown counterexample: {args.counterexample}", file=sys.stderr)
            return 2
        outcomes = counterexample_outcomes()
        expected = {
            "lcnb": [("monotonicity", "n5")],
            "lcmb": [("visibility", "n6")],
            "gcnb": [],
        }
        ok = True
        for lens_name, violations in sorted(outcomes.items()):
            got = [(v.kind, v.nodes[0]) for v in violations]
            match = got == expected[lens_name]
            ok = ok and match
            print(f"{lens_name}: expected {expected[lens_name]}, got {got}"
                  f" -> {'ok' if match else 'MISMATCH'}")
            for violation in violations:
                print("  " + json.dumps(violation.to_json()))
        return 0 if ok else 1

    if args.trace:
        violations = []
        for path in args.trace:
            with open(path, "r", encoding="utf-8") as fh:
                trace = Trace.from_jsonl(fh)
            lens_kind = trace.meta.get("lens")
            props = DECLARED_PROPERTIES.get(lens_kind, ("C",))
            for v in check_trace(trace, props):
                v.detail = f"[{path}] {v.detail}"
                violations.append(v)
        for violation in violations:
            print(json.dumps(violation.to_json()))
        print(f"{len(violations)} violation(s) across {len(args.trace)} trace(s)")
        return 1 if violations else 0

    # default: theorem + property suites over fresh random workloads
    n = args.seeds
    ordering = run_ordering_suite(n, base_seed=args.seed or 0)
    props = run_property_suite(n, base_seed=args.seed or 0)
    for violation in ordering.violations + props.violations:
        print(json.dumps(violation.to_json()))
    print(
        f"ordering: {ordering.workloads} workloads / {ordering.traces} traces, "
        f"{len(ordering.violations)} violation(s)"
    )
    print(
        f"properties: {props.workloads} workloads / {props.traces} traces, "
        f"{len(props.violations)} violation(s)"
    )
    return 0 if (ordering.ok and props.ok) else 1


def _cmd_serve(args: argparse.Namespace) -> int:
    from .server import serve_forever

    spec = load_spec(args.spec) if args.spec else default_dashboard_spec()
    ui_dir = args.ui if args.ui else None
    print(f"serving on port {args.port}" + (f", UI from {ui_dir}" if ui_dir else ""))
    try:
        serve_forever(
            spec, args.port, time_scale=args.time_scale, ui_dir=ui_dir,
            verbose=args.verbose,
        )
    except KeyboardInterrupt:
        pass
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    with open(args.trace, "r", encoding="utf-8") as fh:
        trace = Trace.from_jsonl(fh)
    report = compute_report(trace)
    print(report.to_json_str())
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="viewlens",
        description="Transactional view-refresh engine: simulate, verify, serve, replay.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_sim = sub.add_parser("simulate", help="run one experiment or a grid")
    p_sim.add_argument("--config", required=True, help="experiment config JSON")
    p_sim.add_argument("--spec", help="graph spec JSON (overrides config)")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.set_defaults(func=_cmd_simulate)

    p_ver = sub.add_parser("verify", help="run checker suites")
    p_ver.add_argument("--theorems", action="store_true",
                       help="ordering + property suites over random workloads")
    p_ver.add_argument("--seeds", type=int, default=20,
                       help="number of seeded workloads")
    p_ver.add_argument("--seed", type=int, default=0, help="base seed")
    p_ver.add_argument("--counterexample", metavar="NAME",
                       help="replay a known counterexample (theorem3)")
    p_ver.add_argument("--trace", nargs="*", help="stored trace files to check")
    p_ver.set_defaults(func=_cmd_verify)

    p_srv = sub.add_parser("serve", help="start the live demo server")
    p_srv.add_argument("--spec", help="graph spec JSON (default: bundled dashboard)")
    p_srv.add_argument("--port", type=int, default=8600)
    p_srv.add_argument("--time-scale", type=float, default=1.0,
                       help="wall seconds per simulated cost second")
    p_srv.add_argument("--ui", help="directory with the built browser UI")
    p_srv.add_argument("--verbose", action="store_true")
    p_srv.set_defaults(func=_cmd_serve)

    p_rep = sub.add_parser("replay", help="recompute metrics from a trace")
    p_rep.add_argument("--trace", required=True)
    p_rep.set_defaults(func=_cmd_replay)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ViewLensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
