"""Command line front end: run, replay, metrics, serve."""
from __future__ import annotations

import argparse
import json
import sys

from .metrics import compute_metrics, write_metrics_csv
from .runner import run_headless
from .scenario import ScenarioError, load_scenario
from .trace import RECORD_KINDS, canonical_json, load_trace, replay_snapshots


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pogoswarm",
        description="Deterministic Pogobot swarm simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario headless")
    run_p.add_argument("scenario")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.add_argument("--trace", default=None, help="write a JSON Lines trace here")
    run_p.add_argument("--metrics", default=None, help="write a metrics CSV here")
    run_p.add_argument("--until", type=float, default=None,
                       help="override the scenario duration, in seconds")

    replay_p = sub.add_parser("replay", help="reconstruct snapshots from a trace")
    replay_p.add_argument("trace")
    replay_p.add_argument("--kinds", default=None,
                          help="comma-separated record kinds to print instead")

    metrics_p = sub.add_parser("metrics", help="recompute metrics from a trace")
    metrics_p.add_argument("trace")
    metrics_p.add_argument("--out", default=None, help="CSV path (default stdout)")

    serve_p = sub.add_parser("serve", help="run paced, with the control endpoint")
    serve_p.add_argument("scenario")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--timescale", type=float, default=1.0,
                         help="sim seconds per wall second")
    serve_p.add_argument("--trace", default=None, help="record the session here")
    serve_p.add_argument("--frontend", default=None,
                         help="static directory to serve at / (operator console)")
    return parser


def _cmd_run(args) -> int:
    try:
        config = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        config.seed = args.seed
    if args.until is not None:
        config.duration_s = args.until
    try:
        result = run_headless(config, trace_path=args.trace,
                              metrics_path=args.metrics)
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 1
    print(f"ticks {result.ticks} wall {result.wall_seconds:.2f}s "
          f"records {result.trace_lines}")
    print(f"digest {result.digest}")
    return 0


def _cmd_replay(args) -> int:
    try:
        records, truncated = load_trace(args.trace)
    except OSError as exc:
        print(f"cannot read trace: {exc}", file=sys.stderr)
        return 1
    if truncated:
        last = records[-1]["tick"] if records else None
        print(f"warning: trace truncated; replaying through tick {last}",
              file=sys.stderr)
    if args.kinds:
        kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
        unknown = [k for k in kinds if k not in RECORD_KINDS]
        if unknown:
            print(f"unknown record kinds: {', '.join(unknown)}", file=sys.stderr)
            return 2
        for rec in records:
            if rec["kind"] in kinds:
                print(canonical_json(rec))
        return 0
    for snapshot in replay_snapshots(records):
        print(canonical_json(snapshot))
    return 0


def _cmd_metrics(args) -> int:
    try:
        records, truncated = load_trace(args.trace)
    except OSError as exc:
        print(f"cannot read trace: {exc}", file=sys.stderr)
        return 1
    if truncated:
        print("warning: trace truncated; metrics cover complete ticks only",
              file=sys.stderr)
    rows = compute_metrics(records)
    if args.out:
        write_metrics_csv(rows, args.out)
    else:
        print("metric,tick,value")
        for row in rows:
            value = int(row.value) if float(row.value).is_integer() else row.value
            print(f"{row.name},{row.tick},{value}")
    return 0


def _cmd_serve(args) -> int:
    try:
        config = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return 1
    if args.timescale <= 0:
        print("timescale must be positive", file=sys.stderr)
        return 2
    from .server import serve_control
    try:
        serve_control(config, host=args.host, port=args.port,
                      timescale=args.timescale, trace_path=args.trace,
                      frontend_dir=args.frontend)
    except (OSError, RuntimeError) as exc:
        print(f"cannot serve: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "run": _cmd_run,
        "replay": _cmd_replay,
        "metrics": _cmd_metrics,
        "serve": _cmd_serve,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
