"""Command-line front end: a thin client over the scenario service.

By default the service app is mounted in-process, so `run`, `corpus` and
`sweep` work without a daemon; `--server URL` points at a remote instance
instead. `serve` starts the HTTP server.

Exit codes: 0 success; 2 scenario parse/validation error; 3 physics-engine
error; 4 tolerance (expectation) failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .client import ServiceClient
from .reports import emit_report, emit_table

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PHYSICS = 3
EXIT_TOLERANCE = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holonomy-lab",
        description="Geometric phases and holonomies: scenario runner and service client")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario file")
    run.add_argument("file", type=Path)
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.add_argument("--out", type=Path, default=None)
    run.add_argument("--seed", type=int, default=None)

    corpus = sub.add_parser("corpus", help="run every shipped scenario")
    corpus.add_argument("--format", choices=("json", "csv"), default="json")
    corpus.add_argument("--out", type=Path, default=None,
                        help="directory for per-scenario reports")
    corpus.add_argument("--seed", type=int, default=None)
    corpus.add_argument("--jobs", type=int, default=1)

    sweep = sub.add_parser("sweep", help="vary one parameter over a grid")
    sweep.add_argument("file", type=Path)
    sweep.add_argument("--param", required=True,
                       help="dotted path (bare names resolve under [params])")
    grid = sweep.add_mutually_exclusive_group(required=True)
    grid.add_argument("--values", default=None,
                      help="comma-separated values (angle strings allowed)")
    grid.add_argument("--grid", default=None, metavar="START:STOP:COUNT",
                      help="linear grid over COUNT points")
    sweep.add_argument("--format", choices=("json", "csv"), default="csv")
    sweep.add_argument("--out", type=Path, default=None)
    sweep.add_argument("--seed", type=int, default=None)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8707)
    return parser


def _fail(status: int, data) -> int:
    category = data.get("category", "internal") if isinstance(data, dict) else "internal"
    error = data.get("error", "") if isinstance(data, dict) else ""
    detail = data.get("detail", str(data)) if isinstance(data, dict) else str(data)
    print(f"error ({category}): {error}: {detail}", file=sys.stderr)
    if status == 422 or category == "validation":
        return EXIT_INPUT
    if status == 409 or category == "physics":
        return EXIT_PHYSICS
    return 1


def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _read_document(path: Path):
    try:
        return path.read_text(encoding="utf-8"), None
    except OSError as exc:
        print(f"error (validation): cannot read {path}: {exc}", file=sys.stderr)
        return None, EXIT_INPUT


def _cmd_run(args, client: ServiceClient) -> int:
    document, err = _read_document(args.file)
    if err:
        return err
    status, data = client.run_scenario(document, seed=args.seed)
    if status != 200:
        return _fail(status, data)
    _write(emit_report(data, args.format), args.out)
    if not data["passed"]:
        for exp in data["expectations"]:
            if not exp["passed"]:
                print(f"tolerance failure: {data['scenario_id']}: {exp['name']} = "
                      f"{exp['actual']} (expected {exp['expected']} "
                      f"+- {exp['tol']}, {exp['mode']})", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def _cmd_corpus(args, client: ServiceClient) -> int:
    status, data = client.corpus(jobs=args.jobs, seed=args.seed)
    if status != 200:
        return _fail(status, data)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
    for entry in data["results"]:
        report = entry["report"]
        mark = "PASS" if report["passed"] else "FAIL"
        print(f"{mark} {report['scenario_id']}")
        for exp in report["expectations"]:
            if not exp["passed"]:
                print(f"     {exp['name']} = {exp['actual']} "
                      f"(expected {exp['expected']} +- {exp['tol']}, {exp['mode']})")
        if args.out is not None:
            path = args.out / f"{entry['name']}.{args.format}"
            path.write_text(emit_report(report, args.format), encoding="utf-8")
    n = len(data["results"])
    n_pass = sum(e["report"]["passed"] for e in data["results"])
    print(f"{n_pass}/{n} scenarios passed")
    return EXIT_OK if data["all_passed"] else EXIT_TOLERANCE


def _parse_grid(args):
    if args.values is not None:
        out = []
        for tok in args.values.split(","):
            tok = tok.strip()
            try:
                out.append(float(tok))
            except ValueError:
                out.append(tok)  # angle strings are parsed server-side
        return out
    start, stop, count = args.grid.split(":")
    count = int(count)
    if count < 1:
        raise ValueError("grid COUNT must be >= 1")
    start, stop = float(start), float(stop)
    if count == 1:
        return [start]
    step = (stop - start) / (count - 1)
    return [start + k * step for k in range(count)]


def _cmd_sweep(args, client: ServiceClient) -> int:
    document, err = _read_document(args.file)
    if err:
        return err
    try:
        values = _parse_grid(args)
    except ValueError as exc:
        print(f"error (validation): bad grid: {exc}", file=sys.stderr)
        return EXIT_INPUT
    status, data = client.sweep(document, args.param, values, seed=args.seed)
    if status != 200:
        return _fail(status, data)
    _write(emit_table(data["rows"], args.format), args.out)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "serve":
        return _cmd_serve(args)
    client = ServiceClient(server=args.server)
    try:
        if args.command == "run":
            return _cmd_run(args, client)
        if args.command == "corpus":
            return _cmd_corpus(args, client)
        return _cmd_sweep(args, client)
    except Exception as exc:  # connection problems, unexpected faults
        print(f"error (internal): {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
