"""Command-line client for partitioning, running, and estimating.

Every subcommand builds the same request model the HTTP service consumes
and either executes it in-process or, with ``--server``, sends it to a
running service.  Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys

from pydantic import ValidationError

from .service import ops, schemas


def _blocks_arg(text: str):
    if text == "auto":
        return "auto"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"--blocks expects an integer or 'auto', got {text!r}"
        ) from None
    return value


def _theta_arg(text: str):
    if text in ("auto", "inf"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"--theta expects a number, 'inf' or 'auto', got {text!r}"
        ) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmv",
        description="Partitioned generalized matrix-vector multiplication engine",
    )
    parser.add_argument(
        "--server",
        default=None,
        metavar="URL",
        help="send the request to a running service instead of executing locally",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="pre-partition an edge list into blocks")
    p.add_argument("--input", required=True, help="edge-list file (src dst [weight])")
    p.add_argument("--output", required=True, help="partition directory to create")
    p.add_argument("--blocks", type=_blocks_arg, default="auto")
    p.add_argument("--theta", type=_theta_arg, default="auto")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--memory-budget", type=int, default=None,
                   help="max vector elements per worker; drives --blocks auto")
    p.add_argument("--psi", choices=["hash", "range"], default="hash")

    r = sub.add_parser("run", help="run a graph algorithm over a partition directory")
    r.add_argument("--data", required=True)
    r.add_argument("--algorithm", required=True,
                   choices=["pagerank", "rwr", "sssp", "cc"])
    r.add_argument("--strategy", default="selective",
                   choices=["horizontal", "vertical", "selective", "hybrid"])
    r.add_argument("--iterations", type=int, default=20)
    r.add_argument("--epsilon", type=float, default=0.0)
    r.add_argument("--source", type=int, default=None,
                   help="source vertex (original id) for sssp/rwr")
    r.add_argument("--restart", type=float, default=0.15)
    r.add_argument("--theta", type=_theta_arg, default=None,
                   help="hybrid threshold override; 'auto' selects by cost model")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--workers", type=int, default=None, help="execution lanes")
    r.add_argument("--threads", action="store_true",
                   help="run worker lanes on real threads")
    r.add_argument("--report", default=None, help="where to write report.json")
    r.add_argument("--ledger-csv", default=None)
    r.add_argument("--ledger-json", default=None)

    e = sub.add_parser("estimate", help="expected per-iteration I/O for each strategy")
    e.add_argument("--data", required=True)
    e.add_argument("--theta-sweep", action="store_true")

    g = sub.add_parser("generate", help="synthesize graphs")
    gsub = g.add_subparsers(dest="generator", required=True)
    gr = gsub.add_parser("rmat", help="recursive-quadrant power-law generator")
    gr.add_argument("--scale", type=int, required=True, help="2^scale vertices")
    gr.add_argument("--edges", type=int, required=True,
                    help="edges to draw (duplicates collapse at partition time)")
    gr.add_argument("--a", type=float, default=0.57)
    gr.add_argument("--b", type=float, default=0.19)
    gr.add_argument("--c", type=float, default=0.19)
    gr.add_argument("--d", type=float, default=0.05)
    gr.add_argument("--seed", type=int, default=0)
    gr.add_argument("--output", required=True)

    s = sub.add_parser("stats", help="degree statistics of a partition directory")
    s.add_argument("--data", required=True)

    v = sub.add_parser("serve", help="start the HTTP service")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8080)

    return parser


def _emit(model) -> None:
    print(json.dumps(model.model_dump(), indent=2))


def _remote(server: str, method: str, path: str, payload=None, params=None) -> int:
    import httpx

    url = server.rstrip("/") + path
    try:
        if method == "GET":
            resp = httpx.get(url, params=params, timeout=600.0)
        else:
            resp = httpx.post(url, json=payload, timeout=600.0)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach {server}: {exc}", file=sys.stderr)
        return 2
    if resp.status_code == 422:
        print(f"error: {resp.text}", file=sys.stderr)
        return 1
    if resp.status_code != 200:
        print(f"error: {resp.text}", file=sys.stderr)
        return 2
    print(json.dumps(resp.json(), indent=2))
    return 0


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "partition":
        req = schemas.PartitionRequest(
            input=args.input, output=args.output, blocks=args.blocks,
            theta=args.theta, workers=args.workers,
            memory_budget=args.memory_budget, psi=args.psi,
        )
        if args.server:
            return _remote(args.server, "POST", "/partition", req.model_dump())
        _emit(ops.do_partition(req))
        return 0
    if args.command == "run":
        req = schemas.RunRequest(
            data=args.data, algorithm=args.algorithm, strategy=args.strategy,
            iterations=args.iterations, epsilon=args.epsilon, source=args.source,
            restart=args.restart, theta=args.theta, seed=args.seed,
            workers=args.workers, threads=args.threads, report=args.report,
            ledger_csv=args.ledger_csv, ledger_json=args.ledger_json,
        )
        if args.server:
            return _remote(args.server, "POST", "/run", req.model_dump())
        _emit(ops.do_run(req))
        return 0
    if args.command == "estimate":
        req = schemas.EstimateRequest(data=args.data, theta_sweep=args.theta_sweep)
        if args.server:
            return _remote(args.server, "POST", "/estimate", req.model_dump())
        _emit(ops.do_estimate(req))
        return 0
    if args.command == "generate":
        req = schemas.RmatRequest(
            scale=args.scale, edges=args.edges, a=args.a, b=args.b, c=args.c,
            d=args.d, seed=args.seed, output=args.output,
        )
        if args.server:
            return _remote(args.server, "POST", "/generate/rmat", req.model_dump())
        _emit(ops.do_generate_rmat(req))
        return 0
    if args.command == "stats":
        if args.server:
            return _remote(args.server, "GET", "/stats", params={"data": args.data})
        _emit(ops.do_stats(args.data))
        return 0
    if args.command == "serve":
        import uvicorn

        from .service.app import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0
    raise AssertionError(f"unhandled command {args.command}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage problems
        return 0 if exc.code == 0 else 1
    try:
        return _dispatch(args)
    except (ValidationError, ops.UsageError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ops.DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
