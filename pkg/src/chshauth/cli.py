"""Command line entry point: ``chshauth <command> [options]``.

Exit codes: 0 ok, 1 usage error, 2 protocol abort, 3 planning failure.
"""
from __future__ import annotations

import argparse
import base64
import json
import logging
import sys
from pathlib import Path

from . import authdb
from .planner import (
    MODES,
    PlanningError,
    build_level_table,
    check_no_overlap,
    plan_json,
    plan_params,
    table_csv,
)
from .protocol.adversary import parse_adversary
from .resource import Distributor
from .simulate import ENGINES, ConfigError, RunConfig, read_rows_csv, rows_csv, simulate, summarize
from .transport import DEFAULT_DISTRIBUTOR_PORT, DEFAULT_PORT, DEFAULT_TIMEOUT, TransportError, connect
from .messages import QueryRequest

EXIT_OK, EXIT_USAGE, EXIT_ABORT, EXIT_PLANNING = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _hostport(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}") from None


def _user_level(text: str) -> tuple[str, int]:
    uid, sep, level = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected USER=LEVEL, got {text!r}")
    return uid, int(level)


def _add_plan_args(p):
    p.add_argument("--lambda", dest="lam", type=int, default=128, help="security parameter (bits)")
    p.add_argument("--ell", type=int, default=2, help="number of authorization levels")
    p.add_argument("--mode", choices=MODES, default="paper")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chshauth", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="derive N and epsilon, check interval overlap")
    _add_plan_args(p)
    p.add_argument("--json", action="store_true")
    p.add_argument("--require-disjoint", action="store_true",
                   help="exit 3 when acceptance intervals overlap (implied by --mode strict)")

    p = sub.add_parser("table", help="print the level table with acceptance intervals")
    _add_plan_args(p)
    p.add_argument("--json", action="store_true")
    p.add_argument("--csv", type=Path)

    p = sub.add_parser("simulate", help="run repeated in-process sessions")
    _add_plan_args(p)
    p.add_argument("--level", type=int, default=1, help="true level of the user's resource")
    p.add_argument("--adversary", default="none",
                   help="none | classical | cross-level:K | fabricate | angles:B0,B1")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", dest="n_override", type=int, help="override the number of rounds")
    p.add_argument("--engine", choices=ENGINES, default="protocol")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", type=Path)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("serve", help="run the Authorizer")
    _add_plan_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--distributor", type=_hostport, default=("127.0.0.1", DEFAULT_DISTRIBUTOR_PORT))
    p.add_argument("--db", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)

    p = sub.add_parser("distribute", help="run the Distributor")
    p.add_argument("--ell", type=int, default=2)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_DISTRIBUTOR_PORT)
    p.add_argument("--user", dest="users", type=_user_level, action="append", default=[],
                   help="USER=LEVEL assignment (repeatable)")
    p.add_argument("--separable", action="append", default=[], help="user receiving product states")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("user", help="run a User session against an Authorizer")
    _add_plan_args(p)
    p.add_argument("--server", type=_hostport, default=("127.0.0.1", DEFAULT_PORT))
    p.add_argument("--distributor", type=_hostport, default=("127.0.0.1", DEFAULT_DISTRIBUTOR_PORT))
    p.add_argument("--user-id", default="user")
    p.add_argument("--level", type=int, required=True, help="level to request")
    p.add_argument("--adversary", default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--session-index", type=int, default=0)
    p.add_argument("--query", dest="queries", action="append", default=[], help="record id to read after a grant")
    p.add_argument("--transcript", type=Path, help="write the session transcript here")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("query", help="read a record under an existing grant")
    p.add_argument("--server", type=_hostport, default=("127.0.0.1", DEFAULT_PORT))
    p.add_argument("--session-id", required=True)
    p.add_argument("--record", required=True)

    p = sub.add_parser("stats", help="summarize a simulate CSV")
    p.add_argument("csv", type=Path)
    p.add_argument("--json", action="store_true")
    return parser


def _emit(obj, as_json: bool, text: str) -> None:
    print(json.dumps(obj, indent=2) if as_json else text)


def cmd_plan(args) -> int:
    table = build_level_table(args.ell)
    params = plan_params(args.lam, args.ell, args.mode, table)
    report = check_no_overlap(params, table)
    if args.json:
        print(json.dumps(plan_json(params, table), indent=2))
    else:
        print(f"mode={params.mode} lambda={params.lam} ell={params.ell} c={float(params.c):.6g} "
              f"N={params.N} mu={float(params.mu):g} epsilon={params.epsilon}")
        print(table_csv(params, table), end="")
        for pc in report.pairs:
            state = "disjoint" if pc.disjoint else "OVERLAP"
            print(f"levels {pc.lower}-{pc.upper}: {state} (margin {pc.margin})")
        where = "outside all intervals" if report.classical_outside else "INSIDE an acceptance interval"
        print(f"classical expectation {report.classical_expectation:g}: {where}")
        print("overlap check:", "pass" if report.passed else "fail")
    if (args.require_disjoint or args.mode == "strict") and not report.passed:
        return EXIT_PLANNING
    return EXIT_OK


def cmd_table(args) -> int:
    table = build_level_table(args.ell)
    params = plan_params(args.lam, args.ell, args.mode, table)
    text = table_csv(params, table)
    if args.csv:
        args.csv.write_text(text)
    if args.json:
        print(json.dumps(plan_json(params, table)["levels"], indent=2))
    else:
        print(text, end="")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = RunConfig(args.lam, args.ell, args.mode, args.level, args.adversary, args.runs, args.seed,
                    args.n_override, args.engine, args.workers)
    rows, summary = simulate(cfg)
    if args.csv:
        args.csv.write_text(rows_csv(rows))
    _emit(summary.to_dict(), args.json,
          f"runs={summary.runs} accepted={summary.accepted} acceptance_fraction={summary.acceptance_fraction:.4f} "
          f"mean_wins={summary.mean_wins:.2f} std_wins={summary.std_wins:.2f}")
    return EXIT_OK


def _announce(server, role: str) -> None:
    host, port = server.server_address[:2]
    print(f"{role} listening on {host}:{port}", flush=True)


def cmd_serve(args) -> int:
    from .roles import AuthorizerConfig, AuthorizerService, authorizer_server

    table = build_level_table(args.ell)
    params = plan_params(args.lam, args.ell, args.mode, table)
    db = authdb.load(args.db, args.ell) if args.db else None
    cfg = AuthorizerConfig(params, table, args.seed, args.distributor[0], args.distributor[1], db, args.timeout)
    with authorizer_server(args.host, args.port, AuthorizerService(cfg)) as server:
        _announce(server, "authorizer")
        server.serve_forever()
    return EXIT_OK


def cmd_distribute(args) -> int:
    from .roles import distributor_server

    table = build_level_table(args.ell)
    levels = dict(args.users)
    for uid, k in levels.items():
        table.level(k)
    dist = Distributor(table, args.seed, levels, {uid: 0.0 for uid in args.separable})
    with distributor_server(args.host, args.port, dist) as server:
        _announce(server, "distributor")
        server.serve_forever()
    return EXIT_OK


def cmd_user(args) -> int:
    from .roles import run_user

    table = build_level_table(args.ell)
    params = plan_params(args.lam, args.ell, args.mode, table)
    try:
        behavior, requested = parse_adversary(args.adversary, args.level)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        res = run_user(args.server[0], args.server[1], args.distributor[0], args.distributor[1], args.user_id,
                       requested or args.level, params, table, args.seed, args.session_index, behavior,
                       args.queries, args.timeout)
    except (OSError, TransportError) as exc:
        print(f"abort: transport: {exc}", file=sys.stderr)
        return EXIT_ABORT
    if args.transcript:
        args.transcript.write_bytes(res.transcript.to_json())
    queries = {rid: {"status": r.status, "data": r.data} for rid, r in res.queries.items()}
    out = {
        "phase": res.phase,
        "reason": res.reason,
        "granted_level": res.verdict.granted_level if res.verdict else None,
        "session_id": res.transcript.session_id,
        "wins": res.transcript.wins(),
        "queries": queries,
    }
    text = [f"phase={res.phase} granted_level={out['granted_level']} wins={out['wins']} reason={res.reason}"]
    for rid, q in queries.items():
        shown = base64.b64decode(q["data"]).decode("utf-8", "replace") if q["data"] else ""
        text.append(f"query {rid}: {q['status']} {shown}".rstrip())
    _emit(out, args.json, "\n".join(text))
    return EXIT_OK if res.phase == "done" else EXIT_ABORT


def cmd_query(args) -> int:
    try:
        ep = connect(*args.server)
        try:
            reply = ep.request(QueryRequest(args.session_id, args.record))
        finally:
            ep.close()
    except (OSError, TransportError) as exc:
        print(f"abort: transport: {exc}", file=sys.stderr)
        return EXIT_ABORT
    data = base64.b64decode(reply.data).decode("utf-8", "replace") if getattr(reply, "data", None) else ""
    print(f"{getattr(reply, 'status', reply.TYPE)} {data}".rstrip())
    return EXIT_OK if getattr(reply, "status", None) == "ok" else EXIT_ABORT


def cmd_stats(args) -> int:
    s = summarize(read_rows_csv(args.csv.read_text()))
    _emit(s.to_dict(), args.json,
          f"runs={s.runs} accepted={s.accepted} acceptance_fraction={s.acceptance_fraction:.4f} "
          f"mean_wins={s.mean_wins:.2f} std_wins={s.std_wins:.2f}")
    return EXIT_OK


COMMANDS = {
    "plan": cmd_plan, "table": cmd_table, "simulate": cmd_simulate, "serve": cmd_serve,
    "distribute": cmd_distribute, "user": cmd_user, "query": cmd_query, "stats": cmd_stats,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except PlanningError as exc:
        print(f"planning error: {exc}", file=sys.stderr)
        return EXIT_PLANNING
    except (ConfigError, authdb.LoadError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
