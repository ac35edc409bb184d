"""Networked roles: Distributor and Authorizer servers, User client."""
from __future__ import annotations

import base64
import itertools
import logging
import threading
from dataclasses import dataclass

from . import authdb
from .messages import Abort, MeasureReply, MeasureRequest, ProvisionReply, ProvisionRequest, QueryReply, QueryRequest
from .planner import LevelTable, ProtocolParams
from .protocol.adversary import Honest, UserBehavior
from .protocol.machines import TIMEOUT, AuthorizerMachine, UserMachine
from .protocol.transcript import Transcript
from .resource import Distributor, ResourceError
from .seeding import role_rng
from .transport import (
    DEFAULT_TIMEOUT,
    ChannelClosed,
    TcpEndpoint,
    TransportError,
    TransportTimeout,
    connect,
    make_server,
)

log = logging.getLogger(__name__)


class DistributorClient:
    """Request/response access to a remote Distributor over one connection."""

    def __init__(self, host: str, port: int, timeout: float = DEFAULT_TIMEOUT):
        self.ep = connect(host, port, timeout)
        self.timeout = timeout

    def _call(self, msg):
        reply = self.ep.request(msg, self.timeout)
        if isinstance(reply, Abort):
            raise ResourceError(reply.reason)
        return reply

    def provision(self, session_id: str, user_id: str, count: int) -> None:
        reply = self._call(ProvisionRequest(session_id, user_id, count))
        if not isinstance(reply, ProvisionReply):
            raise ResourceError(f"unexpected reply {reply.TYPE}")

    def measure(self, session_id: str, pair_index: int, party: str, setting) -> int:
        reply = self._call(MeasureRequest(session_id, pair_index, party, setting.angle))
        if not isinstance(reply, MeasureReply) or reply.pair_index != pair_index:
            raise ResourceError("mismatched measurement reply")
        return reply.outcome

    def close(self) -> None:
        self.ep.close()


def distributor_server(host: str, port: int, distributor: Distributor):
    def handle(ep: TcpEndpoint):
        while True:
            try:
                msg = ep.recv(None, timeout=None)
            except (ChannelClosed, TransportError):
                return
            ep.send(None, distributor.handle(msg))

    return make_server(host, port, handle)


def _run_machine(ep: TcpEndpoint, machine, timeout: float, initial=()) -> None:
    for out in initial:
        ep.send(None, out)
    while not machine.finished:
        try:
            msg = ep.recv(None, timeout)
        except TransportTimeout:
            msg = TIMEOUT
        except TransportError as exc:
            machine._abort(f"transport: {exc}")
            return
        for out in machine.step(msg):
            try:
                ep.send(None, out)
            except TransportError:
                return


@dataclass
class AuthorizerConfig:
    params: ProtocolParams
    table: LevelTable
    seed: int
    distributor_host: str
    distributor_port: int
    db: authdb.LeveledDatabase | None = None
    timeout: float = DEFAULT_TIMEOUT
    on_mismatch: str = "abort"


class AuthorizerService:
    """Serves sessions (one per connection) and queries against issued grants."""

    def __init__(self, cfg: AuthorizerConfig):
        self.cfg = cfg
        self.grants = authdb.GrantRegistry()
        self.transcripts: dict[str, Transcript] = {}
        self.verdicts: dict[str, object] = {}
        self._counter = itertools.count()
        self._lock = threading.Lock()

    def _answer_query(self, msg: QueryRequest) -> QueryReply:
        grant = self.grants.get(msg.session_id)
        if grant is None or self.cfg.db is None:
            return QueryReply(msg.record_id, "no_grant")
        try:
            out = authdb.query(self.cfg.db, grant, msg.record_id)
        except authdb.RecordNotFound:
            return QueryReply(msg.record_id, "not_found")
        if out is authdb.DENIED:
            return QueryReply(msg.record_id, "denied")
        return QueryReply(msg.record_id, "ok", base64.b64encode(out).decode())

    def handle(self, ep: TcpEndpoint) -> None:
        cfg = self.cfg
        try:
            first = ep.recv(None, cfg.timeout)
        except TransportError:
            return
        if isinstance(first, QueryRequest):
            self._serve_queries(ep, first)
            return
        with self._lock:
            index = next(self._counter)
        try:
            resource = DistributorClient(cfg.distributor_host, cfg.distributor_port, cfg.timeout)
        except OSError as exc:
            ep.send(None, Abort(f"resource: distributor unreachable ({exc})"))
            return
        try:
            machine = AuthorizerMachine(cfg.params, cfg.table, resource, role_rng(cfg.seed, index, "authorizer"),
                                        session_index=index, on_mismatch=cfg.on_mismatch)
            outs = machine.step(first)
            _run_machine(ep, machine, cfg.timeout, outs)
        finally:
            resource.close()
        verdict = machine.final_verdict()
        log.info("session %s user=%s verdict=%s", machine.session_id, machine.user_id, verdict)
        if machine.session_id:
            self.transcripts[machine.session_id] = machine.transcript()
            self.verdicts[machine.session_id] = verdict
        if verdict.granted:
            self.grants.issue(verdict, machine.user_id, machine.session_id)
            self._serve_queries(ep, None)

    def _serve_queries(self, ep: TcpEndpoint, first) -> None:
        msg = first
        while True:
            if msg is None:
                try:
                    msg = ep.recv(None, self.cfg.timeout)
                except TransportError:
                    return
            if isinstance(msg, QueryRequest):
                ep.send(None, self._answer_query(msg))
            elif isinstance(msg, Abort):
                return
            else:
                ep.send(None, Abort("out-of-phase"))
                return
            msg = None


def authorizer_server(host: str, port: int, service: AuthorizerService):
    return make_server(host, port, service.handle)


@dataclass
class UserResult:
    phase: str
    reason: str | None
    verdict: object
    transcript: Transcript
    queries: dict


def run_user(
    host: str,
    port: int,
    distributor_host: str,
    distributor_port: int,
    user_id: str,
    level_k: int,
    params: ProtocolParams,
    table: LevelTable,
    seed: int,
    session_index: int = 0,
    behavior: UserBehavior | None = None,
    queries=(),
    timeout: float = DEFAULT_TIMEOUT,
) -> UserResult:
    resource = DistributorClient(distributor_host, distributor_port, timeout)
    ep = connect(host, port, timeout)
    try:
        machine = UserMachine(user_id, level_k, params, table, resource,
                              role_rng(seed, session_index, "user"), behavior or Honest())
        _run_machine(ep, machine, timeout, machine.start())
        answers = {}
        if machine.phase == "done":
            for rid in queries:
                reply = ep.request(QueryRequest(machine.session_id, rid), timeout)
                answers[rid] = reply
        return UserResult(machine.phase, machine.abort_reason, machine.verdict, machine.transcript(), answers)
    finally:
        ep.close()
        resource.close()
