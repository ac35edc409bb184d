import threading
import time

import pytest

from chshauth.messages import AuthRequest, RoundCommit, SessionAccept, Verdict
from chshauth.planner import build_level_table, plan_params
from chshauth.protocol import run_session
from chshauth.protocol.adversary import OwnLevelStrategy
from chshauth.resource import Distributor
from chshauth.roles import AuthorizerConfig, AuthorizerService, authorizer_server, distributor_server, run_user
from chshauth.simulate import with_rounds
from chshauth.transport import connect

TABLE = build_level_table(2)


@pytest.fixture
def deployment():
    servers = []

    def _deploy(params, users, seed=0, timeout=5.0):
        dist = Distributor(TABLE, seed=seed, user_levels=users)
        dsrv = distributor_server("127.0.0.1", 0, dist)
        service = AuthorizerService(AuthorizerConfig(params, TABLE, seed, *dsrv.server_address, timeout=timeout))
        asrv = authorizer_server("127.0.0.1", 0, service)
        for srv in (dsrv, asrv):
            threading.Thread(target=srv.serve_forever, daemon=True).start()
            servers.append(srv)
        return dsrv.server_address, asrv.server_address, service

    yield _deploy
    for srv in servers:
        srv.shutdown()
        srv.server_close()


def test_tcp_transcript_equals_loopback(deployment):
    params = plan_params(8, 2, "paper", TABLE)
    (dh, dp), (ah, ap), _ = deployment(params, {"carol": 2}, seed=21)
    res = run_user(ah, ap, dh, dp, "carol", 2, params, TABLE, seed=21)
    loop = run_session(params, TABLE, 2, seed=21, user_id="carol")
    assert res.phase == "done" and res.verdict == loop.verdict
    assert res.transcript.to_json() == loop.transcript.to_json()


def test_over_requesting_user_aborts_over_tcp(deployment):
    params = with_rounds(plan_params(20, 2, "strict", TABLE), 3000)
    (dh, dp), (ah, ap), service = deployment(params, {"dave": 1}, seed=2)
    res = run_user(ah, ap, dh, dp, "dave", 2, params, TABLE, seed=2, behavior=OwnLevelStrategy(1))
    assert res.phase == "aborted" and res.verdict == Verdict(abort_reason="level-mismatch")


def test_silent_user_times_out(deployment):
    params = plan_params(8, 2, "paper", TABLE)
    (dh, dp), (ah, ap), service = deployment(params, {"erin": 1}, timeout=0.3)
    ep = connect(ah, ap, 5)
    ep.send(None, AuthRequest("erin", 1))
    accept = ep.recv(None, 5)
    assert isinstance(accept, SessionAccept)
    # the user goes quiet after the first commitment
    ep.send(None, RoundCommit(0, "00" * 32))
    ep.recv(None, 5)
    deadline = time.time() + 5
    while accept.session_id not in service.verdicts and time.time() < deadline:
        time.sleep(0.05)
    assert service.verdicts[accept.session_id] == Verdict(abort_reason="timeout")
    assert accept.session_id not in service.grants._grants
    ep.close()


def test_killed_user_aborts_session(deployment):
    params = plan_params(8, 2, "paper", TABLE)
    (dh, dp), (ah, ap), service = deployment(params, {"fay": 1}, timeout=5)
    ep = connect(ah, ap, 5)
    ep.send(None, AuthRequest("fay", 1))
    accept = ep.recv(None, 5)
    ep.close()
    deadline = time.time() + 5
    while accept.session_id not in service.verdicts and time.time() < deadline:
        time.sleep(0.05)
    v = service.verdicts[accept.session_id]
    assert not v.granted and v.abort_reason.startswith("transport")
