"""Drive a User and an Authorizer through one complete session."""
from __future__ import annotations

from dataclasses import dataclass

from ..messages import Verdict
from ..planner import LevelTable, ProtocolParams
from ..resource import Distributor
from ..seeding import role_rng
from ..transport import TransportError, loopback_pair
from .adversary import Honest, UserBehavior
from .machines import TIMEOUT, AuthorizerMachine, UserMachine
from .transcript import Transcript


@dataclass
class SessionResult:
    verdict: Verdict
    transcript: Transcript
    user_phase: str
    user_reason: str | None
    user_transcript: Transcript

    @property
    def granted(self) -> bool:
        return self.verdict.granted


def _pump(endpoint, key, machine) -> bool:
    moved = False
    while endpoint.pending(key):
        try:
            msg = endpoint.recv(key)
        except TransportError as exc:
            outs = machine._abort(f"transport: {exc}")
        else:
            outs = machine.step(msg)
        for out in outs:
            try:
                endpoint.send(key, out)
            except TransportError:
                pass
        moved = True
    return moved


def run_session(
    params: ProtocolParams,
    table: LevelTable,
    level_k: int,
    behavior: UserBehavior | None = None,
    transport: str = "loopback",
    seed: int = 0,
    session_index: int = 0,
    true_level: int | None = None,
    user_id: str = "user",
    distributor: Distributor | None = None,
    wire: bool = True,
    on_mismatch: str = "abort",
) -> SessionResult:
    """Run one session in-process over a loopback channel.

    ``true_level`` is the level whose pairs the Distributor hands out
    (defaults to ``level_k``). Seeding follows :mod:`chshauth.seeding`, so
    the same ``seed`` and ``session_index`` reproduce the TCP deployment.
    """
    if transport != "loopback":
        raise ValueError("run_session drives the loopback transport; use the CLI roles for TCP")
    behavior = behavior or Honest()
    true_level = level_k if true_level is None else true_level
    if distributor is None:
        thetas = {user_id: behavior.resource_theta} if behavior.resource_theta is not None else {}
        distributor = Distributor(table, seed=seed, user_levels={user_id: true_level}, user_thetas=thetas)

    user = UserMachine(user_id, level_k, params, table, distributor,
                       role_rng(seed, session_index, "user"), behavior)
    auth = AuthorizerMachine(params, table, distributor, role_rng(seed, session_index, "authorizer"),
                             session_index=session_index, on_mismatch=on_mismatch)

    u_ep, a_ep = loopback_pair(seed, wire=wire)
    key = f"run-{session_index}"
    for m in user.start():
        u_ep.send(key, m)
    while not (user.finished and auth.finished):
        moved = _pump(a_ep, key, auth)
        moved = _pump(u_ep, key, user) or moved
        if not moved:
            # both sides are waiting: the one still expecting a message times out
            stalled, ep = (auth, a_ep) if not auth.finished else (user, u_ep)
            for out in stalled.step(TIMEOUT):
                try:
                    ep.send(key, out)
                except TransportError:
                    pass
    if auth.session_id is not None:
        distributor.release(auth.session_id)
    return SessionResult(auth.final_verdict(), auth.transcript(), user.phase, user.abort_reason, user.transcript())
