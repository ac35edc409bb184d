"""User and Authorizer state machines.

Round r, both sides honest:

    User        measure half r, send RoundCommit(r)
    Authorizer  on the User's commit: measure half r, send RoundCommit(r)
    User        on the Authorizer's commit: send RoundReveal(r)
    Authorizer  on the User's reveal: check it, send RoundReveal(r)
    User        on the Authorizer's reveal: check it, start round r+1

Neither side reveals before holding the other's commitment for the round,
and the User always measures first, so the Distributor sees the same
request order on every transport. After round N-1 the Authorizer counts
wins and sends a Verdict.
"""
from __future__ import annotations

from ..chsh import optimal_strategy
from ..messages import (
    Abort,
    AuthRequest,
    Message,
    RoundCommit,
    RoundReveal,
    SessionAccept,
    Verdict,
)
from ..planner import LevelTable, PlanningError, ProtocolParams
from ..resource import ResourceError
from ..transport import TransportError
from .adversary import Honest, UserBehavior
from .commitment import SALT_BYTES, commit, verify_reveal
from .transcript import Transcript, params_digest, verify_transcript

IDLE = "idle"
REQUESTED = "requested"
COMMITTING = "committing"
REVEALING = "revealing"
AWAIT_VERDICT = "awaiting_verdict"
DONE = "done"
ABORTED = "aborted"

OUT_OF_PHASE = "out-of-phase"
COMMITMENT_MISMATCH = "commitment-mismatch"
TIMEOUT_REASON = "timeout"


class Timeout:
    """Timer event: the expected message did not arrive in time."""

    def __repr__(self):
        return "TIMEOUT"


TIMEOUT = Timeout()


class _Machine:
    role = ""

    def __init__(self, params: ProtocolParams, table: LevelTable, resource, rng):
        self.params = params
        self.table = table
        self.resource = resource
        self.rng = rng
        self.phase = IDLE
        self.round = 0
        self.session_id: str | None = None
        self.requested_level: int | None = None
        self.user_id = ""
        self.abort_reason: str | None = None
        self.records: list[tuple] = []
        self.user_commits: list[str] = []
        self.authorizer_commits: list[str] = []
        self._peer_digest: str | None = None

    @property
    def finished(self) -> bool:
        return self.phase in (DONE, ABORTED)

    def _abort(self, reason: str) -> list[Message]:
        self.phase = ABORTED
        self.abort_reason = reason
        return [Abort(reason)]

    def _salt(self) -> bytes:
        return self.rng.bytes(SALT_BYTES)

    def _bit(self) -> int:
        return int(self.rng.random() < 0.5)

    def transcript(self) -> Transcript:
        return Transcript.from_records(
            self.session_id or "", self.requested_level or 0, self.params, self.records,
            user_id=self.user_id,
            user_commits=list(self.user_commits),
            authorizer_commits=list(self.authorizer_commits),
        )

    def step(self, incoming) -> list[Message]:
        if self.finished:
            return []
        if incoming is TIMEOUT:
            return self._abort(TIMEOUT_REASON)
        if isinstance(incoming, Abort):
            self.phase = ABORTED
            self.abort_reason = incoming.reason
            return []
        return self._dispatch(incoming)

    def _dispatch(self, msg) -> list[Message]:
        raise NotImplementedError


class UserMachine(_Machine):
    role = "user"

    def __init__(self, user_id: str, requested_level: int, params: ProtocolParams, table: LevelTable,
                 resource, rng, behavior: UserBehavior | None = None):
        super().__init__(params, table, resource, rng)
        self.user_id = user_id
        self.requested_level = requested_level
        self.behavior = behavior or Honest()
        self.behavior.bind(table, requested_level)
        self.verdict: Verdict | None = None
        self._own = None  # (t, b, salt) of the current round

    def start(self) -> list[Message]:
        if self.phase != IDLE:
            return self._abort(OUT_OF_PHASE)
        self.phase = REQUESTED
        return [AuthRequest(self.user_id, self.requested_level)]

    def _measure(self, setting) -> int:
        return self.resource.measure(self.session_id, self.round, "B", setting)

    def _play_round(self) -> list[Message]:
        r = self.round
        t = self._bit()
        try:
            b = self.behavior.answer(r, t, self._measure, self.rng)
        except (ResourceError, TransportError) as exc:
            return self._abort(f"resource: {exc}")
        salt = self._salt()
        self._own = (t, b, salt)
        if self.behavior.tamper.get(r) == "early_reveal":
            self.phase = REVEALING
            return [RoundReveal(r, t, b, salt.hex())]
        digest = commit(r, "user", t, b, salt)
        self.user_commits.append(digest)
        self.phase = COMMITTING
        return [RoundCommit(r, digest)]

    def _reveal(self) -> list[Message]:
        t, b, salt = self._own
        kind = self.behavior.tamper.get(self.round)
        if kind == "withhold":
            return []
        if kind == "flip_question":
            t ^= 1
        elif kind == "flip_answer":
            b ^= 1
        elif kind == "alter_salt":
            salt = bytes([salt[0] ^ 1]) + salt[1:]
        return [RoundReveal(self.round, t, b, salt.hex())]

    def _dispatch(self, msg) -> list[Message]:
        phase = self.phase
        if phase == REQUESTED and isinstance(msg, SessionAccept):
            if msg.params_digest != params_digest(self.params):
                return self._abort("params-mismatch")
            self.session_id = msg.session_id
            return self._play_round()
        if phase == COMMITTING and isinstance(msg, RoundCommit) and msg.round == self.round:
            self._peer_digest = msg.digest
            self.authorizer_commits.append(msg.digest)
            self.phase = REVEALING
            return self._reveal()
        if phase == REVEALING and isinstance(msg, RoundReveal) and msg.round == self.round:
            if self._peer_digest is None or not verify_reveal(
                self._peer_digest, msg.round, "authorizer", msg.question, msg.answer, msg.salt
            ):
                return self._abort(COMMITMENT_MISMATCH)
            s, a = msg.question, msg.answer
            t, b, _ = self._own
            self.records.append((s, t, a, b, (s & t) == (a ^ b)))
            self._peer_digest = None
            self.round += 1
            if self.round < self.params.N:
                return self._play_round()
            self.phase = AWAIT_VERDICT
            return []
        if phase == AWAIT_VERDICT and isinstance(msg, Verdict):
            self.verdict = msg
            if msg.granted_level == self.requested_level:
                self.phase = DONE
                return []
            if msg.granted_level is not None:
                # any other level means the Authorizer deviated
                return self._abort("wrong-level-granted")
            self.phase = ABORTED
            self.abort_reason = msg.abort_reason
            return []
        return self._abort(OUT_OF_PHASE)


class AuthorizerMachine(_Machine):
    role = "authorizer"

    def __init__(self, params: ProtocolParams, table: LevelTable, resource, rng,
                 session_index: int = 0, on_mismatch: str = "abort"):
        super().__init__(params, table, resource, rng)
        self.session_index = session_index
        self.on_mismatch = on_mismatch
        self.verdict: Verdict | None = None
        self._settings = None

    def _dispatch(self, msg) -> list[Message]:
        phase = self.phase
        if phase == IDLE and isinstance(msg, AuthRequest):
            return self._accept(msg)
        if phase == COMMITTING and isinstance(msg, RoundCommit) and msg.round == self.round:
            return self._commit_round(msg)
        if phase == REVEALING and isinstance(msg, RoundReveal) and msg.round == self.round:
            return self._finish_round(msg)
        return self._abort(OUT_OF_PHASE)

    def _accept(self, msg: AuthRequest) -> list[Message]:
        self.user_id = msg.user_id
        self.requested_level = msg.requested_level
        try:
            theta = self.table.level(msg.requested_level).theta
        except PlanningError:
            return self._abort("unknown-level")
        self._settings = optimal_strategy(theta).alice_settings
        self.session_id = f"{self.session_index:06d}-{self.rng.bytes(4).hex()}"
        try:
            self.resource.provision(self.session_id, msg.user_id, self.params.N)
        except (ResourceError, TransportError) as exc:
            return self._abort(f"resource: {exc}")
        self.phase = COMMITTING
        return [SessionAccept(self.session_id, params_digest(self.params))]

    def _commit_round(self, msg: RoundCommit) -> list[Message]:
        r = self.round
        self._peer_digest = msg.digest
        self.user_commits.append(msg.digest)
        s = self._bit()
        try:
            a = self.resource.measure(self.session_id, r, "A", self._settings[s])
        except (ResourceError, TransportError) as exc:
            return self._abort(f"resource: {exc}")
        salt = self._salt()
        self._own = (s, a, salt)
        digest = commit(r, "authorizer", s, a, salt)
        self.authorizer_commits.append(digest)
        self.phase = REVEALING
        return [RoundCommit(r, digest)]

    def _finish_round(self, msg: RoundReveal) -> list[Message]:
        if not verify_reveal(self._peer_digest, msg.round, "user", msg.question, msg.answer, msg.salt):
            return self._abort(COMMITMENT_MISMATCH)
        s, a, salt = self._own
        t, b = msg.question, msg.answer
        self.records.append((s, t, a, b, (s & t) == (a ^ b)))
        out: list[Message] = [RoundReveal(self.round, s, a, salt.hex())]
        self.round += 1
        if self.round < self.params.N:
            self.phase = COMMITTING
            return out
        self.verdict = verify_transcript(self.transcript(), self.params, self.table, self.on_mismatch)
        self.phase = DONE
        out.append(self.verdict)
        return out

    def final_verdict(self) -> Verdict:
        if self.verdict is not None:
            return self.verdict
        return Verdict(abort_reason=self.abort_reason or "incomplete")


def user_step(machine: UserMachine, incoming) -> tuple[UserMachine, list[Message]]:
    """Feed one message (or ``TIMEOUT``) to the User; returns (state, outgoing)."""
    return machine, machine.step(incoming)


def authorizer_step(machine: AuthorizerMachine, incoming) -> tuple[AuthorizerMachine, list[Message]]:
    return machine, machine.step(incoming)
