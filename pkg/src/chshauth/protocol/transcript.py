"""Session transcripts and the Authorizer's win-count verdict."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..messages import Verdict
from ..planner import LevelTable, PlanningError, ProtocolParams, acceptance_interval

LEVEL_MISMATCH = "level-mismatch"


class TranscriptError(ValueError):
    """A transcript is malformed or internally inconsistent."""


class GameRecord(NamedTuple):
    s: int
    t: int
    a: int
    b: int
    won: bool


def params_digest(params: ProtocolParams) -> str:
    blob = json.dumps(params.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class Transcript:
    """Rounds are stored column-wise as uint8 arrays."""

    session_id: str
    requested_level: int
    params: ProtocolParams
    s: np.ndarray
    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    won: np.ndarray
    user_id: str = ""
    user_commits: list = field(default_factory=list)
    authorizer_commits: list = field(default_factory=list)

    @classmethod
    def from_records(cls, session_id, requested_level, params, records, **kw) -> "Transcript":
        cols = np.array([tuple(r) for r in records], dtype=np.uint8).reshape(-1, 5)
        return cls(session_id, requested_level, params, *(cols[:, i].copy() for i in range(5)), **kw)

    def __len__(self) -> int:
        return len(self.s)

    @property
    def rounds(self) -> list[GameRecord]:
        return [GameRecord(int(s), int(t), int(a), int(b), bool(w))
                for s, t, a, b, w in zip(self.s, self.t, self.a, self.b, self.won)]

    def wins(self) -> int:
        return int(np.count_nonzero(self.won))

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "user_id": self.user_id,
            "requested_level": self.requested_level,
            "params": self.params.to_dict(),
            "rounds": np.stack([self.s, self.t, self.a, self.b, self.won], axis=1).astype(int).tolist(),
            "user_commits": list(self.user_commits),
            "authorizer_commits": list(self.authorizer_commits),
        }

    def to_json(self) -> bytes:
        """Canonical byte serialization; equal transcripts give equal bytes."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def from_json(cls, data) -> "Transcript":
        try:
            d = json.loads(data)
            params = ProtocolParams.from_dict(d["params"])
            return cls.from_records(
                d["session_id"], int(d["requested_level"]), params, d["rounds"],
                user_id=d.get("user_id", ""),
                user_commits=d.get("user_commits", []),
                authorizer_commits=d.get("authorizer_commits", []),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TranscriptError(f"cannot parse transcript: {exc}") from None


def _validate(tr: Transcript, params: ProtocolParams) -> None:
    n = len(tr.s)
    if any(len(col) != n for col in (tr.t, tr.a, tr.b, tr.won)):
        raise TranscriptError("transcript columns have different lengths")
    if n != params.N:
        raise TranscriptError(f"transcript has {n} rounds, expected {params.N}")
    for name in ("s", "t", "a", "b"):
        col = getattr(tr, name)
        if n and int(np.max(col)) > 1:
            raise TranscriptError(f"column {name} holds a non-bit value")
    expected = (tr.s & tr.t) == (tr.a ^ tr.b)
    bad = np.flatnonzero(expected != tr.won.astype(bool))
    if bad.size:
        raise TranscriptError(f"round {int(bad[0])}: recorded win flag disagrees with the CHSH predicate")


def verify_transcript(tr: Transcript, params: ProtocolParams, table: LevelTable,
                      on_mismatch: str = "abort") -> Verdict:
    """Grant level k iff the win count lies in level k's acceptance interval.

    ``on_mismatch="grant_matching"`` instead grants the highest level below
    the requested one whose interval contains the win count, if any.
    """
    _validate(tr, params)
    try:
        lo, hi = acceptance_interval(tr.requested_level, params, table)
    except PlanningError as exc:
        raise TranscriptError(str(exc)) from None
    w = tr.wins()
    if lo <= w <= hi:
        return Verdict(granted_level=tr.requested_level)
    if on_mismatch == "grant_matching":
        for k in range(tr.requested_level - 1, 0, -1):
            lo_k, hi_k = acceptance_interval(k, params, table)
            if lo_k <= w <= hi_k:
                return Verdict(granted_level=k)
    return Verdict(abort_reason=LEVEL_MISMATCH)
