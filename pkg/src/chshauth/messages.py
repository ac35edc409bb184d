"""Wire message schema shared by the protocol roles.

Every message is a JSON object with a ``type`` tag and snake_case fields.
Digests and salts travel hex-encoded, record payloads base64-encoded.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import ClassVar


class DecodeError(ValueError):
    """Bytes do not parse to exactly one well-formed message."""


@dataclass(frozen=True)
class Message:
    TYPE: ClassVar[str] = ""

    def to_dict(self) -> dict:
        return {"type": self.TYPE, **asdict(self)}


@dataclass(frozen=True)
class AuthRequest(Message):
    TYPE: ClassVar[str] = "auth_request"
    user_id: str
    requested_level: int


@dataclass(frozen=True)
class SessionAccept(Message):
    TYPE: ClassVar[str] = "session_accept"
    session_id: str
    params_digest: str


@dataclass(frozen=True)
class RoundCommit(Message):
    TYPE: ClassVar[str] = "round_commit"
    round: int
    digest: str


@dataclass(frozen=True)
class RoundReveal(Message):
    TYPE: ClassVar[str] = "round_reveal"
    round: int
    question: int
    answer: int
    salt: str


@dataclass(frozen=True)
class Verdict(Message):
    TYPE: ClassVar[str] = "verdict"
    granted_level: int | None = None
    abort_reason: str | None = None

    @property
    def granted(self) -> bool:
        return self.granted_level is not None


@dataclass(frozen=True)
class Abort(Message):
    TYPE: ClassVar[str] = "abort"
    reason: str


@dataclass(frozen=True)
class ProvisionRequest(Message):
    TYPE: ClassVar[str] = "provision_request"
    session_id: str
    user_id: str
    count: int


@dataclass(frozen=True)
class ProvisionReply(Message):
    TYPE: ClassVar[str] = "provision_reply"
    session_id: str
    count: int


@dataclass(frozen=True)
class MeasureRequest(Message):
    TYPE: ClassVar[str] = "measure_request"
    session_id: str
    pair_index: int
    party: str
    angle: float


@dataclass(frozen=True)
class MeasureReply(Message):
    TYPE: ClassVar[str] = "measure_reply"
    session_id: str
    pair_index: int
    outcome: int


@dataclass(frozen=True)
class QueryRequest(Message):
    TYPE: ClassVar[str] = "query_request"
    session_id: str
    record_id: str


@dataclass(frozen=True)
class QueryReply(Message):
    TYPE: ClassVar[str] = "query_reply"
    record_id: str
    status: str  # ok | denied | not_found | no_grant
    data: str | None = None


MESSAGE_TYPES: dict[str, type[Message]] = {
    cls.TYPE: cls
    for cls in (
        AuthRequest, SessionAccept, RoundCommit, RoundReveal, Verdict, Abort,
        ProvisionRequest, ProvisionReply, MeasureRequest, MeasureReply,
        QueryRequest, QueryReply,
    )
}

_BITS = {"question", "answer", "outcome"}
_HEX = {"digest", "salt", "params_digest"}


def _check_field(name: str, value, annotation: str) -> None:
    if value is None:
        if "None" not in annotation:
            raise DecodeError(f"field {name!r} may not be null")
        return
    if annotation.startswith("int"):
        if type(value) is not int:
            raise DecodeError(f"field {name!r} must be an integer")
        if name in _BITS and value not in (0, 1):
            raise DecodeError(f"field {name!r} must be a bit")
        if value < 0:
            raise DecodeError(f"field {name!r} must be non-negative")
    elif annotation.startswith("float"):
        if type(value) not in (int, float):
            raise DecodeError(f"field {name!r} must be a number")
    elif annotation.startswith("str"):
        if not isinstance(value, str):
            raise DecodeError(f"field {name!r} must be a string")
        if name in _HEX:
            try:
                bytes.fromhex(value)
            except ValueError:
                raise DecodeError(f"field {name!r} must be hex") from None


def from_dict(d: dict) -> Message:
    if not isinstance(d, dict) or "type" not in d:
        raise DecodeError("message must be an object with a 'type' tag")
    cls = MESSAGE_TYPES.get(d["type"])
    if cls is None:
        raise DecodeError(f"unknown message type {d['type']!r}")
    expected = {f.name: f for f in fields(cls)}
    given = set(d) - {"type"}
    required = {n for n, f in expected.items() if "None" not in str(f.type)}
    if not given <= set(expected) or not required <= given:
        raise DecodeError(f"bad field set for {cls.TYPE}: {sorted(given)}")
    for name in given:
        _check_field(name, d[name], str(expected[name].type))
    if cls is Verdict and (d.get("granted_level") is None) == (d.get("abort_reason") is None):
        raise DecodeError("a verdict carries exactly one of granted_level, abort_reason")
    if cls is MeasureRequest and d["party"] not in ("A", "B"):
        raise DecodeError("party must be 'A' or 'B'")
    kwargs = {k: v for k, v in d.items() if k != "type"}
    if cls is MeasureRequest:
        kwargs["angle"] = float(kwargs["angle"])
    return cls(**kwargs)


def encode(msg: Message) -> bytes:
    return json.dumps(msg.to_dict(), separators=(",", ":"), allow_nan=False).encode("utf-8")


def decode(payload: bytes) -> Message:
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"payload is not UTF-8 JSON: {exc}") from None
    return from_dict(obj)
