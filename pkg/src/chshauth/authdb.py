"""Leveled database: a level-k grant reads exactly the records tagged 1..k.

File format is newline-delimited JSON, one record per line:
``{"id": "r1", "level": 2, "data": "<base64>"}``.
"""
from __future__ import annotations

import base64
import binascii
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .messages import Verdict


class LoadError(ValueError):
    pass


class NoGrantError(PermissionError):
    """A verdict that is not a grant cannot unlock anything."""


class RecordNotFound(KeyError):
    pass


DENIED = "denied"


@dataclass(frozen=True)
class Record:
    record_id: str
    level_tag: int
    payload: bytes


@dataclass(frozen=True)
class LeveledDatabase:
    records: dict[str, Record]
    level_count: int

    def __len__(self) -> int:
        return len(self.records)

    def segment(self, k: int) -> list[Record]:
        """DB_k: the union of levels 1..k."""
        return [r for r in self.records.values() if r.level_tag <= k]


@dataclass(frozen=True)
class AccessGrant:
    user_id: str
    granted_level: int
    session_id: str
    issued_at: float = field(default_factory=time.time)


def parse_records(lines, level_count: int) -> LeveledDatabase:
    records: dict[str, Record] = {}
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            rid, level, data = obj["id"], obj["level"], obj["data"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise LoadError(f"line {lineno}: malformed record ({exc})") from None
        if not isinstance(rid, str) or type(level) is not int:
            raise LoadError(f"line {lineno}: id must be a string and level an integer")
        if not (1 <= level <= level_count):
            raise LoadError(f"line {lineno}: level {level} outside 1..{level_count}")
        if rid in records:
            raise LoadError(f"line {lineno}: duplicate record id {rid!r}")
        try:
            payload = base64.b64decode(data, validate=True)
        except (binascii.Error, TypeError):
            raise LoadError(f"line {lineno}: data is not base64") from None
        records[rid] = Record(rid, level, payload)
    return LeveledDatabase(records, level_count)


def load(path, level_count: int) -> LeveledDatabase:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise LoadError(f"cannot read {path}: {exc}") from None
    return parse_records(text.splitlines(), level_count)


def dump_records(records) -> str:
    return "".join(
        json.dumps({"id": r.record_id, "level": r.level_tag, "data": base64.b64encode(r.payload).decode()}) + "\n"
        for r in records
    )


def issue_grant(verdict: Verdict, user_id: str, session_id: str) -> AccessGrant:
    if verdict.granted_level is None:
        raise NoGrantError(f"verdict is an abort ({verdict.abort_reason}); no grant issued")
    return AccessGrant(user_id, verdict.granted_level, session_id)


def query(db: LeveledDatabase, grant: AccessGrant, record_id: str):
    """Payload bytes if the record is within the grant, else ``DENIED``."""
    try:
        rec = db.records[record_id]
    except KeyError:
        raise RecordNotFound(record_id) from None
    if rec.level_tag <= grant.granted_level:
        return rec.payload
    return DENIED


class GrantRegistry:
    """In-memory grants keyed by session id."""

    def __init__(self):
        self._grants: dict[str, AccessGrant] = {}
        self._lock = threading.Lock()

    def issue(self, verdict: Verdict, user_id: str, session_id: str) -> AccessGrant:
        grant = issue_grant(verdict, user_id, session_id)
        with self._lock:
            self._grants[session_id] = grant
        return grant

    def get(self, session_id: str) -> AccessGrant | None:
        with self._lock:
            return self._grants.get(session_id)
