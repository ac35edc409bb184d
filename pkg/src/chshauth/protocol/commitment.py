"""Salted SHA-256 commitments to a round's (question, answer) pair."""
from __future__ import annotations

import hashlib
import hmac
import struct

SALT_BYTES = 16
_DOMAIN = b"chshauth/round-commit/v1"
_ROLES = {"user": b"U", "authorizer": b"A"}


def commit(round_index: int, role: str, question: int, answer: int, salt: bytes) -> str:
    """Hex digest of H(round || role || question || answer || salt)."""
    if len(salt) != SALT_BYTES:
        raise ValueError(f"salt must be {SALT_BYTES} bytes")
    h = hashlib.sha256(_DOMAIN)
    h.update(struct.pack(">Q", round_index))
    h.update(_ROLES[role])
    h.update(bytes((question, answer)))
    h.update(salt)
    return h.hexdigest()


def verify_reveal(digest: str, round_index: int, role: str, question: int, answer: int, salt) -> bool:
    if isinstance(salt, str):
        try:
            salt = bytes.fromhex(salt)
        except ValueError:
            return False
    if len(salt) != SALT_BYTES or question not in (0, 1) or answer not in (0, 1):
        return False
    return hmac.compare_digest(commit(round_index, role, question, answer, salt), digest)
