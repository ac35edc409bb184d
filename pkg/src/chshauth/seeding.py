"""Reproducible per-session, per-role random streams.

A master seed is stretched with numpy's SeedSequence using the spawn key
``(session_index, role_code)``. The distributor has no session index of its
own, so its key is derived from the first 8 bytes of SHA-256(session_id).
"""
from __future__ import annotations

import hashlib

import numpy as np

ROLE_CODES = {"user": 0, "authorizer": 1, "distributor": 2}


def role_rng(master_seed: int, session_index: int, role: str) -> np.random.Generator:
    ss = np.random.SeedSequence(master_seed, spawn_key=(session_index, ROLE_CODES[role]))
    return np.random.default_rng(ss)


def session_key(session_id: str) -> int:
    return int.from_bytes(hashlib.sha256(session_id.encode()).digest()[:8], "big")


def distributor_rng(master_seed: int, session_id: str) -> np.random.Generator:
    return role_rng(master_seed, session_key(session_id), "distributor")
