"""Vectorized sessions for large-N statistical experiments.

Each round's (a, b) is drawn from the exact per-question law the message
level session induces (the Born rule for measuring behaviours, a product of
marginals for those that ignore their half), then the transcript goes
through the same :func:`verify_transcript` as a live session. Commitments
are not exercised here.
"""
from __future__ import annotations

import numpy as np

from ..chsh import optimal_strategy
from ..planner import LevelTable, ProtocolParams
from ..qsim import make_partially_entangled
from ..seeding import role_rng
from .adversary import Honest, UserBehavior
from .session import SessionResult
from .transcript import Transcript, verify_transcript


def round_laws(table: LevelTable, level_k: int, behavior: UserBehavior, resource_theta: float) -> np.ndarray:
    """4x4 array: row 2s+t holds p(a, b) in the order (0,0), (0,1), (1,0), (1,1)."""
    state = make_partially_entangled(resource_theta)
    alice = optimal_strategy(table.level(level_k).theta).alice_settings
    laws = np.empty((4, 4))
    for s in (0, 1):
        for t in (0, 1):
            laws[2 * s + t] = behavior.round_law(state, alice[s], t).p
    return laws


def sample_rounds(laws: np.ndarray, n: int, rng: np.random.Generator):
    s = rng.integers(0, 2, n, dtype=np.uint8)
    t = rng.integers(0, 2, n, dtype=np.uint8)
    u = rng.random(n)
    cdf = np.cumsum(laws, axis=1)[:, :3]
    ab = (u[:, None] >= cdf[2 * s + t]).sum(axis=1).astype(np.uint8)
    a, b = ab >> 1, ab & 1
    won = ((s & t) == (a ^ b)).astype(np.uint8)
    return s, t, a, b, won


def run_batch_session(
    params: ProtocolParams,
    table: LevelTable,
    level_k: int,
    behavior: UserBehavior | None = None,
    seed: int = 0,
    session_index: int = 0,
    true_level: int | None = None,
    on_mismatch: str = "abort",
    laws: np.ndarray | None = None,
) -> SessionResult:
    behavior = behavior or Honest()
    true_level = level_k if true_level is None else true_level
    if laws is None:
        behavior.bind(table, level_k)
        theta = behavior.resource_theta if behavior.resource_theta is not None else table.level(true_level).theta
        laws = round_laws(table, level_k, behavior, theta)
    rng = role_rng(seed, session_index, "distributor")
    cols = sample_rounds(laws, params.N, rng)
    tr = Transcript(f"batch-{session_index:06d}", level_k, params, *cols)
    verdict = verify_transcript(tr, params, table, on_mismatch)
    phase = "done" if verdict.granted_level == level_k else "aborted"
    return SessionResult(verdict, tr, phase, verdict.abort_reason, tr)
