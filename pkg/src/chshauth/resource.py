"""The Distributor: a simulated source of entangled pairs.

A classical program cannot hand out halves of an entangled state, so both
parties query the Distributor for their measurement outcomes. The first
query on a pair is answered from that party's marginal, which does not
depend on the partner's setting; the second is sampled conditionally on the
recorded first outcome. Together they reproduce the Born-rule joint law.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .messages import Abort, MeasureReply, MeasureRequest, Message, ProvisionReply, ProvisionRequest
from .planner import LevelTable, PlanningError
from .qsim import (
    MeasurementSetting,
    TwoQubitPureState,
    conditional_law,
    joint_distribution,
    make_partially_entangled,
    marginal_distribution,
)
from .seeding import distributor_rng

PARTIES = ("A", "B")

FRESH, HALF, CONSUMED = "fresh", "half", "consumed"


class ResourceError(Exception):
    """Base class for Distributor failures."""


class UnknownPairError(ResourceError):
    pass


class AlreadyMeasuredError(ResourceError):
    """A half of a pair was measured twice."""


class UnknownSessionError(ResourceError):
    pass


@dataclass(frozen=True)
class BatchAudit:
    fresh: int
    half: int
    consumed: int


class PairBatch:
    """``count`` independent copies of cos(theta)|00> + sin(theta)|11>."""

    def __init__(self, session_id: str, level: int, theta: float, count: int, rng: np.random.Generator):
        if count < 1:
            raise ResourceError("a batch holds at least one pair")
        self.session_id = session_id
        self.level = level
        self.theta = theta
        self.count = count
        self.state: TwoQubitPureState = make_partially_entangled(theta)
        self.rng = rng
        self._lock = threading.Lock()
        # per pair: None, or (party, angle, outcome) of the first measurement
        self._first: list = [None] * count
        self._done = bytearray(count)  # number of halves measured
        self._marginals: dict = {}
        self._joints: dict = {}

    def status(self, pair_index: int) -> str:
        return (FRESH, HALF, CONSUMED)[self._done[pair_index]]

    def _marginal(self, party: str, angle: float) -> tuple[float, float]:
        key = (party, angle)
        law = self._marginals.get(key)
        if law is None:
            law = self._marginals[key] = marginal_distribution(self.state, MeasurementSetting(angle), party)
        return law

    def _conditional(self, first_party: str, first_angle: float, angle: float, first_outcome: int):
        key = (first_party, first_angle, angle)
        dist = self._joints.get(key)
        if dist is None:
            if first_party == "A":
                dist = joint_distribution(self.state, MeasurementSetting(first_angle), MeasurementSetting(angle))
            else:
                dist = joint_distribution(self.state, MeasurementSetting(angle), MeasurementSetting(first_angle))
            self._joints[key] = dist
        return conditional_law(dist, first_party, first_outcome)

    def measure(self, pair_index: int, party: str, setting: MeasurementSetting, randomness: float | None = None) -> int:
        if party not in PARTIES:
            raise ResourceError(f"party must be 'A' or 'B', got {party!r}")
        if not (0 <= pair_index < self.count):
            raise UnknownPairError(f"pair {pair_index} not in batch of {self.count}")
        with self._lock:
            first = self._first[pair_index]
            if first is not None and (first[0] == party or self._done[pair_index] == 2):
                raise AlreadyMeasuredError(f"party {party} already measured pair {pair_index}")
            u = self.rng.random() if randomness is None else randomness
            if first is None:
                p0 = self._marginal(party, setting.angle)[0]
                outcome = 0 if u < p0 else 1
                self._first[pair_index] = (party, setting.angle, outcome)
                self._done[pair_index] = 1
            else:
                p0 = self._conditional(first[0], first[1], setting.angle, first[2])[0]
                outcome = 0 if u < p0 else 1
                self._done[pair_index] = 2
            return outcome

    def audit(self) -> BatchAudit:
        with self._lock:
            half = self._done.count(1)
            consumed = self._done.count(2)
        return BatchAudit(self.count - half - consumed, half, consumed)


def provision(session_id: str, level_k: int, count: int, table: LevelTable, seed) -> PairBatch:
    """Fresh batch of ``count`` pairs at the entanglement of level ``level_k``."""
    try:
        lv = table.level(level_k)
    except PlanningError as exc:
        raise ResourceError(str(exc)) from None
    return PairBatch(session_id, level_k, lv.theta, count, np.random.default_rng(seed))


def provision_theta(session_id: str, theta: float, count: int, seed, level: int = 0) -> PairBatch:
    """Batch at an arbitrary Schmidt angle; theta = 0 gives product states."""
    return PairBatch(session_id, level, theta, count, np.random.default_rng(seed))


def measure_half(batch: PairBatch, pair_index: int, party: str, setting: MeasurementSetting, randomness=None) -> int:
    return batch.measure(pair_index, party, setting, randomness)


def audit_batch(batch: PairBatch) -> BatchAudit:
    return batch.audit()


class Distributor:
    """Session registry in front of the pair batches.

    ``user_levels`` is the setup-phase assignment of users to levels; a
    wire provisioning request only names the user, never the level.
    """

    def __init__(self, table: LevelTable, seed: int = 0, user_levels: dict | None = None,
                 user_thetas: dict | None = None):
        self.table = table
        self.seed = seed
        self.user_levels = dict(user_levels or {})
        # overrides for adversarial experiments (e.g. separable pairs)
        self.user_thetas = dict(user_thetas or {})
        self._batches: dict[str, PairBatch] = {}
        self._lock = threading.Lock()

    def provision(self, session_id: str, user_id: str, count: int) -> PairBatch:
        rng = distributor_rng(self.seed, session_id)
        if user_id in self.user_thetas:
            batch = PairBatch(session_id, 0, self.user_thetas[user_id], count, rng)
        elif user_id in self.user_levels:
            k = self.user_levels[user_id]
            try:
                theta = self.table.level(k).theta
            except PlanningError as exc:
                raise ResourceError(str(exc)) from None
            batch = PairBatch(session_id, k, theta, count, rng)
        else:
            raise ResourceError(f"no entanglement level registered for user {user_id!r}")
        with self._lock:
            if session_id in self._batches:
                raise ResourceError(f"session {session_id!r} already provisioned")
            self._batches[session_id] = batch
        return batch

    def batch(self, session_id: str) -> PairBatch:
        try:
            return self._batches[session_id]
        except KeyError:
            raise UnknownSessionError(f"no batch for session {session_id!r}") from None

    def measure(self, session_id: str, pair_index: int, party: str, setting: MeasurementSetting) -> int:
        return self.batch(session_id).measure(pair_index, party, setting)

    def release(self, session_id: str) -> None:
        with self._lock:
            self._batches.pop(session_id, None)

    def handle(self, msg: Message) -> Message:
        """Serve one wire request."""
        try:
            if isinstance(msg, ProvisionRequest):
                self.provision(msg.session_id, msg.user_id, msg.count)
                return ProvisionReply(msg.session_id, msg.count)
            if isinstance(msg, MeasureRequest):
                bit = self.measure(msg.session_id, msg.pair_index, msg.party, MeasurementSetting(msg.angle))
                return MeasureReply(msg.session_id, msg.pair_index, bit)
        except ResourceError as exc:
            return Abort(f"resource: {exc}")
        return Abort(f"resource: unexpected message {msg.TYPE}")
