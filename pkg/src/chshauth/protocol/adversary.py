"""User behaviours: the honest strategy and the cheaters used to test soundness.

A behaviour decides how the User answers its question ``t`` in a round,
given a ``measure(setting)`` callback for its half of round ``r``'s pair.
Message-level misbehaviour (tampered or early reveals, withheld reveals) is
configured through ``tamper``, a map from round index to one of
``TAMPER_KINDS``.
"""
from __future__ import annotations

from ..chsh import classical_maximum, optimal_strategy
from ..qsim import JointDistribution, MeasurementSetting, joint_distribution, make_partially_entangled, marginal_distribution

TAMPER_KINDS = ("flip_question", "flip_answer", "alter_salt", "early_reveal", "withhold")


class UserBehavior:
    kind = "honest"
    # entanglement the Distributor should hand this user; None = registered level
    resource_theta: float | None = None

    def __init__(self, tamper: dict | None = None):
        self.tamper = dict(tamper or {})
        for kind in self.tamper.values():
            if kind not in TAMPER_KINDS:
                raise ValueError(f"unknown tamper kind {kind!r}")
        self._settings = None

    def bind(self, table, requested_level: int) -> None:
        theta = table.level(requested_level).theta
        self._settings = optimal_strategy(theta).bob_settings

    def answer(self, r: int, t: int, measure, rng) -> int:
        return measure(self._settings[t])

    def round_law(self, state, alice_setting, t: int) -> JointDistribution:
        """Exact law of (a, b) for one round with questions (s, t)."""
        return joint_distribution(state, alice_setting, self._settings[t])

    def describe(self) -> str:
        return self.kind


class Honest(UserBehavior):
    """Measure with the optimal setting for the requested level."""


class OwnLevelStrategy(UserBehavior):
    """Request one level, play the best strategy for the level actually held."""

    kind = "cross-level"

    def __init__(self, own_level: int, tamper=None):
        super().__init__(tamper)
        self.own_level = own_level

    def bind(self, table, requested_level: int) -> None:
        self._settings = optimal_strategy(table.level(self.own_level).theta).bob_settings


class FixedAngles(UserBehavior):
    kind = "angles"

    def __init__(self, beta0: float, beta1: float, tamper=None):
        super().__init__(tamper)
        self.angles = (beta0, beta1)

    def bind(self, table, requested_level: int) -> None:
        self._settings = tuple(MeasurementSetting(x) for x in self.angles)


class ClassicalTable(UserBehavior):
    """No entanglement: answer from a deterministic table of t.

    The Distributor hands this user product states |00>, so the
    Authorizer's half carries no correlation to exploit.
    """

    kind = "classical"
    resource_theta = 0.0

    def __init__(self, table: tuple[int, int] | None = None, tamper=None):
        super().__init__(tamper)
        self.table = table if table is not None else classical_maximum()[0].bob_table

    def bind(self, table, requested_level: int) -> None:
        pass

    def answer(self, r, t, measure, rng) -> int:
        return self.table[t]

    def round_law(self, state, alice_setting, t):
        pa = marginal_distribution(state, alice_setting, "A")
        b = self.table[t]
        return JointDistribution(tuple(pa[a] * (b == bb) for a in (0, 1) for bb in (0, 1)))


class Fabricate(UserBehavior):
    """Never measures; announces uniformly random answers."""

    kind = "fabricate"

    def bind(self, table, requested_level: int) -> None:
        pass

    def answer(self, r, t, measure, rng) -> int:
        return int(rng.random() < 0.5)

    def round_law(self, state, alice_setting, t):
        pa = marginal_distribution(state, alice_setting, "A")
        return JointDistribution(tuple(pa[a] / 2 for a in (0, 1) for _ in (0, 1)))


class PooledResource(UserBehavior):
    """Colluding user answering from a partner's batch instead of its own."""

    kind = "pooled"

    def __init__(self, other_measure, own_level: int, tamper=None):
        super().__init__(tamper)
        self.other_measure = other_measure
        self.own_level = own_level
        self._other_state = None

    def bind(self, table, requested_level: int) -> None:
        theta = table.level(self.own_level).theta
        self._settings = optimal_strategy(theta).bob_settings
        self._other_state = make_partially_entangled(theta)

    def round_law(self, state, alice_setting, t):
        # the two halves come from unrelated pairs
        pa = marginal_distribution(state, alice_setting, "A")
        pb = marginal_distribution(self._other_state, self._settings[t], "B")
        return JointDistribution(tuple(pa[a] * pb[b] for a in (0, 1) for b in (0, 1)))

    def answer(self, r, t, measure, rng) -> int:
        return self.other_measure(r, self._settings[t])


def parse_adversary(spec: str, true_level: int) -> tuple[UserBehavior, int | None]:
    """Parse ``none | classical | cross-level:K | fabricate | angles:B0,B1``.

    Returns the behaviour and the level it requests (None = the true level).
    """
    spec = (spec or "none").strip()
    if spec in ("none", "honest"):
        return Honest(), None
    if spec == "classical":
        return ClassicalTable(), None
    if spec == "fabricate":
        return Fabricate(), None
    if spec.startswith("cross-level:"):
        k = int(spec.split(":", 1)[1])
        if k <= true_level:
            raise ValueError(f"cross-level target {k} must exceed the true level {true_level}")
        return OwnLevelStrategy(true_level), k
    if spec.startswith("angles:"):
        b0, b1 = (float(x) for x in spec.split(":", 1)[1].split(","))
        return FixedAngles(b0, b1), None
    raise ValueError(f"unknown adversary spec {spec!r}")

