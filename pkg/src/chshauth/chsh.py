"""CHSH game: winning predicate, optimal strategies, exact win probabilities."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .qsim import (
    MeasurementSetting,
    QuantumDomainError,
    TwoQubitPureState,
    joint_distribution,
)

CLASSICAL_BOUND = 0.75
TSIRELSON_BOUND = math.cos(math.pi / 8) ** 2

QUESTIONS = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class QuestionPair:
    s: int
    t: int


@dataclass(frozen=True)
class QuantumStrategy:
    """Settings indexed by question: Alice by s, Bob by t."""

    alice_settings: tuple[MeasurementSetting, MeasurementSetting]
    bob_settings: tuple[MeasurementSetting, MeasurementSetting]

    @classmethod
    def from_angles(cls, alice, bob) -> "QuantumStrategy":
        return cls(
            tuple(MeasurementSetting(x) for x in alice),
            tuple(MeasurementSetting(x) for x in bob),
        )


@dataclass(frozen=True)
class ClassicalStrategy:
    alice_table: tuple[int, int]
    bob_table: tuple[int, int]


def is_win(q: QuestionPair, a: int, b: int) -> bool:
    return (q.s & q.t) == (a ^ b)


def wins(s: int, t: int, a: int, b: int) -> bool:
    """Same predicate as :func:`is_win` on plain bits."""
    return (s & t) == (a ^ b)


def omega_of_concurrence(c: float) -> float:
    """Optimal CHSH winning probability for a resource of concurrence ``c``."""
    if not (0.0 <= c <= 1.0):
        raise QuantumDomainError(f"concurrence must lie in [0, 1], got {c!r}")
    return 0.5 + 0.25 * math.sqrt(1.0 + c * c)


def omega_of_theta(theta: float) -> float:
    if not (0.0 <= theta <= math.pi / 4 + 1e-15):
        raise QuantumDomainError(f"theta must lie in [0, pi/4], got {theta!r}")
    return omega_of_concurrence(min(1.0, math.sin(2 * theta)))


def optimal_bob_angle(theta: float) -> float:
    """Angle beta with tan(beta) = sin(2 theta)."""
    return math.atan(math.sin(2 * theta))


def optimal_strategy(theta: float) -> QuantumStrategy:
    """Alice measures Z / X; Bob measures at +beta / -beta with tan(beta) = sin(2 theta)."""
    if not (0.0 <= theta <= math.pi / 4 + 1e-15):
        raise QuantumDomainError(f"theta must lie in [0, pi/4], got {theta!r}")
    beta = optimal_bob_angle(theta)
    return QuantumStrategy.from_angles((0.0, math.pi / 2), (beta, -beta))


def win_probability(state: TwoQubitPureState, strat: QuantumStrategy) -> float:
    total = 0.0
    for s, t in QUESTIONS:
        dist = joint_distribution(state, strat.alice_settings[s], strat.bob_settings[t])
        total += sum(dist[a, b] for a in (0, 1) for b in (0, 1) if wins(s, t, a, b))
    return total / 4


def classical_win_probability(strat: ClassicalStrategy) -> float:
    won = sum(wins(s, t, strat.alice_table[s], strat.bob_table[t]) for s, t in QUESTIONS)
    return won / 4


def all_classical_strategies():
    for a0, a1, b0, b1 in itertools.product((0, 1), repeat=4):
        yield ClassicalStrategy((a0, a1), (b0, b1))


def classical_maximum() -> tuple[ClassicalStrategy, float]:
    """Best deterministic strategy by exhaustive search over all 16."""
    best = max(all_classical_strategies(), key=classical_win_probability)
    return best, classical_win_probability(best)
