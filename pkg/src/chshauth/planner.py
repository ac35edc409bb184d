"""Authorization levels and Chernoff-planned session parameters.

Two planning modes are provided:

``paper``
    c = 1/(2*ell), N = 2*lam/c^2, mu = 3N/4, eps = c*mu. These reproduce the
    published parameter table bit for bit, but adjacent acceptance intervals
    overlap when concurrences are split evenly.

``strict``
    eps is half the smallest gap between consecutive expected win counts
    (the classical 3/4 included), and N is the smallest count whose
    Chernoff tail with c = eps/mu is at most 2^-lam. Intervals are disjoint.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .chsh import CLASSICAL_BOUND, omega_of_concurrence

MODES = ("paper", "strict")
CLASSICAL_FRACTION = Fraction(3, 4)


class PlanningError(ValueError):
    """Parameters cannot be planned as requested."""


@dataclass(frozen=True)
class Level:
    index: int
    concurrence: float
    theta: float
    omega: float


@dataclass(frozen=True)
class LevelTable:
    levels: tuple[Level, ...]

    @property
    def ell(self) -> int:
        return len(self.levels)

    def level(self, k: int) -> Level:
        if not isinstance(k, int) or not (1 <= k <= self.ell):
            raise PlanningError(f"level must be in 1..{self.ell}, got {k!r}")
        return self.levels[k - 1]

    def omegas(self) -> list[float]:
        return [lv.omega for lv in self.levels]


@dataclass(frozen=True)
class ProtocolParams:
    lam: int
    ell: int
    c: Fraction
    N: int
    mu: Fraction
    epsilon: int
    mode: str = "paper"

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "ell": self.ell,
            "c": float(self.c),
            "N": self.N,
            "mu": float(self.mu),
            "epsilon": self.epsilon,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolParams":
        N = int(d["N"])
        eps = int(d["epsilon"])
        mu = CLASSICAL_FRACTION * N
        if d["mode"] == "paper":
            c = Fraction(1, 2 * int(d["ell"]))
        else:
            c = Fraction(eps) / mu
        return cls(int(d["lambda"]), int(d["ell"]), c, N, mu, eps, d["mode"])


def build_level_table(ell: int) -> LevelTable:
    """Split concurrence evenly: C_i = i/ell for i = 1..ell."""
    if not isinstance(ell, int) or ell < 1:
        raise PlanningError(f"level count must be an integer >= 1, got {ell!r}")
    levels = []
    for i in range(1, ell + 1):
        c = i / ell
        levels.append(Level(i, c, math.asin(c) / 2, omega_of_concurrence(c)))
    return LevelTable(tuple(levels))


def chernoff_exponent(c, N: int):
    """c^2 N / 2, exact when ``c`` is a Fraction."""
    return c * c * N / 2


def chernoff_tail(c, N: int) -> float:
    """Bound 2^(-c^2 N/2) on Pr[|X - mu| >= c mu] for N Bernoulli trials."""
    if c <= 0 or N < 1:
        raise PlanningError("chernoff_tail needs c > 0 and N >= 1")
    return 2.0 ** (-float(chernoff_exponent(c, N)))


def min_gap(table: LevelTable) -> float:
    points = [CLASSICAL_BOUND] + table.omegas()
    return min(b - a for a, b in zip(points, points[1:]))


def plan_params(lam: int, ell: int, mode: str = "paper", table: LevelTable | None = None) -> ProtocolParams:
    if lam < 1 or ell < 1:
        raise PlanningError("lambda and ell must both be >= 1")
    if mode not in MODES:
        raise PlanningError(f"unknown mode {mode!r}")
    table = table or build_level_table(ell)
    if table.ell != ell:
        raise PlanningError(f"level table has {table.ell} levels, expected {ell}")

    if mode == "paper":
        c = Fraction(1, 2 * ell)
        N = math.ceil(Fraction(2 * lam) / (c * c))
        mu = CLASSICAL_FRACTION * N
        eps = math.floor(c * mu)
        return ProtocolParams(lam, ell, c, N, mu, eps, mode)
    return _plan_strict(lam, ell, table)


def _plan_strict(lam: int, ell: int, table: LevelTable) -> ProtocolParams:
    g = min_gap(table)
    if not g > 0:
        raise PlanningError(f"levels are not separated (min gap {g!r})")
    # c <= eps/mu <= (N g/2)/(3N/4) = 2g/3, so no N below this can work
    N = max(1, math.ceil(4.5 * lam / (g * g)))
    while True:
        eps = math.floor(N * g / 2)
        # rounding of the centers may close the gap by one count
        while eps > 0 and not _disjoint(N, eps, table):
            eps -= 1
        # (eps/mu)^2 N/2 >= lam  <=>  8 eps^2 >= 9 lam N   with mu = 3N/4
        if eps > 0 and 8 * eps * eps >= 9 * lam * N:
            mu = CLASSICAL_FRACTION * N
            return ProtocolParams(lam, ell, Fraction(eps) / mu, N, mu, eps, "strict")
        N += 1


def _center(N: int, omega: float) -> int:
    # round half to even
    return round(N * omega)


def _intervals(N: int, eps: int, table: LevelTable) -> list[tuple[int, int]]:
    return [(_center(N, lv.omega) - eps, _center(N, lv.omega) + eps) for lv in table.levels]


def _disjoint(N: int, eps: int, table: LevelTable) -> bool:
    ivs = _intervals(N, eps, table)
    classical = CLASSICAL_FRACTION * N
    if ivs[0][0] <= classical:
        return False
    return all(hi < lo for (_, hi), (lo, _) in zip(ivs, ivs[1:]))


def expected_wins(k: int, params: ProtocolParams, table: LevelTable) -> int:
    return _center(params.N, table.level(k).omega)


def acceptance_interval(level_k: int, params: ProtocolParams, table: LevelTable) -> tuple[int, int]:
    """Inclusive win-count window (lo, hi) for level ``level_k``."""
    center = expected_wins(level_k, params, table)
    return center - params.epsilon, center + params.epsilon


@dataclass(frozen=True)
class PairCheck:
    lower: int
    upper: int
    disjoint: bool
    margin: int  # lo(upper) - hi(lower); positive iff disjoint


@dataclass(frozen=True)
class OverlapReport:
    pairs: tuple[PairCheck, ...]
    classical_expectation: float
    classical_outside: bool
    intervals: tuple[tuple[int, int], ...] = field(default=())

    @property
    def passed(self) -> bool:
        return self.classical_outside and all(p.disjoint for p in self.pairs)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "classical_expectation": self.classical_expectation,
            "classical_outside": self.classical_outside,
            "pairs": [
                {"lower": p.lower, "upper": p.upper, "disjoint": p.disjoint, "margin": p.margin}
                for p in self.pairs
            ],
        }


def check_no_overlap(params: ProtocolParams, table: LevelTable) -> OverlapReport:
    ivs = [acceptance_interval(lv.index, params, table) for lv in table.levels]
    pairs = []
    for k in range(1, len(ivs)):
        margin = ivs[k][0] - ivs[k - 1][1]
        pairs.append(PairCheck(k, k + 1, margin > 0, margin))
    classical = float(CLASSICAL_FRACTION * params.N)
    outside = not any(lo <= classical <= hi for lo, hi in ivs)
    return OverlapReport(tuple(pairs), classical, outside, tuple(ivs))


TABLE_COLUMNS = ("level", "C", "theta", "omega", "lo", "hi")


def table_rows(params: ProtocolParams, table: LevelTable) -> list[dict]:
    rows = []
    for lv in table.levels:
        lo, hi = acceptance_interval(lv.index, params, table)
        rows.append(
            {"level": lv.index, "C": lv.concurrence, "theta": lv.theta, "omega": lv.omega, "lo": lo, "hi": hi}
        )
    return rows


def table_csv(params: ProtocolParams, table: LevelTable) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(table_rows(params, table))
    return buf.getvalue()


def plan_json(params: ProtocolParams, table: LevelTable) -> dict:
    return {
        "params": params.to_dict(),
        "chernoff_tail_log2": -float(chernoff_exponent(params.c, params.N)),
        "levels": table_rows(params, table),
        "overlap": check_no_overlap(params, table).to_dict(),
    }
