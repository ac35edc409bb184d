"""Repeated sessions with summary statistics, for the ``simulate`` command."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction

from .planner import CLASSICAL_FRACTION, ProtocolParams, build_level_table, plan_params
from .protocol.adversary import parse_adversary
from .protocol.batch import run_batch_session
from .protocol.session import run_session

CSV_COLUMNS = ("run", "true_level", "requested_level", "wins", "verdict")
ENGINES = ("protocol", "batch")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    lam: int = 128
    ell: int = 2
    mode: str = "paper"
    level_k: int = 1
    adversary: str = "none"
    runs: int = 1
    seed: int = 0
    n_override: int | None = None
    engine: str = "protocol"
    workers: int = 1


@dataclass(frozen=True)
class RunRow:
    run: int
    true_level: int
    requested_level: int
    wins: int
    verdict: str


@dataclass(frozen=True)
class Summary:
    runs: int
    accepted: int
    acceptance_fraction: float
    mean_wins: float
    std_wins: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def with_rounds(params: ProtocolParams, N: int) -> ProtocolParams:
    """Same relative deviation c, re-instantiated at N rounds."""
    mu = CLASSICAL_FRACTION * N
    eps = math.floor(params.c * mu)
    c = params.c if params.mode == "paper" else Fraction(eps) / mu
    return replace(params, N=N, mu=mu, epsilon=eps, c=c)


def validate(cfg: RunConfig) -> None:
    if cfg.ell < 1 or cfg.lam < 1:
        raise ConfigError("lambda and ell must be >= 1")
    if not (1 <= cfg.level_k <= cfg.ell):
        raise ConfigError(f"level {cfg.level_k} outside 1..{cfg.ell}")
    if cfg.runs < 1:
        raise ConfigError("at least one run is required")
    if cfg.engine not in ENGINES:
        raise ConfigError(f"engine must be one of {ENGINES}")
    if cfg.n_override is not None and cfg.n_override < 1:
        raise ConfigError("N override must be >= 1")
    try:
        _, requested = parse_adversary(cfg.adversary, cfg.level_k)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if requested is not None and requested > cfg.ell:
        raise ConfigError(f"requested level {requested} outside 1..{cfg.ell}")


def verdict_label(verdict) -> str:
    if verdict.granted_level is not None:
        return f"granted:{verdict.granted_level}"
    return f"abort:{verdict.abort_reason}"


def _one_run(cfg: RunConfig, params: ProtocolParams, run: int) -> RunRow:
    table = build_level_table(cfg.ell)
    behavior, requested = parse_adversary(cfg.adversary, cfg.level_k)
    requested = requested or cfg.level_k
    runner = run_session if cfg.engine == "protocol" else run_batch_session
    kwargs = {"wire": False} if cfg.engine == "protocol" else {}
    res = runner(params, table, requested, behavior, seed=cfg.seed, session_index=run,
                 true_level=cfg.level_k, **kwargs)
    return RunRow(run, cfg.level_k, requested, res.transcript.wins(), verdict_label(res.verdict))


def _chunk(args):
    cfg, params, runs = args
    return [_one_run(cfg, params, r) for r in runs]


def simulate(cfg: RunConfig) -> tuple[list[RunRow], Summary]:
    validate(cfg)
    params = plan_params(cfg.lam, cfg.ell, cfg.mode)
    if cfg.n_override:
        params = with_rounds(params, cfg.n_override)
    if cfg.workers > 1:
        chunks = [(cfg, params, range(i, cfg.runs, cfg.workers)) for i in range(cfg.workers)]
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = sorted((r for part in pool.map(_chunk, chunks) for r in part), key=lambda r: r.run)
    else:
        rows = [_one_run(cfg, params, r) for r in range(cfg.runs)]
    return rows, summarize(rows)


def summarize(rows) -> Summary:
    n = len(rows)
    accepted = sum(r.verdict.startswith("granted") for r in rows)
    wins = [r.wins for r in rows]
    mean = sum(wins) / n if n else float("nan")
    std = math.sqrt(sum((w - mean) ** 2 for w in wins) / (n - 1)) if n > 1 else 0.0
    return Summary(n, accepted, accepted / n if n else float("nan"), mean, std)


def rows_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow((r.run, r.true_level, r.requested_level, r.wins, r.verdict))
    return buf.getvalue()


def read_rows_csv(text: str) -> list[RunRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ConfigError(f"unexpected CSV columns {reader.fieldnames}")
    return [RunRow(int(d["run"]), int(d["true_level"]), int(d["requested_level"]), int(d["wins"]), d["verdict"])
            for d in reader]
