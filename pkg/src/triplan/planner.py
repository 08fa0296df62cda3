"""Enumerate feasible 3D-parallel layouts and rank them by a utilization proxy."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Callable, List, Optional, Sequence, Tuple

from ._format import fmt
from .analytic import RatioSet, ratio_set
from .model import TOKEN_CAP, ClusterShape, ModelShape, ParallelConfig, memory_per_gpu

DEFAULT_MICRO_BATCHES = (1, 2, 4, 8)
# Powers of two plus the global batch sizes used for the 13B and 245B models.
DEFAULT_GLOBAL_BATCHES = tuple(2**k for k in range(5, 13)) + (2688, 3360)

PLAN_COLUMNS = (
    "rank", "t", "p", "d", "b", "B", "m", "l",
    "f_tp", "f_pp", "f_dp", "f_pb", "memory", "score",
)


@dataclass(frozen=True)
class MemoryModel:
    bytes_per_param: float = 2.0
    optimizer_multiplier: float = 8.0
    k1: float = 34.0
    k2: float = 5.0

    def estimate(self, shape: ModelShape, cfg: ParallelConfig) -> float:
        return memory_per_gpu(
            shape, cfg, self.bytes_per_param, self.optimizer_multiplier, self.k1, self.k2
        )


@dataclass(frozen=True)
class PlanQuery:
    shape: ModelShape
    cluster: ClusterShape
    global_batch_candidates: Tuple[int, ...] = DEFAULT_GLOBAL_BATCHES
    micro_batch_candidates: Tuple[int, ...] = DEFAULT_MICRO_BATCHES
    enforce_token_cap: bool = True
    enforce_node_limit: bool = True
    memory_budget: Optional[float] = None
    memory_model: MemoryModel = field(default_factory=MemoryModel)

    def __post_init__(self):
        object.__setattr__(self, "global_batch_candidates", tuple(self.global_batch_candidates))
        object.__setattr__(self, "micro_batch_candidates", tuple(self.micro_batch_candidates))
        for name in ("global_batch_candidates", "micro_batch_candidates"):
            values = getattr(self, name)
            if not values:
                raise ValueError(f"{name} must be non-empty")
            if any(v < 1 for v in values):
                raise ValueError(f"{name} must be positive, got {values}")


@dataclass(frozen=True)
class RankedPlan:
    cfg: ParallelConfig
    metrics: RatioSet
    memory_bytes: float
    score: float
    rank: int


def _divisors(n: int) -> List[int]:
    small = [k for k in range(1, math.isqrt(n) + 1) if n % k == 0]
    return sorted(set(small + [n // k for k in small]))


def enumerate_configs(query: PlanQuery) -> List[ParallelConfig]:
    """All feasible ``(t, p, d, b, B)`` in lexicographic order."""
    shape, cluster = query.shape, query.cluster
    n = cluster.n_gpus
    out = []
    for t in _divisors(n):
        if shape.hidden % t or (query.enforce_node_limit and t > cluster.gpus_per_node):
            continue
        for p in _divisors(n // t):
            if shape.layers % p:
                continue
            d = n // (t * p)
            for b in sorted(set(query.micro_batch_candidates)):
                for B in sorted(set(query.global_batch_candidates)):
                    if B % (d * b):
                        continue
                    if query.enforce_token_cap and B * shape.seq_len >= TOKEN_CAP:
                        continue
                    out.append(ParallelConfig(t, p, d, b, B))
    return out


def _saturation(f: float) -> float:
    return 1.0 if math.isinf(f) else f / (1.0 + f)


def score(metrics: RatioSet) -> float:
    """Utilization proxy in ``(0, 1]``.

    Each compute/communication ratio ``f`` becomes the busy fraction
    ``f / (1 + f)`` of a non-overlapped step; the bubble stretches the step by
    ``1 + f_pb``.
    """
    return (
        _saturation(metrics.f_tp)
        * _saturation(metrics.f_pp)
        * _saturation(metrics.f_dp)
        / (1.0 + metrics.f_pb)
    )


def _tie_break(plan_score: float, cfg: ParallelConfig):
    return (-plan_score, cfg.p, cfg.t, cfg.d, cfg.b, cfg.B)


def rank(
    query: PlanQuery,
    scorer: Callable[[RatioSet], float] = score,
    workers: int = 1,
) -> List[RankedPlan]:
    """Score every feasible layout and return them best-first.

    Equal scores are ordered by fewer pipeline stages, then smaller tensor,
    data, micro-batch and global-batch sizes. The result does not depend on
    ``workers``.
    """
    configs = enumerate_configs(query)

    def evaluate(cfg):
        metrics = ratio_set(query.shape, cfg, query.cluster)
        return cfg, metrics, query.memory_model.estimate(query.shape, cfg), scorer(metrics)

    if workers > 1 and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            evaluated = list(pool.map(evaluate, configs))
    else:
        evaluated = [evaluate(cfg) for cfg in configs]

    if query.memory_budget is not None:
        evaluated = [row for row in evaluated if row[2] <= query.memory_budget]
    evaluated.sort(key=lambda row: _tie_break(row[3], row[0]))
    return [
        RankedPlan(cfg, metrics, mem, s, i)
        for i, (cfg, metrics, mem, s) in enumerate(evaluated, start=1)
    ]


def plan_row(plan: RankedPlan, shape: ModelShape) -> List[str]:
    cfg, r = plan.cfg, plan.metrics
    return [
        str(plan.rank), str(cfg.t), str(cfg.p), str(cfg.d), str(cfg.b), str(cfg.B),
        str(cfg.m), str(cfg.layers_per_stage(shape)),
        fmt(r.f_tp), fmt(r.f_pp), fmt(r.f_dp), fmt(r.f_pb),
        fmt(plan.memory_bytes), fmt(plan.score),
    ]


def write_plans_tsv(plans: Sequence[RankedPlan], shape: ModelShape, fh: IO[str]) -> None:
    writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
    writer.writerow(PLAN_COLUMNS)
    for plan in plans:
        writer.writerow(plan_row(plan, shape))


def read_plans_tsv(fh: IO[str]) -> List[dict]:
    reader = csv.DictReader(fh, delimiter="\t")
    if tuple(reader.fieldnames or ()) != PLAN_COLUMNS:
        raise ValueError(f"plan header must be {' '.join(PLAN_COLUMNS)}")
    rows = []
    for r in reader:
        row = {k: int(r[k]) for k in PLAN_COLUMNS[:8]}
        row.update({k: float(r[k]) for k in PLAN_COLUMNS[8:]})
        rows.append(row)
    return rows
