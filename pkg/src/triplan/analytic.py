"""Closed-form compute-to-communication ratios, bubble fraction and compute budget.

All ratios are dimensionless proxies: bandwidth and throughput constants are
not modelled, so values are only meaningful relative to one another.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .model import (
    ClusterShape,
    ConstraintError,
    ModelShape,
    ParallelConfig,
    flops_factor,
    validate,
)

FLOPS_PER_PETAFLOP_DAY = 8.64e19


@dataclass(frozen=True)
class RatioSet:
    f_tp: float
    f_pp: float
    f_dp: float
    f_pb: float
    f_dp_approx: float = math.nan


@dataclass(frozen=True)
class TrainBudget:
    tokens: float
    params: float
    factor: int
    petaflops_days: float


def tensor_ratio(t: int, h: int, S: int) -> float:
    """Per-layer compute/communication ratio of a ``t``-way tensor-parallel group."""
    if t <= 1:
        raise ValueError("tensor ratio undefined for t <= 1")
    return 96 * t / (8 * (t - 1)) * (h + S / 6)


def bubble_fraction(L: int, l: int, m: int) -> float:
    """Pipeline idle time relative to ideal compute time, ``(L/l - 1) / m``."""
    if l < 1 or L % l:
        raise ConstraintError(f"layers per stage l={l} does not divide L={L}")
    if m < 1:
        raise ValueError(f"micro-batch count must be >= 1, got {m}")
    return (L // l - 1) / m


def pipeline_ratio(L: int, p: int, h: int, S: int) -> float:
    if p < 1 or L % p:
        raise ConstraintError(f"p={p} does not divide L={L}")
    return 24 * (L // p) * (h + S / 6)


def data_ratio(B: int, S: int, d: int) -> Tuple[float, float]:
    """Return ``(exact, approx)`` data-parallel compute/communication ratios.

    The approximation drops the ``d/(d-1)`` factor; see
    :func:`data_ratio_approx` for the form that is defined at ``d == 1``.
    """
    if d <= 1:
        raise ValueError("exact data ratio undefined for d <= 1")
    approx = data_ratio_approx(B, S)
    # Scaling the approximation keeps exact / approx == d / (d - 1) bit-exact.
    return approx * (d / (d - 1)), approx


def data_ratio_approx(B: int, S: int) -> float:
    return 4.0 * B * S


def petaflops_days(tokens: float, params: float, recompute: bool) -> float:
    if tokens < 0 or params < 0:
        raise ValueError("tokens and params must be non-negative")
    return flops_factor(recompute) * tokens * params / FLOPS_PER_PETAFLOP_DAY


def train_budget(tokens: float, params: float, recompute: bool) -> TrainBudget:
    return TrainBudget(
        tokens=tokens,
        params=params,
        factor=flops_factor(recompute),
        petaflops_days=petaflops_days(tokens, params, recompute),
    )


def ratio_set(
    shape: ModelShape,
    cfg: ParallelConfig,
    cluster: Optional[ClusterShape] = None,
) -> RatioSet:
    """Evaluate all four ratios for one configuration.

    ``t == 1`` and ``d == 1`` carry no communication and map to ``inf``.
    When ``cluster`` is given its constraints are checked and its optional
    hardware multipliers are applied.
    """
    if cluster is not None:
        violations = validate(cfg, shape, cluster)
        if violations:
            names = ", ".join(v.value for v in violations)
            raise ConstraintError(f"configuration {cfg} violates: {names}")
    h, S, L = shape.hidden, shape.seq_len, shape.layers
    l = cfg.layers_per_stage(shape)

    f_tp = math.inf if cfg.t == 1 else tensor_ratio(cfg.t, h, S)
    f_pp = pipeline_ratio(L, cfg.p, h, S)
    if cfg.d == 1:
        f_dp, f_dp_approx = math.inf, data_ratio_approx(cfg.B, S)
    else:
        f_dp, f_dp_approx = data_ratio(cfg.B, S, cfg.d)
    f_pb = bubble_fraction(L, l, cfg.m)

    if cluster is not None:
        if cluster.intra_node_ratio is not None:
            f_tp *= cluster.intra_node_ratio
        if cluster.inter_node_ratio is not None:
            f_pp *= cluster.inter_node_ratio
            f_dp *= cluster.inter_node_ratio
            f_dp_approx *= cluster.inter_node_ratio
    return RatioSet(f_tp=f_tp, f_pp=f_pp, f_dp=f_dp, f_pb=f_pb, f_dp_approx=f_dp_approx)
