"""Learning-rate and global-batch schedules over the token budget.

The learning rate warms up linearly from 0 to ``peak_lr`` over the first
``warmup_fraction`` of tokens, then follows a half cosine down to
``final_lr_fraction * peak_lr``, reached exactly at ``total_tokens``. The
global batch grows linearly from ``batch_start`` to ``batch_full`` over the
first ``batch_ramp_fraction`` of tokens and stays there.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, List, Optional

from ._format import fmt
from .model import TOKEN_CAP

SCHEDULE_COLUMNS = ("token", "lr", "batch")


@dataclass(frozen=True)
class ScheduleSpec:
    total_tokens: float
    peak_lr: float
    batch_full: int
    seq_len: int = 2048
    final_lr_fraction: float = 0.1
    warmup_fraction: float = 0.01
    batch_ramp_fraction: float = 0.02
    # Global batch sizes are rounded to multiples of this (``d * b`` of an
    # attached parallel layout), keeping the micro-batch count integral.
    batch_multiple: int = 1
    batch_start: Optional[int] = None
    weight_decay: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.95
    enforce_token_cap: bool = True

    def __post_init__(self):
        if self.batch_start is None:
            object.__setattr__(self, "batch_start", self.batch_multiple)
        if not self.total_tokens > 0:
            raise ValueError("total_tokens must be positive")
        if not self.peak_lr > 0:
            raise ValueError("peak_lr must be positive")
        if not 0 < self.final_lr_fraction <= 1:
            raise ValueError("final_lr_fraction must be in (0, 1]")
        for name in ("warmup_fraction", "batch_ramp_fraction"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must be in [0, 1)")
        if self.batch_multiple < 1:
            raise ValueError("batch_multiple must be >= 1")
        if not 0 < self.batch_start <= self.batch_full:
            raise ValueError(
                f"need 0 < batch_start <= batch_full, got {self.batch_start}, {self.batch_full}"
            )
        for name in ("batch_start", "batch_full"):
            if getattr(self, name) % self.batch_multiple:
                raise ValueError(f"{name} must be a multiple of batch_multiple={self.batch_multiple}")
        if self.enforce_token_cap and self.batch_full * self.seq_len >= TOKEN_CAP:
            raise ValueError(
                f"batch_full*seq_len = {self.batch_full * self.seq_len} exceeds the {TOKEN_CAP} token cap"
            )

    @property
    def warmup_tokens(self) -> float:
        return self.warmup_fraction * self.total_tokens

    @property
    def ramp_tokens(self) -> float:
        return self.batch_ramp_fraction * self.total_tokens

    @property
    def final_lr(self) -> float:
        return self.final_lr_fraction * self.peak_lr


@dataclass(frozen=True)
class SchedulePoint:
    token: float
    lr: float
    batch: int


def _check_token(spec: ScheduleSpec, token: float) -> None:
    if not 0 <= token <= spec.total_tokens:
        raise ValueError(f"token {token} outside [0, {spec.total_tokens}]")


def lr_at(spec: ScheduleSpec, token: float) -> float:
    _check_token(spec, token)
    w = spec.warmup_tokens
    if token <= w:
        return spec.peak_lr if w == 0 else spec.peak_lr * (token / w)
    x = (token - w) / (spec.total_tokens - w)
    return spec.final_lr + 0.5 * (spec.peak_lr - spec.final_lr) * (1.0 + math.cos(math.pi * x))


def batch_at(spec: ScheduleSpec, token: float) -> int:
    _check_token(spec, token)
    r = spec.ramp_tokens
    if token >= r:
        return spec.batch_full
    raw = spec.batch_start + (spec.batch_full - spec.batch_start) * (token / r)
    q = spec.batch_multiple
    # Half-up rounding keeps the ramp monotone.
    rounded = math.floor(raw / q + 0.5) * q
    return min(max(rounded, spec.batch_start), spec.batch_full)


def emit(spec: ScheduleSpec, samples: int) -> List[SchedulePoint]:
    if samples < 2:
        raise ValueError("samples must be >= 2")
    points = []
    for k in range(samples):
        token = spec.total_tokens if k == samples - 1 else spec.total_tokens * k / (samples - 1)
        points.append(SchedulePoint(token, lr_at(spec, token), batch_at(spec, token)))
    return points


def write_schedule_csv(points: List[SchedulePoint], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SCHEDULE_COLUMNS)
    for pt in points:
        writer.writerow([fmt(pt.token), fmt(pt.lr), pt.batch])


def read_schedule_csv(fh: IO[str]) -> List[SchedulePoint]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != SCHEDULE_COLUMNS:
        raise ValueError(f"schedule header must be {','.join(SCHEDULE_COLUMNS)}")
    return [SchedulePoint(float(r["token"]), float(r["lr"]), int(r["batch"])) for r in reader]
