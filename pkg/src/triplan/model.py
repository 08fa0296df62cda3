"""Structural types and parameter / FLOP / memory accounting for transformer LMs."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

TOKEN_CAP = 10**7


class ConstraintError(ValueError):
    """A configuration does not divide the model or cluster it is paired with."""


@dataclass(frozen=True)
class ModelShape:
    layers: int
    hidden: int
    seq_len: int
    vocab: int = 56_000
    recompute: bool = True

    def __post_init__(self):
        for name in ("layers", "hidden", "seq_len", "vocab"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.hidden % 2:
            raise ValueError(f"hidden must be even, got {self.hidden}")


@dataclass(frozen=True)
class ClusterShape:
    n_gpus: int
    gpus_per_node: int = 8
    peak_tflops_per_gpu: Optional[float] = None
    # Optional multipliers applied to the dimensionless ratios: intra-node
    # scales the tensor-parallel ratio, inter-node the pipeline and data ratios.
    intra_node_ratio: Optional[float] = None
    inter_node_ratio: Optional[float] = None

    def __post_init__(self):
        if self.n_gpus < 1 or self.gpus_per_node < 1:
            raise ValueError("n_gpus and gpus_per_node must be positive")
        if self.n_gpus % self.gpus_per_node and self.n_gpus > self.gpus_per_node:
            raise ValueError(
                f"gpus_per_node={self.gpus_per_node} does not divide n_gpus={self.n_gpus}"
            )
        for name in ("peak_tflops_per_gpu", "intra_node_ratio", "inter_node_ratio"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive when given, got {value!r}")


@dataclass(frozen=True, order=True)
class ParallelConfig:
    """One 3D-parallel layout: tensor ``t``, pipeline ``p``, data ``d``,
    micro-batch ``b`` and global batch ``B`` (both in sequences)."""

    t: int
    p: int
    d: int
    b: int
    B: int

    def __post_init__(self):
        for name in ("t", "p", "d", "b", "B"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def n_gpus(self) -> int:
        return self.t * self.p * self.d

    @property
    def m(self) -> int:
        """Micro-batches per pipeline group."""
        if self.B % (self.d * self.b):
            raise ConstraintError(f"d*b={self.d * self.b} does not divide B={self.B}")
        return self.B // (self.d * self.b)

    def layers_per_stage(self, shape: ModelShape) -> int:
        if shape.layers % self.p:
            raise ConstraintError(f"p={self.p} does not divide L={shape.layers}")
        return shape.layers // self.p


class Constraint(str, Enum):
    GPU_PRODUCT = "t*p*d=n"
    PIPELINE_DIVIDES_LAYERS = "p|L"
    TENSOR_DIVIDES_HIDDEN = "t|h"
    MICROBATCHES_DIVIDE_BATCH = "(d*b)|B"
    TENSOR_WITHIN_NODE = "t<=gpus_per_node"
    TOKEN_CAP = "B*S<1e7"


def param_count(shape: ModelShape) -> float:
    """12*L*h^2 for the blocks plus token and position embeddings."""
    L, h = shape.layers, shape.hidden
    return float(12 * L * h * h + shape.vocab * h + shape.seq_len * h)


def flops_factor(recompute: bool) -> int:
    return 8 if recompute else 6


def flops_per_token(shape: ModelShape) -> float:
    return flops_factor(shape.recompute) * param_count(shape)


def validate(
    cfg: ParallelConfig,
    shape: ModelShape,
    cluster: ClusterShape,
    *,
    enforce_token_cap: bool = True,
    enforce_node_limit: bool = True,
) -> List[Constraint]:
    """Return every violated constraint; an empty list means ``cfg`` is feasible."""
    violations = []
    if cfg.t * cfg.p * cfg.d != cluster.n_gpus:
        violations.append(Constraint.GPU_PRODUCT)
    if shape.layers % cfg.p:
        violations.append(Constraint.PIPELINE_DIVIDES_LAYERS)
    if shape.hidden % cfg.t:
        violations.append(Constraint.TENSOR_DIVIDES_HIDDEN)
    if cfg.B % (cfg.d * cfg.b):
        violations.append(Constraint.MICROBATCHES_DIVIDE_BATCH)
    if enforce_node_limit and cfg.t > cluster.gpus_per_node:
        violations.append(Constraint.TENSOR_WITHIN_NODE)
    if enforce_token_cap and cfg.B * shape.seq_len >= TOKEN_CAP:
        violations.append(Constraint.TOKEN_CAP)
    return violations


def memory_per_gpu(
    shape: ModelShape,
    cfg: ParallelConfig,
    bytes_per_param: float = 2.0,
    optimizer_multiplier: float = 8.0,
    k1: float = 34.0,
    k2: float = 5.0,
) -> float:
    """Estimated bytes resident on one GPU.

    Weights and optimizer state are sharded over ``t*p`` devices. Activations
    are held for ``min(m, p)`` in-flight micro-batches on each of the stage's
    ``l`` layers; with recomputation only the layer inputs are kept.
    """
    if shape.hidden % cfg.t:
        raise ConstraintError(f"t={cfg.t} does not divide h={shape.hidden}")
    l = cfg.layers_per_stage(shape)
    m = cfg.m
    b, S, h = cfg.b, shape.seq_len, shape.hidden

    weights = param_count(shape) / (cfg.t * cfg.p) * bytes_per_param * optimizer_multiplier
    if shape.recompute:
        per_layer = 2 * bytes_per_param * b * S * h
    else:
        per_layer = k1 * b * S * h + k2 * b * S * S
    return weights + per_layer * l * min(m, cfg.p)
