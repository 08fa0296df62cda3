"""Run configuration: a YAML document with ``model``, ``cluster``, ``search``
and ``schedule`` sections. Unknown keys are rejected; omitted optional keys
take the defaults below and are echoed back by :meth:`RunConfig.echo`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import yaml

from ._format import fmt
from .model import ClusterShape, ModelShape
from .planner import DEFAULT_GLOBAL_BATCHES, DEFAULT_MICRO_BATCHES, MemoryModel, PlanQuery
from .schedule import ScheduleSpec

REQUIRED = object()

# section -> key -> (kind, default)
SCHEMA: Dict[str, Dict[str, Tuple[str, Any]]] = {
    "model": {
        "layers": ("int", REQUIRED),
        "hidden": ("int", REQUIRED),
        "seq_len": ("int", REQUIRED),
        "vocab": ("int", 56_000),
        "recompute": ("bool", True),
    },
    "cluster": {
        "n_gpus": ("int", REQUIRED),
        "gpus_per_node": ("int", 8),
        "peak_tflops_per_gpu": ("float?", None),
        "intra_node_ratio": ("float?", None),
        "inter_node_ratio": ("float?", None),
    },
    "search": {
        "global_batch_candidates": ("ints", list(DEFAULT_GLOBAL_BATCHES)),
        "micro_batch_candidates": ("ints", list(DEFAULT_MICRO_BATCHES)),
        "enforce_token_cap": ("bool", True),
        "enforce_node_limit": ("bool", True),
        "memory_budget": ("float?", None),
        "bytes_per_param": ("float", 2.0),
        "optimizer_multiplier": ("float", 8.0),
        "activation_k1": ("float", 34.0),
        "activation_k2": ("float", 5.0),
    },
    "schedule": {
        "peak_lr": ("float", REQUIRED),
        "total_tokens": ("float", REQUIRED),
        "global_batch": ("int", REQUIRED),
        "final_lr_fraction": ("float", 0.1),
        "warmup_fraction": ("float", 0.01),
        "batch_ramp_fraction": ("float", 0.02),
        "data_parallel": ("int", 1),
        "micro_batch": ("int", 1),
        "batch_start": ("int?", None),
        "weight_decay": ("float", 0.1),
        "adam_beta1": ("float", 0.9),
        "adam_beta2": ("float", 0.95),
        "enforce_token_cap": ("bool", True),
    },
}
REQUIRED_SECTIONS = ("model", "cluster")


class ConfigError(ValueError):
    pass


def _collect_lines(text: str) -> Dict[Tuple[str, ...], int]:
    lines: Dict[Tuple[str, ...], int] = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                sub = path + (str(key.value),)
                lines[sub] = key.start_mark.line + 1
                walk(value, sub)

    root = yaml.compose(text, Loader=yaml.SafeLoader)
    if root is not None:
        walk(root, ())
    return lines


def _coerce(kind: str, value: Any, where: str) -> Any:
    optional = kind.endswith("?")
    kind = kind.rstrip("?")
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{where}: value required")
    if kind == "bool":
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{where}: expected true/false, got {value!r}")
    if kind == "int":
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if kind == "float":
        if isinstance(value, bool):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        try:
            # PyYAML reads exponent forms like 180e9 as strings.
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if kind == "ints":
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where}: expected a non-empty list of integers")
        return [_coerce("int", v, where) for v in value]
    raise AssertionError(kind)


@dataclass(frozen=True)
class RunConfig:
    model: Dict[str, Any]
    cluster: Dict[str, Any]
    search: Dict[str, Any]
    schedule: Optional[Dict[str, Any]]

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        try:
            data = yaml.safe_load(text)
            lines = _collect_lines(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            loc = f"line {mark.line + 1}" if mark is not None else "config"
            raise ConfigError(f"{loc}: malformed YAML: {getattr(exc, 'problem', exc)}") from None
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("line 1: top level must be a mapping of sections")

        def where(*path):
            line = lines.get(path)
            prefix = f"line {line}: " if line else ""
            return f"{prefix}key '{'.'.join(path)}'"

        for section in data:
            if section not in SCHEMA:
                raise ConfigError(f"{where(str(section))}: unknown section")
        sections = {}
        for section, fields in SCHEMA.items():
            raw = data.get(section)
            if raw is None:
                if section in REQUIRED_SECTIONS:
                    raise ConfigError(f"config: missing required section '{section}'")
                if section == "schedule":
                    sections[section] = None
                    continue
                raw = {}
            if not isinstance(raw, dict):
                raise ConfigError(f"{where(section)}: section must be a mapping")
            for key in raw:
                if key not in fields:
                    raise ConfigError(f"{where(section, str(key))}: unknown key")
            resolved = {}
            for key, (kind, default) in fields.items():
                if key in raw:
                    resolved[key] = _coerce(kind, raw[key], where(section, key))
                elif default is REQUIRED:
                    raise ConfigError(f"{where(section)}: missing required key '{key}'")
                else:
                    resolved[key] = list(default) if isinstance(default, list) else default
            sections[section] = resolved
        cfg = cls(**sections)
        cfg._check()
        return cfg

    @classmethod
    def from_path(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def _check(self) -> None:
        try:
            self.model_shape()
            self.cluster_shape()
            self.plan_query()
            if self.schedule is not None:
                self.schedule_spec()
        except ValueError as exc:
            raise ConfigError(f"config: {exc}") from None

    def model_shape(self) -> ModelShape:
        return ModelShape(**self.model)

    def cluster_shape(self) -> ClusterShape:
        return ClusterShape(**self.cluster)

    def plan_query(self) -> PlanQuery:
        s = self.search
        return PlanQuery(
            shape=self.model_shape(),
            cluster=self.cluster_shape(),
            global_batch_candidates=s["global_batch_candidates"],
            micro_batch_candidates=s["micro_batch_candidates"],
            enforce_token_cap=s["enforce_token_cap"],
            enforce_node_limit=s["enforce_node_limit"],
            memory_budget=s["memory_budget"],
            memory_model=MemoryModel(
                s["bytes_per_param"], s["optimizer_multiplier"],
                s["activation_k1"], s["activation_k2"],
            ),
        )

    def schedule_spec(self) -> ScheduleSpec:
        if self.schedule is None:
            raise ConfigError("config: missing required section 'schedule'")
        s = self.schedule
        return ScheduleSpec(
            total_tokens=s["total_tokens"],
            peak_lr=s["peak_lr"],
            batch_full=s["global_batch"],
            seq_len=self.model["seq_len"],
            final_lr_fraction=s["final_lr_fraction"],
            warmup_fraction=s["warmup_fraction"],
            batch_ramp_fraction=s["batch_ramp_fraction"],
            batch_multiple=s["data_parallel"] * s["micro_batch"],
            batch_start=s["batch_start"],
            weight_decay=s["weight_decay"],
            adam_beta1=s["adam_beta1"],
            adam_beta2=s["adam_beta2"],
            enforce_token_cap=s["enforce_token_cap"],
        )

    def echo(self, sections=("model", "cluster", "search")) -> List[str]:
        """Resolved settings as ``section.key = value`` lines."""
        out = []
        for section in sections:
            values = getattr(self, section)
            if values is None:
                continue
            for key, value in values.items():
                if isinstance(value, list):
                    text = ",".join(str(v) for v in value)
                elif value is None:
                    text = "none"
                else:
                    text = fmt(value)
                out.append(f"{section}.{key} = {text}")
        return out
