"""Void-prompt calibration and synonym-expanded label prediction.

Callers supply, for every candidate surface form, its log-probability given
the real prompt and given the same prompt with the input replaced by a void
text. Calibrated scores are the log of their ratio. A label's score
aggregates over its synonyms.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Dict, List, Sequence, Tuple

import numpy as np

AGGREGATIONS = ("max", "mean")
CALIB_COLUMNS = ("label", "synonym", "logp_given", "logp_void")


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class LabelSet:
    labels: Tuple[str, ...]
    synonyms: Dict[str, Tuple[str, ...]]

    def __post_init__(self):
        if not self.labels:
            raise CalibrationError("label set is empty")
        if len(set(self.labels)) != len(self.labels):
            raise CalibrationError("duplicate labels")
        for label in self.labels:
            syns = self.synonyms.get(label, ())
            if not syns:
                raise CalibrationError(f"label {label!r} has no synonyms")
            if len(set(syns)) != len(syns):
                raise CalibrationError(f"label {label!r} has duplicate synonyms")
        extra = set(self.synonyms) - set(self.labels)
        if extra:
            raise CalibrationError(f"synonyms given for unknown labels {sorted(extra)}")

    @classmethod
    def from_candidates(cls, candidates: Sequence[Tuple[str, str]]) -> "LabelSet":
        """Build a label set in first-appearance order."""
        synonyms: Dict[str, List[str]] = {}
        for label, syn in candidates:
            synonyms.setdefault(label, []).append(syn)
        return cls(tuple(synonyms), {k: tuple(v) for k, v in synonyms.items()})


@dataclass(frozen=True)
class ScoreTable:
    candidates: Tuple[Tuple[str, str], ...]  # (label, synonym) per row
    logp_given: np.ndarray
    logp_void: np.ndarray

    def __post_init__(self):
        given = np.asarray(self.logp_given, dtype=float).reshape(-1)
        void = np.asarray(self.logp_void, dtype=float).reshape(-1)
        object.__setattr__(self, "candidates", tuple(tuple(c) for c in self.candidates))
        object.__setattr__(self, "logp_given", given)
        object.__setattr__(self, "logp_void", void)
        if given.shape != void.shape or given.shape[0] != len(self.candidates):
            raise CalibrationError(
                f"shape mismatch: {len(self.candidates)} candidates, "
                f"given {given.shape}, void {void.shape}"
            )
        if not (np.all(np.isfinite(given)) and np.all(np.isfinite(void))):
            raise CalibrationError("log-probabilities must be finite")


def calibrated_scores(table: ScoreTable) -> np.ndarray:
    return table.logp_given - table.logp_void


def label_scores(
    table: ScoreTable, labels: LabelSet, aggregation: str = "max", calibrate: bool = True
) -> Dict[str, float]:
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"aggregation must be one of {AGGREGATIONS}, got {aggregation!r}")
    scores = calibrated_scores(table) if calibrate else table.logp_given
    grouped: Dict[str, List[float]] = {label: [] for label in labels.labels}
    for (label, syn), value in zip(table.candidates, scores):
        if label not in grouped or syn not in labels.synonyms[label]:
            raise CalibrationError(f"candidate ({label!r}, {syn!r}) is not in the label set")
        grouped[label].append(float(value))
    reduce = max if aggregation == "max" else _mean
    return {label: reduce(vals) for label, vals in grouped.items() if vals}


def _mean(values: List[float]) -> float:
    # Summed in sorted order so the result does not depend on synonym order.
    return sum(sorted(values)) / len(values)


def predict(
    table: ScoreTable, labels: LabelSet, aggregation: str = "max", calibrate: bool = True
) -> str:
    """Arg-max label; ties go to the label listed first in ``labels``."""
    per_label = label_scores(table, labels, aggregation, calibrate)
    best = None
    for label in labels.labels:
        if label in per_label and (best is None or per_label[label] > per_label[best]):
            best = label
    if best is None:
        raise CalibrationError("no candidates to score")
    return best


def read_calibration_tsv(fh: IO[str]) -> ScoreTable:
    reader = csv.reader(fh, delimiter="\t")
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CALIB_COLUMNS:
        raise CalibrationError(f"row 1: header must be {' '.join(CALIB_COLUMNS)}")
    candidates, given, void = [], [], []
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(CALIB_COLUMNS):
            raise CalibrationError(f"row {row_no}: expected 4 columns, got {len(row)}")
        label, syn = row[0].strip(), row[1].strip()
        if not label or not syn:
            raise CalibrationError(f"row {row_no}: empty label or synonym")
        try:
            g, v = float(row[2]), float(row[3])
        except ValueError:
            raise CalibrationError(f"row {row_no}: log-probabilities must be numbers") from None
        if (label, syn) in candidates:
            raise CalibrationError(f"row {row_no}: duplicate candidate ({label}, {syn})")
        candidates.append((label, syn))
        given.append(g)
        void.append(v)
    if not candidates:
        raise CalibrationError("no data rows")
    try:
        return ScoreTable(tuple(candidates), np.array(given), np.array(void))
    except CalibrationError as exc:
        raise CalibrationError(f"row {row_no}: {exc}") from None
