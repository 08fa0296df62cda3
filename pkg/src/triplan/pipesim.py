"""Discrete-event simulation of synchronous pipeline-parallel training steps.

Two schedule disciplines are supported:

``gpipe``
    Fill-drain. Every stage runs all forward passes in micro-batch order,
    then all backward passes in micro-batch order.
``one_f_one_b``
    Stage ``s`` runs ``min(p - s - 1, m)`` warm-up forwards, then alternates
    one forward and one backward until forwards are exhausted, then drains
    the remaining backwards. At most ``p - s`` micro-batches are in flight
    on stage ``s``.

Each stage executes its operation list in order; an operation starts as soon
as the stage is free and its cross-stage input has arrived (one ``comm``
delay per hop). With fixed per-stage orders this earliest-start rule gives
the minimal makespan for the discipline.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from typing import IO, Iterable, List, Sequence, Tuple

from ._format import fmt

SCHEDULES = ("gpipe", "one_f_one_b")
TRACE_COLUMNS = ("stage", "kind", "microbatch", "start", "end")
IDLE_MICROBATCH = -1


@dataclass(frozen=True)
class StageTiming:
    fwd: float = 1.0
    bwd: float = 1.0
    comm: float = 0.0

    def __post_init__(self):
        if not (self.fwd > 0 and self.bwd > 0):
            raise ValueError("fwd and bwd times must be positive")
        if not self.comm >= 0:
            raise ValueError("comm time must be non-negative")


@dataclass(frozen=True)
class Event:
    stage: int
    kind: str  # "fwd" | "bwd" | "idle"
    microbatch: int
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class PipelineTrace:
    schedule: str
    p: int
    m: int
    timing: StageTiming
    stages: Tuple[Tuple[Event, ...], ...]
    makespan: float

    def events(self) -> Iterable[Event]:
        for stage_events in self.stages:
            yield from stage_events

    def busy_time(self) -> float:
        return sum(e.duration for e in self.events() if e.kind != "idle")

    def idle_time(self) -> float:
        return sum(e.duration for e in self.events() if e.kind == "idle")


def stage_order(schedule: str, stage: int, p: int, m: int) -> List[Tuple[str, int]]:
    """Operation order ``[(kind, microbatch), ...]`` executed by one stage."""
    if schedule == "gpipe":
        return [("fwd", i) for i in range(m)] + [("bwd", i) for i in range(m)]
    if schedule == "one_f_one_b":
        warmup = min(p - stage - 1, m)
        ops = [("fwd", i) for i in range(warmup)]
        for k in range(m - warmup):
            ops.append(("fwd", warmup + k))
            ops.append(("bwd", k))
        ops.extend(("bwd", i) for i in range(m - warmup, m))
        return ops
    raise ValueError(f"unknown schedule {schedule!r}; expected one of {SCHEDULES}")


def simulate(schedule: str, p: int, m: int, timing: StageTiming = StageTiming()) -> PipelineTrace:
    if p < 1 or m < 1:
        raise ValueError(f"p and m must be >= 1, got p={p}, m={m}")
    orders = [stage_order(schedule, s, p, m) for s in range(p)]

    # Dependency graph over operations, indexed stage-major as
    # (stage * 2 + is_bwd) * m + microbatch; cross-stage edges carry ``comm``.
    n = 2 * p * m

    def idx(s, kind, i):
        return (2 * s + (kind == "bwd")) * m + i

    succs = [[] for _ in range(n)]
    indeg = [0] * n
    for s, ops in enumerate(orders):
        prev = None
        for kind, i in ops:
            node = idx(s, kind, i)
            if prev is not None:
                succs[prev].append((node, 0.0))
                indeg[node] += 1
            prev = node
    for s in range(p):
        for i in range(m):
            if s > 0:
                succs[idx(s - 1, "fwd", i)].append((idx(s, "fwd", i), timing.comm))
                indeg[idx(s, "fwd", i)] += 1
            if s < p - 1:
                succs[idx(s + 1, "bwd", i)].append((idx(s, "bwd", i), timing.comm))
                indeg[idx(s, "bwd", i)] += 1

    ready_at = [0.0] * n
    finish = [None] * n
    queue = deque(node for node in range(n) if indeg[node] == 0)
    done = 0
    while queue:
        node = queue.popleft()
        duration = timing.bwd if (node // m) % 2 else timing.fwd
        node_end = finish[node] = ready_at[node] + duration
        done += 1
        for nxt, delay in succs[node]:
            if node_end + delay > ready_at[nxt]:
                ready_at[nxt] = node_end + delay
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                queue.append(nxt)
    if done != n:
        raise RuntimeError("schedule deadlocked")

    makespan = max(finish)
    stages = []
    for s, ops in enumerate(orders):
        events = []
        clock = 0.0
        for kind, i in ops:
            node = idx(s, kind, i)
            start = ready_at[node]
            if start > clock:
                events.append(Event(s, "idle", IDLE_MICROBATCH, clock, start))
            events.append(Event(s, kind, i, start, finish[node]))
            clock = finish[node]
        if makespan > clock:
            events.append(Event(s, "idle", IDLE_MICROBATCH, clock, makespan))
        stages.append(tuple(events))
    return PipelineTrace(schedule, p, m, timing, tuple(stages), makespan)


def measured_bubble(trace: PipelineTrace) -> float:
    """Idle time over busy time, summed across stages within ``[0, makespan]``.

    For uniform stages this is ``(makespan - m*(fwd+bwd)) / (m*(fwd+bwd))``.
    """
    busy = trace.busy_time()
    if busy <= 0:
        raise ValueError("trace has no busy time")
    idle = trace.p * trace.makespan - busy
    return idle / busy


def peak_in_flight(trace: PipelineTrace) -> int:
    """Largest number of micro-batches forwarded but not yet backwarded on any stage."""
    peak = 0
    for stage_events in trace.stages:
        live = 0
        for e in stage_events:
            if e.kind == "fwd":
                live += 1
                peak = max(peak, live)
            elif e.kind == "bwd":
                live -= 1
    return peak


def write_trace_csv(trace: PipelineTrace, fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for e in trace.events():
        writer.writerow([e.stage, e.kind, e.microbatch, fmt(e.start), fmt(e.end)])


def read_trace_csv(fh: IO[str]) -> List[Event]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
        raise ValueError(f"trace header must be {','.join(TRACE_COLUMNS)}")
    return [
        Event(int(r["stage"]), r["kind"], int(r["microbatch"]), float(r["start"]), float(r["end"]))
        for r in reader
    ]
