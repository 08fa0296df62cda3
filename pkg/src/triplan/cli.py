"""Command-line front end.

    triplan plan CONFIG [--tsv FILE] [--format table|tsv] [--workers N]
    triplan simulate --stages P --microbatches M [--schedule gpipe|one_f_one_b]
                     [--fwd T] [--bwd T] [--comm T] [--trace FILE]
    triplan budget TOKENS PARAMS [--recompute]
    triplan schedule CONFIG [--samples N] [--out FILE]
    triplan calibrate TSV [--aggregation max|mean] [--raw]

Exit status: 0 success, 1 input error, 2 empty result (no feasible plan).
Numbers are printed with 6 significant digits.
"""

from __future__ import annotations

import argparse
import contextlib
import io
import sys
from typing import List, Optional, Sequence

from ._format import fmt
from .analytic import bubble_fraction, train_budget
from .calib import AGGREGATIONS, CalibrationError, LabelSet, label_scores, predict, read_calibration_tsv
from .config import ConfigError, RunConfig
from .pipesim import SCHEDULES, StageTiming, measured_bubble, simulate, write_trace_csv
from .planner import PLAN_COLUMNS, plan_row, rank, write_plans_tsv
from .schedule import emit, write_schedule_csv

EXIT_OK, EXIT_INPUT, EXIT_EMPTY = 0, 1, 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


@contextlib.contextmanager
def _output(path: Optional[str], out):
    if path is None or path == "-":
        yield out
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _table(header: Sequence[str], rows: List[List[str]]) -> List[str]:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return lines


def cmd_plan(args, out) -> int:
    try:
        config = RunConfig.from_path(args.config)
    except OSError as exc:
        raise InputError(f"{args.config}: {exc.strerror}") from None
    except ConfigError as exc:
        raise InputError(f"{args.config}: {exc}") from None
    query = config.plan_query()
    plans = rank(query, workers=args.workers)

    if args.tsv:
        with _output(args.tsv, out) as fh:
            write_plans_tsv(plans, query.shape, fh)
    if args.format == "tsv":
        write_plans_tsv(plans, query.shape, out)
    else:
        for line in config.echo():
            out.write(f"# {line}\n")
        rows = [plan_row(plan, query.shape) for plan in plans]
        for line in _table(PLAN_COLUMNS, rows):
            out.write(line + "\n")
        out.write(f"# {len(plans)} feasible plan(s)\n")
    return EXIT_OK if plans else EXIT_EMPTY


def cmd_simulate(args, out) -> int:
    try:
        timing = StageTiming(args.fwd, args.bwd, args.comm)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    trace = simulate(args.schedule, args.stages, args.microbatches, timing)
    if args.trace:
        with _output(args.trace, out) as fh:
            write_trace_csv(trace, fh)
    measured = measured_bubble(trace)
    analytic = bubble_fraction(args.stages, 1, args.microbatches)
    out.write(f"schedule = {args.schedule}\n")
    out.write(f"stages = {args.stages}\n")
    out.write(f"microbatches = {args.microbatches}\n")
    out.write(f"makespan = {fmt(trace.makespan)}\n")
    out.write(f"measured_bubble = {fmt(measured)}\n")
    out.write(f"analytic_bubble = {fmt(analytic)}\n")
    out.write(f"abs_diff = {fmt(abs(measured - analytic))}\n")
    return EXIT_OK


def cmd_budget(args, out) -> int:
    try:
        budget = train_budget(args.tokens, args.params, args.recompute)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out.write(f"tokens = {fmt(budget.tokens)}\n")
    out.write(f"params = {fmt(budget.params)}\n")
    out.write(f"factor = {budget.factor}\n")
    out.write(f"petaflops_days = {fmt(budget.petaflops_days)}\n")
    return EXIT_OK


def cmd_schedule(args, out) -> int:
    try:
        config = RunConfig.from_path(args.config)
        spec = config.schedule_spec()
    except OSError as exc:
        raise InputError(f"{args.config}: {exc.strerror}") from None
    except ValueError as exc:
        raise InputError(f"{args.config}: {exc}") from None
    if args.samples < 2:
        raise InputError("--samples must be >= 2")
    with _output(args.out, out) as fh:
        write_schedule_csv(emit(spec, args.samples), fh)
    return EXIT_OK


def cmd_calibrate(args, out) -> int:
    try:
        with open(args.tsv, encoding="utf-8", newline="") as fh:
            table = read_calibration_tsv(fh)
    except OSError as exc:
        raise InputError(f"{args.tsv}: {exc.strerror}") from None
    except CalibrationError as exc:
        raise InputError(f"{args.tsv}: {exc}") from None
    labels = LabelSet.from_candidates(table.candidates)
    calibrate = not args.raw
    scores = label_scores(table, labels, args.aggregation, calibrate)
    out.write("label\tscore\n")
    for label in labels.labels:
        out.write(f"{label}\t{fmt(scores[label])}\n")
    out.write(f"prediction\t{predict(table, labels, args.aggregation, calibrate)}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="triplan", description="3D-parallel training planner and tools")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="rank feasible parallel layouts")
    p.add_argument("config")
    p.add_argument("--tsv", help="also write the ranked plans as TSV to this file ('-' for stdout)")
    p.add_argument("--format", choices=("table", "tsv"), default="table")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="simulate a pipeline and compare the bubble fraction")
    p.add_argument("--stages", "-p", type=_positive_int, required=True)
    p.add_argument("--microbatches", "-m", type=_positive_int, required=True)
    p.add_argument("--schedule", choices=SCHEDULES, default="one_f_one_b")
    p.add_argument("--fwd", type=_number, default=1.0)
    p.add_argument("--bwd", type=_number, default=1.0)
    p.add_argument("--comm", type=_number, default=0.0)
    p.add_argument("--trace", help="write the event trace CSV to this file ('-' for stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("budget", help="training compute in PetaFlop/s-days")
    p.add_argument("tokens", type=_number)
    p.add_argument("params", type=_number)
    p.add_argument("--recompute", action="store_true", help="count activation recomputation (factor 8)")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("schedule", help="emit the learning-rate and batch schedule as CSV")
    p.add_argument("config")
    p.add_argument("--samples", type=int, default=1001)
    p.add_argument("--out", help="write to this file instead of stdout")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("calibrate", help="calibrated zero-shot label prediction")
    p.add_argument("tsv")
    p.add_argument("--aggregation", choices=AGGREGATIONS, default="max")
    p.add_argument("--raw", action="store_true", help="skip void-prompt calibration")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except InputError as exc:
        print(f"triplan {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def run(argv: Sequence[str]) -> tuple:
    """Run the CLI in-process and return ``(exit_code, stdout_text)``."""
    buf = io.StringIO()
    try:
        code = main(argv, out=buf)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_INPUT
    return code, buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
