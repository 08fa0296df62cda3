import csv
import io
import subprocess
import sys

import pytest

from triplan.cli import run
from triplan.planner import read_plans_tsv
from triplan.pipesim import read_trace_csv
from triplan.schedule import read_schedule_csv

from .conftest import CONFIGS


def _kv(text):
    return dict(line.split(" = ", 1) for line in text.splitlines() if " = " in line and not line.startswith("#"))


def test_plan_table_contains_reported_layout():
    code, out = run(["plan", str(CONFIGS / "yuan245b.yaml")])
    assert code == 0
    assert "# model.layers = 76" in out
    header = [line for line in out.splitlines() if line.lstrip().startswith("rank")][0]
    assert header.split() == "rank t p d b B m l f_tp f_pp f_dp f_pb memory score".split()
    rows = [line.split() for line in out.splitlines() if line and not line.startswith("#")][1:]
    assert any(r[1:6] == ["8", "38", "7", "1", "3360"] for r in rows)


def test_plan_tsv_file(tmp_path):
    path = tmp_path / "plans.tsv"
    code, _ = run(["plan", str(CONFIGS / "yuan13b.yaml"), "--tsv", str(path)])
    assert code == 0
    with open(path, newline="") as fh:
        rows = read_plans_tsv(fh)
    assert any((r["t"], r["p"], r["d"], r["b"], r["B"], r["m"]) == (8, 2, 112, 4, 2688, 6) for r in rows)


def test_plan_single_gpu(tmp_path):
    path = tmp_path / "one.yaml"
    path.write_text(
        "model: {layers: 2, hidden: 8, seq_len: 16}\ncluster: {n_gpus: 1, gpus_per_node: 1}\n"
        "search: {global_batch_candidates: [4], micro_batch_candidates: [1]}\n"
    )
    code, out = run(["plan", str(path), "--format", "tsv"])
    assert code == 0
    rows = read_plans_tsv(io.StringIO(out))
    assert [(r["t"], r["p"], r["d"]) for r in rows] == [(1, 1, 1)]


def test_plan_impossible_exits_2(tmp_path):
    path = tmp_path / "none.yaml"
    path.write_text(
        "model: {layers: 3, hidden: 6, seq_len: 16}\ncluster: {n_gpus: 8}\n"
        "search: {global_batch_candidates: [3], micro_batch_candidates: [1]}\n"
    )
    tsv = tmp_path / "out.tsv"
    code, out = run(["plan", str(path), "--tsv", str(tsv)])
    assert code == 2
    assert tsv.read_text().splitlines() == ["rank\tt\tp\td\tb\tB\tm\tl\tf_tp\tf_pp\tf_dp\tf_pb\tmemory\tscore"]


def test_plan_bad_config_exits_1(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("model:\n  layers: 2\n  hidden: 8\n  seq_len: 16\n  colour: red\ncluster: {n_gpus: 1}\n")
    code, _ = run(["plan", str(path)])
    assert code == 1
    assert "line 5: key 'model.colour'" in capsys.readouterr().err
    code, _ = run(["plan", str(tmp_path / "missing.yaml")])
    assert code == 1


@pytest.mark.parametrize("p, m, expected", [(4, 8, "0.375"), (1, 10, "0"), (38, 480, "0.0770833")])
def test_simulate(p, m, expected):
    code, out = run(["simulate", "-p", str(p), "-m", str(m)])
    assert code == 0
    kv = _kv(out)
    assert kv["measured_bubble"] == expected
    assert kv["analytic_bubble"] == expected
    assert kv["abs_diff"] == "0"


def test_simulate_trace(tmp_path):
    path = tmp_path / "trace.csv"
    code, _ = run(["simulate", "-p", "3", "-m", "4", "--schedule", "gpipe", "--comm", "0.5", "--trace", str(path)])
    assert code == 0
    with open(path, newline="") as fh:
        events = read_trace_csv(fh)
    assert {e.kind for e in events} == {"fwd", "bwd", "idle"}


@pytest.mark.parametrize("argv", [["simulate", "-p", "0", "-m", "3"], ["simulate", "-p", "2", "-m", "x"], ["simulate", "-p", "2", "-m", "2", "--fwd", "0"]])
def test_simulate_invalid_exits_1(argv):
    assert run(argv)[0] == 1


@pytest.mark.parametrize(
    "argv, factor, pfd",
    [
        (["budget", "180e9", "245.73e9", "--recompute"], "8", "4095.5"),
        (["budget", "300e9", "175e9"], "6", "3645.83"),
        (["budget", "0", "1e9"], "6", "0"),
    ],
)
def test_budget(argv, factor, pfd):
    code, out = run(argv)
    assert code == 0
    kv = _kv(out)
    assert kv["factor"] == factor
    assert kv["petaflops_days"] == pfd


def test_budget_negative_exits_1():
    assert run(["budget", "--", "-1", "5"])[0] == 1


def test_schedule_csv():
    code, out = run(["schedule", str(CONFIGS / "yuan245b.yaml"), "--samples", "1001"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "token,lr,batch"
    points = read_schedule_csv(io.StringIO(out))
    assert len(points) == 1001
    assert lines[-1].split(",")[1] == "1.6e-05"
    batches = [p.batch for p in points]
    assert batches == sorted(batches)
    code, out = run(["schedule", str(CONFIGS / "yuan245b.yaml"), "--samples", "2"])
    assert len(out.splitlines()) == 3


def test_schedule_requires_section(tmp_path):
    path = tmp_path / "nosched.yaml"
    path.write_text("model: {layers: 2, hidden: 8, seq_len: 16}\ncluster: {n_gpus: 1}\n")
    assert run(["schedule", str(path)])[0] == 1
    assert run(["schedule", str(CONFIGS / "yuan245b.yaml"), "--samples", "1"])[0] == 1


def _write_tsv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["label", "synonym", "logp_given", "logp_void"])
        writer.writerows(rows)


def test_calibrate_flip(tmp_path):
    path = tmp_path / "scores.tsv"
    _write_tsv(path, [["pos", "pos", -1.0, -0.5], ["neg", "neg", -2.0, -3.0]])
    code, out = run(["calibrate", str(path)])
    assert code == 0
    assert out.splitlines() == ["label\tscore", "pos\t-0.5", "neg\t1", "prediction\tneg"]
    code, out = run(["calibrate", str(path), "--raw"])
    assert out.splitlines()[-1] == "prediction\tpos"


def test_calibrate_single_row_and_equal_columns(tmp_path):
    path = tmp_path / "one.tsv"
    _write_tsv(path, [["only", "x", -3.0, -1.0]])
    assert run(["calibrate", str(path)])[1].splitlines()[-1] == "prediction\tonly"
    _write_tsv(path, [["a", "a1", -1.0, -1.0], ["b", "b1", -0.5, -0.5]])
    # All calibrated scores are zero, so the first label wins the tie.
    assert run(["calibrate", str(path)])[1].splitlines()[-1] == "prediction\ta"


def test_calibrate_aggregation_flag(tmp_path):
    path = tmp_path / "agg.tsv"
    _write_tsv(path, [["A", "a1", 0.2, 0], ["A", "a2", 0.9, 0], ["B", "b1", 0.8, 0], ["B", "b2", 0.5, 0]])
    assert run(["calibrate", str(path), "--aggregation", "max"])[1].splitlines()[-1] == "prediction\tA"
    assert run(["calibrate", str(path), "--aggregation", "mean"])[1].splitlines()[-1] == "prediction\tB"


def test_calibrate_malformed(tmp_path, capsys):
    path = tmp_path / "bad.tsv"
    path.write_text("label\tsynonym\tlogp_given\tlogp_void\na\tb\t-1\tnope\n")
    assert run(["calibrate", str(path)])[0] == 1
    assert "row 2" in capsys.readouterr().err


def test_console_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "triplan", "budget", "1e9", "1e9"], capture_output=True, text=True, check=True
    )
    assert "factor = 6" in out.stdout
