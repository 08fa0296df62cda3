from pathlib import Path

import pytest

from triplan import ClusterShape, ModelShape, ParallelConfig

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


@pytest.fixture
def yuan245b():
    shape = ModelShape(layers=76, hidden=16384, seq_len=2048, vocab=56_000, recompute=True)
    cluster = ClusterShape(n_gpus=2128, gpus_per_node=8)
    cfg = ParallelConfig(t=8, p=38, d=7, b=1, B=3360)
    return shape, cluster, cfg


@pytest.fixture
def yuan13b():
    shape = ModelShape(layers=40, hidden=5120, seq_len=2048, vocab=56_000, recompute=True)
    cluster = ClusterShape(n_gpus=1792, gpus_per_node=8)
    cfg = ParallelConfig(t=8, p=2, d=112, b=4, B=2688)
    return shape, cluster, cfg


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_ac" in nodeid and report.when == "call":
                rows.append((nodeid.split("::", 1)[1], "PASS" if outcome == "passed" else "FAIL"))
    if rows:
        terminalreporter.section("acceptance criteria")
        for name, status in sorted(rows):
            terminalreporter.write_line(f"{status}  {name}")
