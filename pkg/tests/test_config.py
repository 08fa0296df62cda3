import pytest

from triplan.config import ConfigError, RunConfig

from .conftest import CONFIGS

MINIMAL = """\
model:
  layers: 4
  hidden: 64
  seq_len: 128
cluster:
  n_gpus: 8
"""


def test_fixtures_load():
    cfg = RunConfig.from_path(CONFIGS / "yuan245b.yaml")
    assert cfg.model_shape().layers == 76
    assert cfg.cluster_shape().n_gpus == 2128
    spec = cfg.schedule_spec()
    assert spec.total_tokens == 180e9
    assert spec.batch_multiple == 7
    assert spec.peak_lr == 1.6e-4
    RunConfig.from_path(CONFIGS / "yuan13b.yaml")


def test_defaults_filled_and_echoed():
    cfg = RunConfig.from_text(MINIMAL)
    assert cfg.model["vocab"] == 56_000
    assert cfg.search["micro_batch_candidates"] == [1, 2, 4, 8]
    assert cfg.schedule is None
    echo = cfg.echo()
    assert "model.recompute = true" in echo
    assert "search.memory_budget = none" in echo
    assert "search.activation_k1 = 34" in echo


@pytest.mark.parametrize(
    "text, message",
    [
        (MINIMAL + "  bogus: 1\n", "line 7: key 'cluster.bogus': unknown key"),
        (MINIMAL.replace("layers: 4", "layerz: 4"), "line 2: key 'model.layerz': unknown key"),
        (MINIMAL + "extra:\n  a: 1\n", "line 7: key 'extra': unknown section"),
        (MINIMAL.replace("hidden: 64", "hidden: wide"), "line 3: key 'model.hidden': expected an integer"),
        (MINIMAL.replace("  n_gpus: 8\n", "  gpus_per_node: 8\n"), "missing required key 'n_gpus'"),
        ("model: [1, 2\n", "line 2: malformed YAML"),
        (MINIMAL.replace("hidden: 64", "hidden: 63"), "hidden must be even"),
        (MINIMAL + "schedule:\n  peak_lr: 1e-4\n", "missing required key 'total_tokens'"),
    ],
)
def test_errors_name_line_and_key(text, message):
    with pytest.raises(ConfigError, match=message.replace("(", r"\(").replace("[", r"\[")):
        RunConfig.from_text(text)


def test_exponent_strings_are_numbers():
    cfg = RunConfig.from_text(
        MINIMAL + "schedule:\n  peak_lr: 1e-4\n  total_tokens: 3e9\n  global_batch: 64\n"
    )
    assert cfg.schedule["peak_lr"] == 1e-4
    assert cfg.schedule["total_tokens"] == 3e9
