"""Tests for YAML config loading and its line-numbered diagnostics."""

from pathlib import Path

import pytest

from ggrpo_lab.core.config import dump_config, load_config, parse_config, resolve_output_dir
from ggrpo_lab.core.errors import ConfigError
from ggrpo_lab.core.models import AdvantageEstimator

VALID = """\
trainer:
  steps: 3
  batch_groups: 2
  estimator: drgrpo
tasks:
  - task_id: math
    target: [1]
  - task_id: chart
    kind: vision
    topology: continuous-iou
    target: [1, 2]
"""


def diagnostic(text):
    with pytest.raises(ConfigError) as exc_info:
        parse_config(text, "exp.yaml")
    return exc_info.value


def test_parse_valid_config():
    config = parse_config(VALID)
    assert config.trainer.steps == 3
    assert config.trainer.estimator is AdvantageEstimator.DR_GRPO
    assert [t.task_id for t in config.tasks] == ["math", "chart"]
    assert config.tasks[1].envelope.l_high < config.tasks[0].envelope.l_low


def test_unknown_key_reports_its_line():
    err = diagnostic("trainer:\n  steps: 3\n  bogus: 1\ntasks:\n  - task_id: a\n    target: [0]\n")
    assert err.line == 3
    assert err.key == "trainer.bogus"
    assert err.diagnostic() == "exp.yaml:3: trainer.bogus: unknown key 'bogus'"


def test_missing_tasks():
    err = diagnostic("trainer:\n  steps: 3\n")
    assert err.key == "tasks"
    assert "missing required key 'tasks'" in err.diagnostic()
    assert err.line == 1


def test_empty_file_is_missing_tasks():
    assert diagnostic("").key == "tasks"


def test_wrong_type_points_at_value():
    err = diagnostic("trainer:\n  steps: many\ntasks:\n  - task_id: a\n    target: [0]\n")
    assert err.line == 2
    assert err.key == "trainer.steps"


def test_nested_task_error():
    text = "tasks:\n  - task_id: a\n    target: [0]\n  - task_id: b\n    topology: spiky\n    target: [0]\n"
    err = diagnostic(text)
    assert err.key == "tasks.1.topology"
    assert err.line == 5


def test_duplicate_task_ids():
    err = diagnostic("tasks:\n  - task_id: a\n    target: [0]\n  - task_id: a\n    target: [1]\n")
    assert "unique" in err.message
    assert err.key == "tasks.1.task_id"
    assert err.line == 4


def test_target_outside_vocabulary():
    err = diagnostic("trainer:\n  vocab_size: 2\ntasks:\n  - task_id: a\n    target: [5]\n")
    assert "outside the content vocabulary" in err.message
    assert err.key == "tasks.0.target"
    assert err.line == 5


def test_indivisible_batch_groups_points_at_the_key():
    err = diagnostic(VALID.replace("batch_groups: 2", "batch_groups: 3"))
    assert err.line == 3
    assert err.key == "trainer.batch_groups"
    assert err.diagnostic().startswith(
        "exp.yaml:3: trainer.batch_groups: batch_groups (3) must be a multiple"
    )


def test_yaml_syntax_error_has_line():
    err = diagnostic("trainer:\n  steps: 3: 4\n")
    assert err.line == 2
    assert err.message.startswith("invalid YAML")


def test_top_level_must_be_mapping():
    assert diagnostic("- 1\n- 2\n").message == "top level must be a mapping"


def test_dump_round_trips():
    config = parse_config(VALID)
    assert parse_config(dump_config(config)) == config


def test_load_config_reads_file(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text(VALID, encoding="utf-8")
    assert load_config(path).trainer.steps == 3


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError) as exc_info:
        load_config(tmp_path / "absent.yaml")
    assert exc_info.value.path.endswith("absent.yaml")


class TestOutputDir:
    def test_default(self, monkeypatch):
        monkeypatch.delenv("GGRPO_OUTPUT_DIR", raising=False)
        assert resolve_output_dir(parse_config(VALID)) == Path("runs")

    def test_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("GGRPO_OUTPUT_DIR", str(tmp_path))
        assert resolve_output_dir(parse_config(VALID)) == tmp_path

    def test_config_wins(self, monkeypatch, tmp_path):
        monkeypatch.setenv("GGRPO_OUTPUT_DIR", str(tmp_path))
        config = parse_config("output_dir: out\n" + VALID)
        assert resolve_output_dir(config) == Path("out")


@pytest.mark.parametrize(
    "path", sorted((Path(__file__).parents[1] / "experiments").glob("*.yaml")), ids=lambda p: p.name
)
def test_shipped_experiments_load(path):
    config = load_config(path)
    assert config.trainer.batch_groups % len(config.tasks) == 0
