import io
import json

import pytest
import structlog
from pydantic import BaseModel, Field

from hgcnet.core.config import (
    ConfigManager,
    LoggingConfig,
    deep_merge,
    env_overrides,
    get_settings,
    load_config_file,
    nest_flat,
    parse_flat_config,
)
from hgcnet.core.exceptions import ConfigurationError
from hgcnet.core.logging import LogManager


class _Section(BaseModel):
    epochs: int = 300
    lr: float = 0.1


class _Model(BaseModel):
    train: _Section = Field(default_factory=_Section)
    name: str = "default"


def test_parse_flat_config_types_values():
    """Test flat values are typed the way YAML types scalars."""
    values = parse_flat_config(
        "# comment\nnet.groups = 4\ntrain.base_lr=0.1\n"
        "train.augment = false\n\nnet.stages = 4x8,4x16\n"
    )

    assert values == {
        "net.groups": 4,
        "train.base_lr": 0.1,
        "train.augment": False,
        "net.stages": "4x8,4x16",
    }


def test_parse_flat_config_strips_trailing_comments():
    """Test a trailing comment after a value is ignored."""
    assert parse_flat_config("train.epochs = 30  # desk scale") == {"train.epochs": 30}


def test_parse_flat_config_rejects_malformed_line():
    """Test a line without '=' is a configuration error naming the line."""
    with pytest.raises(ConfigurationError, match="run.conf:2"):
        parse_flat_config("a = 1\nnot a pair\n", source="run.conf")


def test_nest_flat_and_conflicts():
    """Test dotted keys nest and a scalar/section clash is rejected."""
    assert nest_flat({"net.groups": 4, "seed": 1}) == {"net": {"groups": 4}, "seed": 1}
    with pytest.raises(ConfigurationError):
        nest_flat({"net": 1, "net.groups": 4})


def test_deep_merge_keeps_base_untouched():
    """Test recursive merge returns a new dict."""
    base = {"train": {"epochs": 300, "lr": 0.1}}
    merged = deep_merge(base, {"train": {"epochs": 30}})

    assert merged == {"train": {"epochs": 30, "lr": 0.1}}
    assert base["train"]["epochs"] == 300


def test_load_config_file_flat_and_yaml(tmp_path):
    """Test both the flat format and YAML files load to the same nested dict."""
    flat = tmp_path / "run.conf"
    flat.write_text("train.epochs = 30\nname = tiny\n")
    nested = tmp_path / "run.yaml"
    nested.write_text("train:\n  epochs: 30\nname: tiny\n")

    assert load_config_file(flat) == load_config_file(nested) == {
        "train": {"epochs": 30},
        "name": "tiny",
    }


def test_load_config_file_missing_and_bad_yaml(tmp_path):
    """Test missing files and non-mapping YAML are configuration errors."""
    with pytest.raises(ConfigurationError, match="not found"):
        load_config_file(tmp_path / "absent.conf")
    bad = tmp_path / "bad.yaml"
    bad.write_text("- just\n- a list\n")
    with pytest.raises(ConfigurationError, match="mapping"):
        load_config_file(bad)


def test_env_overrides_only_sectioned_keys():
    """Test HGC_<SECTION>__<KEY> variables become nested overrides."""
    environ = {"HGC_TRAIN__EPOCHS": "12", "HGC_THREADS": "2", "PATH": "/bin"}

    assert env_overrides(environ) == {"train": {"epochs": 12}}


def test_config_manager_precedence(tmp_path):
    """Test defaults < file < environment < explicit overrides."""
    path = tmp_path / "run.conf"
    path.write_text("train.epochs = 30\ntrain.lr = 0.5\nname = file\n")
    manager = ConfigManager(_Model, path, environ={"HGC_TRAIN__LR": "0.25"})

    cfg = manager.build({"name": "flag"})

    assert cfg.train.epochs == 30
    assert cfg.train.lr == 0.25
    assert cfg.name == "flag"


def test_config_manager_wraps_validation_errors(tmp_path):
    """Test pydantic failures surface as ConfigurationError."""
    path = tmp_path / "run.conf"
    path.write_text("train.epochs = many\n")

    with pytest.raises(ConfigurationError, match="Invalid configuration"):
        ConfigManager(_Model, path, environ={}).build()


def test_logging_config_validation():
    """Test log level is upper-cased and unknown formats are rejected."""
    assert LoggingConfig(level="debug").level == "DEBUG"
    with pytest.raises(ValueError):
        LoggingConfig(level="loud")
    with pytest.raises(ValueError):
        LoggingConfig(format="xml")


def test_runtime_settings_read_environment(monkeypatch):
    """Test HGC_THREADS and HGC_LOG_LEVEL are read from the environment."""
    monkeypatch.setenv("HGC_THREADS", "3")
    monkeypatch.setenv("HGC_LOG_LEVEL", "DEBUG")

    settings = get_settings()

    assert settings.threads == 3
    assert settings.log_level == "DEBUG"


def test_log_manager_json_output():
    """Test JSON logs carry the event name, level and context keys."""
    stream = io.StringIO()
    LogManager(LoggingConfig(level="INFO", format="json"), stream=stream)

    structlog.get_logger("hgcnet.test").info("epoch_completed", epoch=3)
    structlog.get_logger("hgcnet.test").debug("hidden")

    lines = [json.loads(line) for line in stream.getvalue().splitlines()]
    assert len(lines) == 1
    assert lines[0]["event"] == "epoch_completed"
    assert lines[0]["epoch"] == 3
    assert lines[0]["level"] == "info"
    assert "timestamp" in lines[0]


def test_log_manager_writes_file(tmp_path):
    """Test a configured log file receives the output."""
    path = tmp_path / "logs" / "run.log"
    LogManager(LoggingConfig(level="INFO", format="json", file=str(path)))

    structlog.get_logger("hgcnet.test").warning("disk_check", free=1)

    assert "disk_check" in path.read_text()
