"""Lab configuration loading and validation."""

import logging

import pytest

from app.core import config as config_module
from app.core.config import load_lab_config, parse_lab_config
from app.core.exceptions import (
    CheckFailure,
    ConfigError,
    GeneratorExhausted,
    MonotonicityViolation,
    ParseError,
    PartitionError,
    PrecisionUnreachable,
)
from app.models.dyadic import DyadicRational, parse_dyadic
from app.models.schemas import GeneratorKind, LabConfig


def test_load_config_file(config_file):
    config = load_lab_config(config_file)
    assert config.alpha.kind == GeneratorKind.EXPLICIT_LIST
    assert config.alpha.values[2] == parse_dyadic("7/16")
    assert config.ce.to_instance().times == {1: 2}
    assert config.experiment.eps == DyadicRational(1, 24)
    assert config.experiment.seed == 7


def test_defaults():
    config = LabConfig()
    assert config.alpha.kind == GeneratorKind.GEOMETRIC
    assert config.alpha.start == parse_dyadic("1/4")
    assert config.alpha.ratio == parse_dyadic("1/2")
    assert config.ce.to_instance().members == ((1, 2),)


def test_floats_are_rejected():
    with pytest.raises(ConfigError, match="floats"):
        parse_lab_config({"alpha": {"kind": "geometric", "start": 0.25, "ratio": "1/2"}})


def test_non_dyadic_is_rejected():
    with pytest.raises(ConfigError, match="non-dyadic"):
        parse_lab_config({"experiment": {"eps": "1/3"}})


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError):
        parse_lab_config({"alpha": {"kind": "geometric"}, "extra": {}})
    with pytest.raises(ConfigError):
        parse_lab_config({"ce": {"members": [], "colour": "blue"}})


def test_nonmember_listed_as_member():
    with pytest.raises(ConfigError, match="nonmember"):
        parse_lab_config({"ce": {"members": [{"n": 0, "t": 1}], "nonmember": 0}})


def test_enumeration_time_past_horizon():
    with pytest.raises(ConfigError):
        parse_lab_config({"ce": {"members": [{"n": 1, "t": 9}], "horizon": 4}})


def test_geometric_limit_must_not_exceed_one():
    with pytest.raises(ConfigError):
        parse_lab_config({"alpha": {"kind": "geometric", "start": "3/4", "ratio": "1/2"}})


def test_explicit_list_needs_values():
    with pytest.raises(ConfigError):
        parse_lab_config({"alpha": {"kind": "explicit-list"}})


def test_non_monotone_list_still_loads():
    config = parse_lab_config({"alpha": {"kind": "explicit-list", "values": ["1/2", "1/4"]}})
    assert config.alpha.values == [parse_dyadic("1/2"), parse_dyadic("1/4")]


def test_missing_explicit_path(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_lab_config(tmp_path / "missing.yaml")


def test_missing_default_path_falls_back(tmp_path, monkeypatch):
    monkeypatch.setattr(config_module.settings, "default_config_path", str(tmp_path / "none.yaml"))
    assert load_lab_config() == LabConfig()


def test_invalid_yaml(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("alpha: [unclosed\n")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_lab_config(path)


def test_top_level_must_be_a_mapping():
    with pytest.raises(ConfigError):
        parse_lab_config(["alpha"])


def test_config_errors_exit_with_usage_code():
    assert ConfigError.exit_code == 2


def test_only_check_failures_exit_with_one():
    assert CheckFailure.exit_code == 1
    for error in (ParseError, ConfigError, PartitionError, GeneratorExhausted, MonotonicityViolation, PrecisionUnreachable):
        assert error.exit_code == 2, error.__name__


def test_debug_setting_turns_on_debug_logging(monkeypatch):
    calls = []
    monkeypatch.setattr(config_module.settings, "debug", True)
    monkeypatch.setattr(config_module.logging, "basicConfig", lambda **kwargs: calls.append(kwargs))
    config_module.configure_logging()
    config_module.configure_logging("warning")
    assert [c["level"] for c in calls] == [logging.DEBUG, logging.WARNING]
