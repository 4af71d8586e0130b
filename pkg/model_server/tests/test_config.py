import json

import pytest

from model_server.config import ConfigError, ServerConfig, load_config


def test_valid_config():
    config = ServerConfig(model="m", role="classifier", labels=("neg", "pos"))
    assert config.max_batch == 32
    assert config.labels == ("neg", "pos")


@pytest.mark.parametrize(
    "kwargs",
    [
        {"model": "", "role": "classifier"},
        {"model": "m", "role": "victim"},
        {"model": "m", "role": "classifier", "max_batch": 0},
        {"model": "m", "role": "classifier", "port": 0},
        {"model": "m", "role": "classifier", "port": 70000},
        {"model": "m", "role": "masked-lm", "labels": ("a",)},
        {"model": "m", "role": "classifier", "labels": ()},
        {"model": "m", "role": "classifier", "labels": ("a", "")},
    ],
)
def test_rejected_configs(kwargs):
    with pytest.raises(ConfigError):
        ServerConfig(**kwargs)


def test_load_config_round_trip(tmp_path):
    path = tmp_path / "server.json"
    path.write_text(
        json.dumps(
            {"model": "m", "role": "classifier", "max_batch": 4, "labels": ["neg", "pos"]}
        ),
        encoding="utf-8",
    )
    config = load_config(path)
    assert config == ServerConfig(model="m", role="classifier", max_batch=4, labels=("neg", "pos"))


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "server.json"
    path.write_text('{"model": "m", "role": "classifier", "modle": "typo"}', encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown keys modle"):
        load_config(path)


def test_load_config_rejects_non_object(tmp_path):
    path = tmp_path / "server.json"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError, match="expected a JSON object"):
        load_config(path)
