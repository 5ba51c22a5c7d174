"""Tests for the configuration layer."""

import json

import pytest

from conftest import ROOT
from utils.config import DB_ENV_VAR, Config


def test_defaults():
    config = Config(use_env=False)
    assert config.get('pipeline.batch_size') == 1024
    assert config.get('service.listen') == '127.0.0.1:7070'
    assert config.get('bench.sizes') == [2, 16, 256, 4096, 65536]
    assert config.get('missing.key', 'fallback') == 'fallback'
    assert config['query']['depth'] == 3


def test_defaults_are_not_shared():
    first = Config(use_env=False)
    first.set('pipeline.batch_size', 7)
    assert Config(use_env=False).get('pipeline.batch_size') == 1024


def test_yaml_file_overrides(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("pipeline:\n  batch_size: 64\nservice:\n  listen: 0.0.0.0:9000\n")
    config = Config(str(path), use_env=False)
    assert config.get('pipeline.batch_size') == 64
    assert config.get('pipeline.queue_depth') == 8
    assert config.get('service.listen') == '0.0.0.0:9000'


def test_json_round_trip(tmp_path):
    config = Config(use_env=False)
    config.set('store.path', '/var/lib/provd4m')
    path = tmp_path / "config.json"
    config.save_to_file(str(path))
    assert json.loads(path.read_text())['store']['path'] == '/var/lib/provd4m'
    assert Config(str(path), use_env=False).get('store.path') == '/var/lib/provd4m'


def test_unsupported_format(tmp_path):
    with pytest.raises(ValueError):
        Config(str(tmp_path / "config.ini"), use_env=False)


def test_store_path_from_environment(monkeypatch):
    monkeypatch.setenv(DB_ENV_VAR, "/data/prov")
    assert Config().get('store.path') == "/data/prov"


def test_file_wins_over_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(DB_ENV_VAR, "/data/prov")
    path = tmp_path / "config.yaml"
    path.write_text("store:\n  path: /srv/db\n")
    assert Config(str(path)).get('store.path') == "/srv/db"


def test_shipped_default_config_matches_defaults():
    config = Config(str(ROOT / "config" / "default_config.yaml"), use_env=False)
    assert config.config == Config.DEFAULT_CONFIG
