"""Tests for config defaults, file parsing and precedence."""

import math

import pytest

from affplan.config import Config, ConfigError, ENV_VAR, load_config


def test_defaults():
    cfg = load_config(None)
    assert cfg == Config()
    assert cfg.iou_min == 0.5
    assert cfg.pixel_threshold == 25
    assert cfg.planner == "fast"
    assert cfg.beta == 1.0
    assert cfg.sigma == 5.0
    assert cfg.alpha == pytest.approx(math.log(0.5) / 5.0, abs=0)
    assert cfg.seed == 0


def test_file_parsing(tmp_path):
    path = tmp_path / "affplan.conf"
    path.write_text(
        "# comment line\n"
        "; another comment\n"
        "\n"
        "planner = optimal\n"
        "iou_min=0.75\n"
        "pixel_threshold = 10\n"
        "seed = 42\n"
    )
    cfg = load_config(path)
    assert cfg.planner == "optimal"
    assert cfg.iou_min == 0.75
    assert cfg.pixel_threshold == 10
    assert cfg.seed == 42
    # untouched keys keep their defaults
    assert cfg.beta == 1.0


def test_file_errors(tmp_path):
    path = tmp_path / "bad.conf"

    path.write_text("planner optimal\n")
    with pytest.raises(ConfigError):
        load_config(path)

    path.write_text("warp_factor = 9\n")
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert "warp_factor" in str(exc.value)

    path.write_text("pixel_threshold = many\n")
    with pytest.raises(ConfigError):
        load_config(path)

    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.conf")


def test_value_validation(tmp_path):
    path = tmp_path / "bad.conf"
    for line in (
        "iou_min = 0.0",
        "iou_min = 1.5",
        "pixel_threshold = 0",
        "planner = quantum",
        "beta = 0",
        "sigma = -1",
        "alpha = 0.1",
    ):
        path.write_text(line + "\n")
        with pytest.raises(ConfigError):
            load_config(path)


def test_env_var_and_explicit_path(tmp_path, monkeypatch):
    env_file = tmp_path / "env.conf"
    env_file.write_text("seed = 7\n")
    monkeypatch.setenv(ENV_VAR, str(env_file))
    assert load_config(None).seed == 7

    # an explicit path wins over the environment
    other = tmp_path / "other.conf"
    other.write_text("seed = 9\n")
    assert load_config(other).seed == 9

    # empty env value falls back to defaults
    monkeypatch.setenv(ENV_VAR, "")
    assert load_config(None) == Config()

    monkeypatch.delenv(ENV_VAR)
    assert load_config(None) == Config()
