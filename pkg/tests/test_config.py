import argparse

import pytest

from hornmine.config import (
    TrainConfig,
    add_config_flags,
    build_config,
    load_config_json,
    overrides_from_args,
    read_config_file,
    save_config_json,
)
from hornmine.memory import ConfigError


class TestTrainConfig:
    def test_defaults_validate(self):
        TrainConfig().validate()

    @pytest.mark.parametrize(
        "kw",
        [
            dict(epochs=0),
            dict(lr=0.0),
            dict(n_invented=0),
            dict(batch_size=0),
            dict(replay_capacity=3, batch_size=8),
            dict(max_paths=0),
            dict(sims=0),
            dict(v0=0.1, v1=0.5),
            dict(sigma=0.5),
        ],
    )
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ConfigError):
            TrainConfig(**kw).validate()

    def test_score_params_mirror_fields(self):
        cfg = TrainConfig(v0=0.7, vt_neg=-2.0, eps=0.01)
        sp = cfg.score_params()
        assert sp.v0 == 0.7
        assert sp.vt_neg == -2.0
        assert sp.eps == 0.01

    def test_search_params_mode(self):
        cfg = TrainConfig(sims=16, tau=0.5)
        assert cfg.search_params("train").mode == "train"
        assert cfg.search_params("eval").sims == 16


class TestConfigFile:
    def test_parse_with_comments(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("# schedule\nepochs = 3\nlr=0.02  # tuned\n\nsims = 16\n")
        assert read_config_file(p) == {"epochs": "3", "lr": "0.02", "sims": "16"}

    def test_bad_line_reports_position(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("epochs = 3\nnot a setting\n")
        with pytest.raises(ConfigError, match="2"):
            read_config_file(p)

    def test_build_config_layering(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("epochs = 3\nsims = 16\nnet_training = false\n")
        cfg = build_config(p, {"sims": 8})
        assert cfg.epochs == 3
        assert cfg.sims == 8  # override beats the file
        assert cfg.net_training is False

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("episodes = 3\n")
        with pytest.raises(ConfigError):
            build_config(p)
        with pytest.raises(ConfigError):
            build_config(None, {"episodes": 3})

    def test_bool_parsing(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("simple_bonuses = off\nextra_channels = yes\n")
        cfg = build_config(p)
        assert cfg.simple_bonuses is False
        assert cfg.extra_channels is True
        p.write_text("simple_bonuses = maybe\n")
        with pytest.raises(ConfigError):
            build_config(p)


class TestCliFlags:
    def test_every_field_gets_a_flag(self):
        parser = argparse.ArgumentParser()
        add_config_flags(parser)
        args = parser.parse_args(["--epochs", "2", "--n-invented", "7", "--net-training", "false"])
        overrides = overrides_from_args(args)
        assert overrides == {"epochs": 2, "n_invented": 7, "net_training": False}
        cfg = build_config(None, overrides)
        assert cfg.epochs == 2 and cfg.n_invented == 7 and not cfg.net_training

    def test_unset_flags_do_not_override(self):
        parser = argparse.ArgumentParser()
        add_config_flags(parser)
        args = parser.parse_args([])
        assert overrides_from_args(args) == {}


class TestJsonRoundtrip:
    def test_save_load(self, tmp_path):
        cfg = TrainConfig(epochs=4, sims=24, simple_bonuses=False)
        p = tmp_path / "config.json"
        save_config_json(cfg, p)
        assert load_config_json(p) == cfg

    def test_format_version_present(self, tmp_path):
        import json

        p = tmp_path / "config.json"
        save_config_json(TrainConfig(), p)
        assert json.loads(p.read_text())["format_version"] == 1
