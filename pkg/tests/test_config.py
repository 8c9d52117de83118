import dataclasses
from pathlib import Path

import pytest

from scdisasm.config import (RunConfig, config_dict, load_config, override)
from scdisasm.errors import ConfigError

REPO = Path(__file__).resolve().parents[1]


def _write(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return path


class TestDefaults:
    def test_shipped_default_file_matches_builtin(self):
        # configs/default.cfg spells out every knob; drifting from the
        # dataclass defaults would make the reference file a lie
        assert load_config(REPO / "configs" / "default.cfg") == RunConfig()

    def test_shipped_quick_file_loads(self):
        cfg = load_config(REPO / "configs" / "quick.cfg")
        assert cfg.window < RunConfig().window
        assert cfg.benchmarks == ("timeloop", "matrix")

    def test_defaults_are_valid(self):
        RunConfig().validate()


class TestLoader:
    def test_partial_file_keeps_defaults(self, tmp_path):
        cfg = load_config(_write(tmp_path,
                                 "[pipeline]\nw_star = 25\n"))
        assert cfg.w_star == 25
        assert cfg.window == RunConfig().window

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown section"):
            load_config(_write(tmp_path, "[extras]\nfoo = 1\n"))

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(_write(tmp_path, "[pipeline]\nwstar = 25\n"))

    def test_unparseable_value(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot parse"):
            load_config(_write(tmp_path, "[simulator]\nwindow = tiny\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.cfg")

    def test_malformed_ini(self, tmp_path):
        with pytest.raises(ConfigError, match="malformed"):
            load_config(_write(tmp_path, "w_star = 25\n"))

    @pytest.mark.parametrize("raw,want", [("auto", None), ("none", None),
                                          ("0.01", 0.01)])
    def test_theta_spellings(self, tmp_path, raw, want):
        cfg = load_config(_write(tmp_path, f"[pipeline]\ntheta = {raw}\n"))
        assert cfg.theta == want

    def test_list_values(self, tmp_path):
        cfg = load_config(_write(
            tmp_path,
            "[pipeline]\nfeature_counts = 5, 10 25\n"
            "[run]\nbenchmarks = timeloop, ascii\nsweep_points = 4 8\n"))
        assert cfg.feature_counts == (5, 10, 25)
        assert cfg.benchmarks == ("timeloop", "ascii")
        assert cfg.sweep_points == (4, 8)


class TestValidation:
    @pytest.mark.parametrize("changes", [
        {"window": 0},
        {"noise_sigma": -0.1},
        {"rt_noise_scale": 0.5},
        {"w_star": 400},
        {"realtime_w_star": 400},
        {"selector": "chi2"},
        {"classifier": "svm"},
        {"mode": "streaming"},
        {"layout": "spiral"},
        {"q": 7},
        {"q": 15},
        {"theta": 0.0},
        {"theta": 1.5},
        {"feature_counts": ()},
        {"feature_counts": (0,)},
        {"benchmarks": ()},
        {"sweep_points": (0,)},
        {"clock_hz": 0.0},
    ])
    def test_rejects(self, changes):
        with pytest.raises(ConfigError):
            RunConfig(**changes)

    def test_theta_auto_allowed(self):
        assert RunConfig(theta=None).theta is None


class TestHelpers:
    def test_override_revalidates(self):
        cfg = override(RunConfig(), w_star=30)
        assert cfg.w_star == 30
        with pytest.raises(ConfigError):
            override(RunConfig(), w_star=0)

    def test_override_drops_none(self):
        cfg = override(RunConfig(), w_star=None, seed=9)
        assert cfg.w_star == RunConfig().w_star
        assert cfg.seed == 9

    def test_config_dict_round_trips(self):
        cfg = RunConfig()
        d = config_dict(cfg)
        assert set(d) == {f.name for f in dataclasses.fields(cfg)}
        assert d["feature_counts"] == list(cfg.feature_counts)
        assert RunConfig(**{k: tuple(v) if isinstance(v, list) else v
                            for k, v in d.items()}) == cfg
