"""Config parsing: presets, TOML files, override semantics, rejection of
unknown keys."""
import pytest

from leocdn.config import parse_config, resolve_locations_path
from leocdn.errors import ConfigError
from leocdn.strategies import StrategyKind


class TestPresets:
    def test_us_preset_matches_scenario_table(self):
        cfg = parse_config(preset="us")
        assert cfg.scenario.rate == 1_000_000
        assert cfg.scenario.num_items == 1_000_000
        assert cfg.scenario.origin_city == "Ashbourne, VA"
        assert cfg.scenario.duration_s == 86_400.0
        assert cfg.scenario.step_s == 1.0
        assert cfg.scenario.size_min_bytes == 1_000
        assert cfg.scenario.size_max_bytes == 100_000
        assert cfg.constellation.num_planes == 24
        assert cfg.constellation.sats_per_plane == 66

    def test_switzerland_preset(self):
        cfg = parse_config(preset="switzerland")
        assert cfg.scenario.rate == 25_000
        assert cfg.scenario.num_items == 25_000
        assert cfg.scenario.origin_city == "Zurich"
        assert resolve_locations_path(cfg.scenario.locations).exists()

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            parse_config(preset="mars")


class TestOverrides:
    def test_override_on_preset_keeps_rest(self):
        cfg = parse_config(preset="us", overrides=("scenario.rate=100",))
        assert cfg.scenario.rate == 100
        assert cfg.scenario.num_items == 1_000_000
        assert cfg.scenario.origin_city == "Ashbourne, VA"

    def test_strategy_and_run_keys(self):
        cfg = parse_config(
            preset="switzerland",
            overrides=("strategy=sat-rep", "metrics_stride=5", "warmup_s=100"),
        )
        assert cfg.strategy is StrategyKind.SAT_REP
        assert cfg.metrics_stride == 5
        assert cfg.warmup_s == 100.0

    def test_unknown_key_rejected_with_path(self):
        with pytest.raises(ConfigError) as err:
            parse_config(overrides=("scenario.bogus=1",))
        assert "scenario.bogus" in str(err.value)

    def test_type_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(overrides=("scenario.rate=fast",))

    def test_malformed_override(self):
        with pytest.raises(ConfigError):
            parse_config(overrides=("scenario.rate",))


class TestConfigFile:
    def test_file_parsed_and_validated(self, tmp_path):
        f = tmp_path / "run.toml"
        f.write_text(
            """
strategy = "gst"

[scenario]
rate = 5
num_items = 10
duration_s = 3.0
origin_city = "Zurich"

[constellation]
num_planes = 4
sats_per_plane = 4
"""
        )
        cfg = parse_config(path=f)
        assert cfg.scenario.rate == 5
        assert cfg.constellation.num_planes == 4
        assert cfg.strategy is StrategyKind.GST

    def test_unknown_section_key_rejected(self, tmp_path):
        f = tmp_path / "run.toml"
        f.write_text("[scenario]\nspeed = 2\n")
        with pytest.raises(ConfigError) as err:
            parse_config(path=f)
        assert "scenario.speed" in str(err.value)

    def test_unknown_top_level_rejected(self, tmp_path):
        f = tmp_path / "run.toml"
        f.write_text("[网络]\nx = 1\n".replace("网络", "network"))
        with pytest.raises(ConfigError):
            parse_config(path=f)

    def test_invalid_toml_rejected(self, tmp_path):
        f = tmp_path / "run.toml"
        f.write_text("not toml ][")
        with pytest.raises(ConfigError):
            parse_config(path=f)

    def test_file_overrides_preset_and_set_overrides_file(self, tmp_path):
        f = tmp_path / "run.toml"
        f.write_text("[scenario]\nrate = 7\n")
        cfg = parse_config(path=f, preset="us", overrides=("scenario.rate=9",))
        assert cfg.scenario.rate == 9
        assert cfg.scenario.num_items == 1_000_000

    def test_validation_errors_surface_as_config_errors(self):
        with pytest.raises(ConfigError):
            parse_config(overrides=("scenario.rate=0",))
        with pytest.raises(ConfigError):
            parse_config(overrides=("constellation.altitude_m=-5",))
        with pytest.raises(ConfigError):
            parse_config(overrides=("strategy=quantum",))


def test_builtin_dataset_resolution():
    assert resolve_locations_path("builtin:switzerland").name == "switzerland.csv"
    assert resolve_locations_path("builtin:us").exists()
    with pytest.raises(ConfigError):
        resolve_locations_path("builtin:atlantis")
