from __future__ import annotations

from pathlib import Path

import pytest
import yaml

from glyphvote.config import (
    Protocol,
    RunConfig,
    Settings,
    SettingsFile,
    default_yaml,
    settings_to_dict,
    validate_and_construct,
)
from glyphvote.constants import FeatureFamily
from glyphvote.ensemble import FusionMode
from glyphvote.exceptions import ConfigurationError, GlyphError, MultiConfigurationError
from glyphvote.utils import merge_dicts


class TestLayers:
    def test_defaults_without_file(self, settings_file):
        assert not settings_file.exists()
        settings = SettingsFile().load()
        assert settings == Settings()
        assert settings.fusion_mode is FusionMode.VOTE
        assert settings.eval_mode is FusionMode.CONFSUM
        assert settings.protocol is Protocol.THREE_FOLD
        assert settings.hidden_sizes == {
            FeatureFamily.INTERSECTION: 20,
            FeatureFamily.SHADOW: 30,
            FeatureFamily.LINE_FIT: 40,
            FeatureFamily.CHAIN_CODE: 70,
        }

    def test_file(self, settings_file):
        settings_file.write_text("epochs: 50\nprotocol: holdout\ndata_root: corpus\n")
        settings = SettingsFile().load()
        assert settings.epochs == 50
        assert settings.protocol is Protocol.HOLDOUT
        assert settings.data_root == Path("corpus")

    def test_overrides_beat_file(self, settings_file):
        settings_file.write_text("epochs: 50\nseed: 3\n")
        settings = SettingsFile().load({"epochs": 7, "seed": None})
        assert settings.epochs == 7
        assert settings.seed == 3

    def test_empty_file(self, settings_file):
        settings_file.write_text("")
        assert SettingsFile().load() == Settings()

    def test_explicit_path(self, tmp_path):
        other = tmp_path / "other.yaml"
        other.write_text("top_k: 3\n")
        assert SettingsFile(other).load().top_k == 3

    def test_env_names_file(self, settings_file):
        assert SettingsFile.get_file() == settings_file.resolve()
        assert SettingsFile().path == settings_file.resolve()

    @pytest.mark.parametrize("value, expected", [("1", True), ("0", False)])
    def test_debug_dump_env(self, monkeypatch, value, expected):
        monkeypatch.setenv("GLYPH_DEBUG_DUMP", value)
        assert SettingsFile().load().debug_dump is expected

    def test_run_config(self):
        run = RunConfig("train")
        assert run.command == "train"
        assert run.settings == Settings()


class TestErrors:
    def test_unknown_key(self, settings_file):
        settings_file.write_text("epochz: 5\n")
        with pytest.raises(ConfigurationError) as excinfo:
            SettingsFile().load()
        assert str(excinfo.value) == "Unknown setting 'epochz'"

    def test_bad_value(self, settings_file):
        settings_file.write_text("epochs: 0\n")
        with pytest.raises(ConfigurationError) as excinfo:
            SettingsFile().load()
        assert excinfo.value.where == "epochs"

    def test_several_errors(self, settings_file):
        settings_file.write_text("momentum: 1.5\nfusion_mode: borda\n")
        with pytest.raises(MultiConfigurationError) as excinfo:
            SettingsFile().load()
        assert sorted(e.where for e in excinfo.value.errors) == [
            "fusion_mode",
            "momentum",
        ]

    def test_errors_join_the_pipeline_hierarchy(self, settings_file):
        settings_file.write_text("epochs: 0\nmomentum: 1.5\n")
        with pytest.raises(GlyphError) as excinfo:
            SettingsFile().load()
        assert isinstance(excinfo.value, MultiConfigurationError)
        assert str(excinfo.value).splitlines() == [str(e) for e in excinfo.value.errors]
        assert all(e.name == "ConfigurationError" for e in excinfo.value.errors)
        assert all(f"in setting '{e.where}'" in str(e) for e in excinfo.value.errors)

    def test_not_a_mapping(self, settings_file):
        settings_file.write_text("- epochs\n- seed\n")
        with pytest.raises(ConfigurationError):
            SettingsFile().load()

    def test_invalid_yaml(self, settings_file):
        settings_file.write_text("epochs: [1,\n")
        with pytest.raises(yaml.YAMLError):
            SettingsFile().load()

    def test_construct_coerces(self):
        settings = validate_and_construct(
            {"models_dir": "m", "eval_mode": "vote"}, Settings
        )
        assert settings.models_dir == Path("m")
        assert settings.eval_mode is FusionMode.VOTE


class TestDefaultFile:
    def test_yaml_matches_defaults(self):
        assert yaml.safe_load(default_yaml()) == settings_to_dict(Settings())

    def test_comments(self):
        lines = default_yaml().splitlines()
        epochs = lines.index("epochs: 300")
        assert lines[epochs - 1] == "# Maximum training epochs per network."
        assert not lines[lines.index("learning_rate: 0.8") - 1].startswith("#")

    def test_write_default(self, settings_file):
        file = SettingsFile()
        file.write_default()
        assert settings_file.read_text() == default_yaml()
        assert file.load() == Settings()

        with pytest.raises(FileExistsError):
            file.write_default()
        settings_file.write_text("epochs: 9\n")
        file.write_default(force=True)
        assert file.load().epochs == 300

    def test_plain_values(self):
        data = settings_to_dict(Settings(protocol=Protocol.HOLDOUT))
        assert data["protocol"] == "holdout"
        assert data["fusion_mode"] == "vote"
        assert data["debug_dir"] == "glyph_debug"


class TestMergeDicts:
    def test_raise_on_conflict(self):
        with pytest.raises(ValueError):
            merge_dicts({"a": 1}, {"a": 2})

    def test_equal_values_do_not_conflict(self):
        assert merge_dicts({"a": 1}, {"a": 1, "b": 2}) == {"a": 1, "b": 2}

    @pytest.mark.parametrize("priority, expected", [("a", 1), ("b", 2)])
    def test_priority(self, priority, expected):
        assert merge_dicts({"a": 1}, {"a": 2}, priority=priority) == {"a": expected}

    def test_nested(self):
        merged = merge_dicts({"x": {"a": 1, "b": 1}}, {"x": {"b": 2}}, priority="b")
        assert merged == {"x": {"a": 1, "b": 2}}

    def test_skip_none(self):
        merged = merge_dicts({"a": 1}, {"a": None, "c": None}, "b", skip_none=True)
        assert merged == {"a": 1}
