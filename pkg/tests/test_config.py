import json
from pathlib import Path

import pytest

from reinforced.config import Config, load_config
from reinforced.exceptions import ConfigError, ExitCodes, IncompatibleConfigError, OracleFailure


def write_config(tmp_path, data) -> Path:
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data))
    return path


class TestLoadConfig:
    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("REINFORCED_OUTPUT_DIR", raising=False)
        config = load_config()
        assert config.output_dir == Path("runs")
        assert config.threads == 1 and config.seed == 0
        assert config.profile is None

    def test_output_dir_from_environment(self, output_dir):
        assert load_config().output_dir == output_dir

    def test_file_values_then_overrides(self, tmp_path):
        path = write_config(tmp_path, {"seed": 5, "threads": 2, "profile": {"alpha": 0.5, "beta": 1}})
        config = load_config(path, {"threads": 4, "seed": None})
        assert config.seed == 5
        assert config.threads == 4
        assert config.profile == {"alpha": 0.5, "beta": 1}

    def test_invalid_value_names_the_field(self):
        with pytest.raises(ConfigError) as info:
            load_config(overrides={"threads": 0})
        assert info.value.field == "threads"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_config(tmp_path / "absent.json")
        assert info.value.field == "config"

    @pytest.mark.parametrize("text", ["{not json", "[1, 2]"])
    def test_malformed_file(self, tmp_path, text):
        path = tmp_path / "bad.json"
        path.write_text(text)
        with pytest.raises(ConfigError):
            load_config(path)

    def test_config_is_a_model(self):
        assert isinstance(load_config(overrides={"verbose": True}), Config)


class TestExitCodes:
    def test_registered(self):
        codes = ExitCodes()
        assert codes.exit_code_for(ConfigError("bad")) == 2
        assert codes.exit_code_for(IncompatibleConfigError("bad", field="mode")) == 2
        assert codes.exit_code_for(OracleFailure("mismatch")) == 3

    def test_subclasses_inherit(self):
        class StricterFailure(OracleFailure):
            pass

        assert ExitCodes().exit_code_for(StricterFailure()) == 3

    def test_unknown_exceptions_exit_one(self):
        info = ExitCodes().get_ex_info(RuntimeError("boom"))
        assert info.exit_code == 1 and info.name == "RuntimeError"

    def test_field_prefixes_message(self):
        assert str(ConfigError("required", field="beta")) == "beta: required"
