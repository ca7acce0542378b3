"""
Unit tests for config.py
"""

import json
import math
import os
import tempfile
import pytest
from src.config import Config, VALID_OUTPUT_FORMATS, parse_beta
from src.exceptions import ThermalConfigError


class TestConfig:
    """Test cases for Config class."""

    def test_default_config(self):
        """Test default configuration values."""
        config = Config("nonexistent.json")

        assert config.get('field.mass') == 1.0
        assert config.get('field.beta') is None
        assert config.get('quadrature.rel_tol') == 1e-10
        assert config.get('scattering.epsilon') == "1"
        assert config.get('kms.interaction_power') == 4
        assert config.get('kms.profile') == "poly2"
        assert config.get('output.format') == "csv"
        assert config.get('server.log_level') == "INFO"
        assert config.get('run') == {}

    def test_config_file_loading(self):
        """Test loading configuration from JSON file."""
        test_config = {
            "_comments": {"field.mass": "ignored"},
            "field": {"mass": 0.5, "beta": 3.0},
            "kms": {"epsilon": 0.2}
        }

        with tempfile.NamedTemporaryFile(mode='w', suffix='.json', delete=False) as f:
            json.dump(test_config, f)
            config_path = f.name

        try:
            config = Config(config_path)
            assert config.get('field.mass') == 0.5
            assert config.get('field.beta') == 3.0
            assert config.get('kms.epsilon') == 0.2
            # untouched keys keep their defaults
            assert config.get('kms.profile') == "poly2"
            assert config.get('_comments') is None
        finally:
            os.unlink(config_path)

    def test_invalid_json_file(self):
        """Test handling of invalid JSON configuration file."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.json', delete=False) as f:
            f.write("{ invalid json }")
            config_path = f.name

        try:
            with pytest.raises(ThermalConfigError, match="Invalid configuration file"):
                Config(config_path)
        finally:
            os.unlink(config_path)

    def test_environment_variables(self, monkeypatch):
        """Test environment variable override."""
        monkeypatch.setenv("KMS_FIELD_MASS", "2.5")
        monkeypatch.setenv("KMS_FIELD_BETA", "4")
        monkeypatch.setenv("KMS_INTERACTION_POWER", "6")
        monkeypatch.setenv("KMS_REPRODUCIBLE", "true")
        monkeypatch.setenv("KMS_LOG_LEVEL", "DEBUG")

        config = Config("nonexistent.json")

        assert config.get('field.mass') == 2.5
        assert parse_beta(config.get('field.beta')) == 4.0
        assert config.get('kms.interaction_power') == 6
        assert config.get('output.reproducible') is True
        assert config.get('server.log_level') == "DEBUG"

    def test_environment_beta_is_numeric(self, monkeypatch):
        """KMS_FIELD_BETA is stored as a float although its default is null."""
        monkeypatch.setenv("KMS_FIELD_BETA", "2.5")
        config = Config("nonexistent.json")
        assert config.get('field.beta') == 2.5
        assert isinstance(config.get('field.beta'), float)

    def test_environment_beta_vacuum_spelling(self, monkeypatch):
        """A vacuum spelling in KMS_FIELD_BETA becomes an infinite beta."""
        monkeypatch.setenv("KMS_FIELD_BETA", "vacuum")
        config = Config("nonexistent.json")
        assert math.isinf(config.get('field.beta'))
        assert config.validate() is True

    def test_environment_beta_rejects_garbage(self, monkeypatch):
        """An unparseable KMS_FIELD_BETA is a configuration error."""
        monkeypatch.setenv("KMS_FIELD_BETA", "hot")
        with pytest.raises(ThermalConfigError, match="KMS_FIELD_BETA"):
            Config("nonexistent.json")

    def test_environment_overrides_file(self, tmp_path, monkeypatch):
        """Environment variables win over the config file."""
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"field": {"mass": 0.5}}))
        monkeypatch.setenv("KMS_FIELD_MASS", "0.75")

        config = Config(str(path))
        assert config.get('field.mass') == 0.75

    def test_get_nested_value(self):
        """Test getting nested configuration values."""
        config = Config("nonexistent.json")

        assert config.get('quadrature.gauss_order') == 24
        assert config.get('nonexistent.key') is None
        assert config.get('nonexistent.key', 'default') == 'default'

    def test_set_nested_value(self):
        """Test setting nested configuration values."""
        config = Config("nonexistent.json")

        config.set('kms.seed', 7)
        config.set('new.nested.key', 'value')

        assert config.get('kms.seed') == 7
        assert config.get('new.nested.key') == 'value'

    def test_validate_defaults(self):
        """Default configuration validates."""
        assert Config("nonexistent.json").validate() is True

    def test_validate_rejects_odd_interaction(self):
        """Odd interaction powers are rejected."""
        config = Config("nonexistent.json")
        config.set('kms.interaction_power', 3)
        assert config.validate() is False

    def test_validate_rejects_bad_values(self):
        """Every problem is reported in one pass."""
        config = Config("nonexistent.json")
        config.set('field.mass', -1.0)
        config.set('field.beta', 0)
        config.set('scattering.epsilon', "abc")
        config.set('kms.profile', "gaussian")
        config.set('output.format', "xml")
        assert config.validate() is False

    def test_validate_accepts_vacuum_string(self):
        """'inf' selects the vacuum."""
        config = Config("nonexistent.json")
        config.set('field.beta', "inf")
        assert config.validate() is True

    def test_to_dict(self):
        """Test converting configuration to dictionary."""
        config = Config("nonexistent.json")
        config_dict = config.to_dict()

        assert isinstance(config_dict, dict)
        assert 'field' in config_dict
        assert 'kms' in config_dict
        config_dict['field']['mass'] = 99.0
        assert config.get('field.mass') == 1.0

    def test_create_example_config(self, tmp_path):
        """Test creating example configuration file."""
        output = tmp_path / "config.json.example"
        config = Config("nonexistent.json")
        config.create_example_config(str(output))

        data = json.loads(output.read_text())
        assert '_comments' in data
        assert data['kms']['profile'] == "poly2"
        assert set(VALID_OUTPUT_FORMATS) == {"csv", "json"}
        assert "NumericalError" in data['_comments']['quadrature.max_panels']

    def test_shipped_example_names_raised_error(self):
        """The checked-in example config names the error the panel budget raises."""
        path = os.path.join(os.path.dirname(__file__), os.pardir, "example_config.json")
        with open(path) as f:
            data = json.load(f)
        assert "NumericalError" in data['_comments']['quadrature.max_panels']
        assert data['quadrature']['adaptive_limit'] == 2000

    def test_str_representation(self):
        """Test string representation of config."""
        config_str = str(Config("nonexistent.json"))
        assert '"field"' in config_str
        assert '"kms"' in config_str


class TestParseBeta:
    """Tests for the inverse-temperature parser."""

    @pytest.mark.parametrize("value", [None, "inf", "Infinity", "vacuum", ""])
    def test_vacuum_spellings(self, value):
        """All vacuum spellings map to +inf."""
        assert math.isinf(parse_beta(value))

    def test_numbers(self):
        """Numbers and numeric strings pass through."""
        assert parse_beta(2) == 2.0
        assert parse_beta("0.5") == 0.5
