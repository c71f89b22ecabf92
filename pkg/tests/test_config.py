"""Tests for configuration loading."""

from pathlib import Path

import pytest

from bo_survey import config
from bo_survey.exceptions import ConfigurationError
from bo_survey.models import SamplingScheme


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """Remove package environment variables."""
    monkeypatch.delenv(config.THREADS_ENV, raising=False)
    monkeypatch.delenv(config.OUTPUT_DIR_ENV, raising=False)


@pytest.fixture
def config_file(tmp_path):
    """A config file describing a small synthetic experiment."""
    path = tmp_path / "experiment.cfg"
    path.write_text(
        "# small experiment\n"
        "synthetic_population_size=300\n"
        "synthetic_feature_dim=4\n"
        "synthetic_seed=9\n"
        "prior_size=30\n"
        "sample_size=20\n"
        "repeats=5\n"
        "designs=srs,bo-pu\n"
        "scheme=poisson\n"
        "length_scale=0.8\n"
        "threads=5\n"
    )
    return path


def test_load_config_file(config_file):
    """Test that file keys reach the configuration."""
    cfg = config.load_config(config_file)
    assert cfg.synthetic.population_size == 300
    assert cfg.synthetic.feature_dim == 4
    assert cfg.synthetic.seed == 9
    assert (cfg.prior_size, cfg.sample_size, cfg.repeats) == (30, 20, 5)
    assert cfg.designs == ["SRS", "BO-PU"]
    assert cfg.scheme == SamplingScheme.POISSON
    assert cfg.kernel.length_scale == 0.8
    assert cfg.kernel.noise_variance is None


def test_defaults_without_sources():
    """Test the model defaults."""
    cfg = config.load_config()
    assert cfg.synthetic.population_size == 1920
    assert cfg.designs == ["SRS", "BO-PU", "BO-ILCB", "BO-EI", "BO-SEI"]
    assert cfg.threads is None


def test_unknown_key_rejected(tmp_path):
    """Test that unknown keys are reported."""
    path = tmp_path / "bad.cfg"
    path.write_text("prior_size=10\nsample_sise=5\n")
    with pytest.raises(ConfigurationError, match="sample_sise"):
        config.load_config(path)


def test_missing_config_file(tmp_path):
    """Test a missing config file."""
    with pytest.raises(FileNotFoundError):
        config.load_config(tmp_path / "missing.cfg")


def test_sources_are_exclusive(tmp_path):
    """Test that a CSV population and synthetic keys cannot be combined."""
    path = tmp_path / "both.cfg"
    path.write_text("population_csv=pop.csv\nsynthetic_seed=1\n")
    with pytest.raises(ConfigurationError):
        config.load_config(path)


def test_override_source_replaces_file_source(config_file):
    """Test that a command-line CSV population drops the synthetic keys from the file."""
    cfg = config.load_config(config_file, {"population_csv": "pop.csv"})
    assert cfg.population_csv == Path("pop.csv")
    assert cfg.synthetic is None


def test_precedence(config_file, monkeypatch):
    """Test overrides > file > environment."""
    monkeypatch.setenv(config.THREADS_ENV, "3")
    assert config.load_config().threads == 3
    assert config.load_config(config_file).threads == 5
    assert config.load_config(config_file, {"threads": 7, "repeats": None}).threads == 7
    assert config.load_config(config_file, {"threads": 7, "repeats": None}).repeats == 5


def test_invalid_values_reported():
    """Test that validation failures become configuration errors."""
    with pytest.raises(ConfigurationError, match="prior_size"):
        config.build_config({"prior_size": "0"})
    with pytest.raises(ConfigurationError):
        config.build_config({"designs": "bo-pu,bo-ei"})
    with pytest.raises(ConfigurationError):
        config.build_config({"scheme": "srs"})
    with pytest.raises(ConfigurationError):
        config.build_config({"synthetic_population_size": "100", "prior_size": "60", "sample_size": "40"})


def test_config_hash(config_file):
    """Test that the hash tracks settings but not the thread count."""
    cfg = config.load_config(config_file)
    assert config.config_hash(cfg) == config.config_hash(config.load_config(config_file))
    assert config.config_hash(cfg) == config.config_hash(config.load_config(config_file, {"threads": 1}))
    assert config.config_hash(cfg) != config.config_hash(config.load_config(config_file, {"master_seed": 1}))
    assert len(config.config_hash(cfg)) == 64


def test_output_dir_default(monkeypatch, tmp_path):
    """Test the output directory environment default."""
    assert config.output_dir_default() == Path("results")
    monkeypatch.setenv(config.OUTPUT_DIR_ENV, str(tmp_path))
    assert config.output_dir_default() == tmp_path
