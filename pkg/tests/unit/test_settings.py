"""
Unit tests for analysis settings.
"""
from pathlib import Path

import pytest

from errors import InvalidConfig
from settings import DEFAULTS, build_config, load_config, output_dir, validate


class TestLoadConfig:
    """Test cases for load_config."""

    def test_flat_yaml(self, tmp_path):
        """Test reading a flat mapping."""
        path = tmp_path / 'analysis.yaml'
        path.write_text('alpha: 0.01\nn_permutations: 499\n')

        assert load_config(path) == {'alpha': 0.01, 'n_permutations': 499}

    def test_empty_file(self, tmp_path):
        """Test an empty file is an empty mapping."""
        path = tmp_path / 'analysis.yaml'
        path.write_text('')

        assert load_config(path) == {}

    def test_none(self):
        """Test no file at all."""
        assert load_config(None) == {}

    def test_missing_default_file(self, tmp_path, monkeypatch):
        """Test the default location may be absent."""
        monkeypatch.chdir(tmp_path)

        assert load_config(Path('config') / 'analysis.yaml') == {}

    def test_missing_explicit_file(self, tmp_path):
        """Test an explicit path must exist."""
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / 'nowhere.yaml')

    @pytest.mark.parametrize('text', [
        'alpha: [0.01, 0.05]\n',
        'nested:\n  alpha: 0.01\n',
        '- alpha\n',
        'alpha: [unclosed\n',
    ])
    def test_rejected_layouts(self, tmp_path, text):
        """Test nested, list and unparsable files."""
        path = tmp_path / 'analysis.yaml'
        path.write_text(text)

        with pytest.raises(InvalidConfig):
            load_config(path)


class TestBuildConfig:
    """Test cases for build_config and validate."""

    def test_defaults(self):
        """Test no layers gives the defaults."""
        assert build_config() == DEFAULTS

    def test_later_layers_win(self):
        """Test layer precedence and skipped None values."""
        config = build_config({'alpha': 0.1, 'seed': 3}, {'alpha': 0.2, 'seed': None})

        assert config['alpha'] == 0.2
        assert config['seed'] == 3

    def test_does_not_mutate_defaults(self):
        """Test the defaults table is copied."""
        build_config({'alpha': 0.3})

        assert DEFAULTS['alpha'] == 0.05

    @pytest.mark.parametrize('key,value', [
        ('alpha', 0.0),
        ('alpha', 1.0),
        ('alpha', 'small'),
        ('n_permutations', 50),
        ('n_permutations', 99.5),
        ('grid_m', 4),
        ('seed', -1),
        ('bandwidth', -0.1),
        ('ridge', 'large'),
        ('ridge', -1e-3),
        ('bandwidth', 0.0),
        ('validity_tolerance', 1.5),
        ('output_pad', -0.1),
        ('hsic_workers', 0),
        ('kde_pad', True),
    ])
    def test_invalid_values(self, key, value):
        """Test out-of-range and mistyped settings."""
        with pytest.raises(InvalidConfig):
            build_config({key: value})

    def test_auto_and_numbers(self):
        """Test bandwidth and ridge accept 'auto' or a number."""
        config = validate({'bandwidth': 0.4, 'ridge': 'auto'})

        assert config['bandwidth'] == 0.4

    def test_zero_ridge(self):
        """Test an unregularized fit is a valid setting."""
        assert build_config({'ridge': 0})['ridge'] == 0

    def test_grid_padding_and_workers_defaults(self):
        """Test the output padding and HSIC thread count have defaults."""
        config = build_config()

        assert config['output_pad'] == 0.25
        assert config['hsic_workers'] == 1
        assert config['deconvolution_reg'] == 1e-6


class TestOutputDir:
    """Test cases for output_dir."""

    def test_explicit(self):
        """Test an explicit directory wins."""
        assert output_dir('runs') == Path('runs')

    def test_environment(self, monkeypatch):
        """Test the environment variable."""
        monkeypatch.setenv('CAUSESHIFT_OUTPUT_DIR', '/tmp/shift')

        assert output_dir() == Path('/tmp/shift')

    def test_default(self, monkeypatch):
        """Test the fallback directory."""
        monkeypatch.delenv('CAUSESHIFT_OUTPUT_DIR', raising=False)

        assert output_dir() == Path('output')
