"""
Shared pytest fixtures for causeshift tests.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src directory to Python path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from datagen import GeneratorSpec, generate
from density import Grid, gaussian_density, uniform_density
from settings import DEFAULTS


@pytest.fixture
def fast_config():
    """Analysis settings small enough for unit tests."""
    config = dict(DEFAULTS)
    config.update({
        'alpha': 0.01,
        'n_permutations': 99,
        'n_bootstrap': 20,
        'grid_m': 256,
        'max_iterations': 30,
        'predictor_m_x': 32,
        'predictor_m_y': 64,
    })
    return config


@pytest.fixture
def unit_grid():
    """1024 bins on [-8, 8]."""
    return Grid(-8.0, 8.0, 1024)


@pytest.fixture
def standard_normal(unit_grid):
    return gaussian_density(unit_grid, 0.0, 1.0)


@pytest.fixture
def unit_uniform():
    return uniform_density(Grid(0.0, 1.0, 8), 0.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def square_pairs():
    """200 pairs of E = C^2 + N with C ~ U(-1, 1) and N ~ N(0, 0.3^2)."""
    return generate(GeneratorSpec('square', 'uniform(-1, 1)', 'gaussian(0, 0.3)', 200, seed=7))


@pytest.fixture
def cube_pairs():
    """200 pairs of E = C^3 + C + N; monotone in both directions."""
    return generate(GeneratorSpec('cube_plus', 'gaussian(0, 0.5)', 'gaussian(0, 0.3)', 200,
                                  seed=11))


@pytest.fixture
def tanh_pairs():
    """150 pairs of E = tanh(3C) + N with uniform noise."""
    return generate(GeneratorSpec('tanh3', 'uniform(-1, 1)', 'uniform(-0.2, 0.2)', 150, seed=3))
