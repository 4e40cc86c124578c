"""
Unit tests for the synthetic cause-effect generator.
"""
import numpy as np
import pytest

from datagen import (
    Distribution,
    GeneratorSpec,
    Shift,
    generate,
    generate_shift_pair,
    oracle_conditional,
    oriented,
    true_prior,
)
from density import Grid
from errors import InvalidConfig, UnknownMechanism
from scenarios.base import Direction


class TestDistribution:
    """Test cases for Distribution."""

    @pytest.mark.parametrize('text,kind,params', [
        ('gaussian(0, 0.3)', 'gaussian', (0.0, 0.3)),
        ('Uniform(-1,1)', 'uniform', (-1.0, 1.0)),
        ('laplace(0.5, 2)', 'laplace', (0.5, 2.0)),
        ('mixture2(-1, 0.2, 1, 0.3, 0.4)', 'mixture2', (-1.0, 0.2, 1.0, 0.3, 0.4)),
    ])
    def test_parse(self, text, kind, params):
        """Test parsing the kind(params) notation."""
        law = Distribution.parse(text)

        assert law.kind == kind
        assert law.params == params

    def test_str_parses_back(self):
        """Test the text form is accepted by parse."""
        law = Distribution('gaussian', (0.1, 0.3))

        assert Distribution.parse(str(law)) == law

    @pytest.mark.parametrize('text', [
        'gaussian(0)',
        'gaussian(0, -1)',
        'uniform(1, 1)',
        'mixture2(0, 1, 1, 1, 1.5)',
        'cauchy(0, 1)',
        'gaussian',
        'gaussian(a, 1)',
    ])
    def test_invalid(self, text):
        """Test malformed laws are rejected."""
        with pytest.raises(InvalidConfig):
            Distribution.parse(text)

    def test_moments(self):
        """Test means and standard deviations."""
        assert Distribution.parse('uniform(-1, 1)').std() == pytest.approx(np.sqrt(1.0 / 3.0))
        mixture = Distribution.parse('mixture2(-1, 0.5, 1, 0.5, 0.5)')
        assert mixture.mean() == pytest.approx(0.0)
        assert mixture.std() == pytest.approx(np.sqrt(1.25))

    def test_sample_matches_moments(self, rng):
        """Test draws agree with the stated law."""
        draws = Distribution.parse('laplace(1, 0.5)').sample(rng, 20000)

        assert np.mean(draws) == pytest.approx(1.0, abs=0.02)
        assert np.std(draws) == pytest.approx(0.5 * np.sqrt(2.0), rel=0.03)

    def test_centered_law(self):
        """Test the centered law puts the mean at zero."""
        centered = Distribution.parse('uniform(1, 3)').centered()

        assert centered.cdf(0.0) == pytest.approx(0.5)


class TestGenerate:
    """Test cases for generate."""

    def test_deterministic(self):
        """Test equal specs give equal draws."""
        spec = GeneratorSpec('square', 'uniform(-1, 1)', 'gaussian(0, 0.3)', 50, seed=3)

        assert generate(spec).same_draws(generate(spec))

    def test_seed_changes_draws(self):
        """Test different seeds give different draws."""
        first = generate(GeneratorSpec('square', 'uniform(-1, 1)', 'gaussian(0, 0.3)', 50, 3))
        second = generate(GeneratorSpec('square', 'uniform(-1, 1)', 'gaussian(0, 0.3)', 50, 4))

        assert not first.same_draws(second)

    def test_noise_is_centered(self):
        """Test noise with a nonzero mean is shifted to mean zero."""
        spec = GeneratorSpec('identity', 'uniform(-1, 1)', 'uniform(2, 4)', 5000, seed=1)
        pairs = generate(spec)

        assert np.mean(pairs.y - pairs.x) == pytest.approx(0.0, abs=0.03)

    def test_records_generator(self, square_pairs):
        """Test the metadata carries the generator."""
        record = square_pairs.metadata['generator']

        assert record == {'mechanism': 'square', 'cause': 'uniform(-1.0, 1.0)',
                          'noise': 'gaussian(0.0, 0.3)', 'n': 200, 'seed': 7}

    def test_spec_round_trip(self):
        """Test to_dict and from_dict."""
        spec = GeneratorSpec('tanh3', 'gaussian(0, 0.5)', 'laplace(0, 0.2)', 10, seed=2)

        assert GeneratorSpec.from_dict(spec.to_dict()) == spec

    def test_unknown_mechanism(self):
        """Test mechanisms outside the table."""
        with pytest.raises(UnknownMechanism):
            GeneratorSpec('sine', 'uniform(-1, 1)', 'gaussian(0, 0.3)', 10)

    @pytest.mark.parametrize('n,seed', [(0, 0), (10, -1), (2.5, 0)])
    def test_invalid_sizes(self, n, seed):
        """Test sizes and seeds must be nonnegative integers."""
        with pytest.raises(InvalidConfig):
            GeneratorSpec('square', 'uniform(-1, 1)', 'gaussian(0, 0.3)', n, seed)

    def test_missing_field(self):
        """Test incomplete records."""
        with pytest.raises(InvalidConfig):
            GeneratorSpec.from_dict({'mechanism': 'square', 'n': 10})


class TestShiftPair:
    """Test cases for shifts and shifted pairs."""

    @pytest.fixture
    def base(self):
        return GeneratorSpec('square', 'uniform(-1, 1)', 'gaussian(0, 0.3)', 100, seed=5)

    def test_parse_and_apply(self, base):
        """Test a shift replaces exactly its component."""
        shift = Shift.parse('noise:gaussian(0, 0.6)')
        shifted = shift.apply(base)

        assert shifted.noise == Distribution('gaussian', (0.0, 0.6))
        assert shifted.cause == base.cause
        assert str(shift) == 'noise:gaussian(0.0, 0.6)'

    @pytest.mark.parametrize('text', ['noise', 'weather:sunny', 'mechanism:sine'])
    def test_invalid_shift(self, text):
        """Test malformed shifts."""
        with pytest.raises((InvalidConfig, UnknownMechanism)):
            Shift.parse(text)

    def test_shift_pair_truth(self, base):
        """Test the truth record names the changed component."""
        data = generate_shift_pair(base, Shift.parse('mechanism:cube'), 40)

        assert data.train.n == 100
        assert data.extra.n == 40
        assert data.truth['changed_fields'] == ['mechanism']
        assert data.truth['shifted']['mechanism'] == 'cube'
        assert data.train.same_draws(generate(base))

    def test_no_op_shift(self, base):
        """Test a shift that changes nothing."""
        with pytest.raises(InvalidConfig):
            generate_shift_pair(base, Shift.parse('mechanism:square'), 40)

    def test_unshifted_extra(self, base):
        """Test extra pairs from the same generator are fresh draws."""
        data = generate_shift_pair(base, None, 100)

        assert data.truth['changed_fields'] == []
        assert data.truth['shift'] is None
        assert not data.extra.same_draws(data.train)


class TestOracles:
    """Test cases for the ground-truth helpers."""

    def test_oriented(self, square_pairs):
        """Test anticausal orientation swaps the columns."""
        assert oriented(square_pairs, Direction.CAUSAL) is square_pairs
        np.testing.assert_array_equal(oriented(square_pairs, 'anticausal').x, square_pairs.y)

    def test_true_prior(self):
        """Test the cause law binned on a grid."""
        spec = GeneratorSpec('square', 'uniform(-1, 1)', 'gaussian(0, 0.3)', 10)

        prior = true_prior(spec, Grid(-2.0, 2.0, 40))

        assert prior.mean() == pytest.approx(0.0, abs=1e-9)
        assert prior.values[0] == 0.0

    def test_causal_oracle_rows(self):
        """Test causal oracle rows center on the mechanism."""
        spec = GeneratorSpec('square', 'uniform(-1, 1)', 'gaussian(0, 0.2)', 10)
        oracle = oracle_conditional(spec, Direction.CAUSAL, Grid(-1.0, 1.0, 16),
                                    Grid(-2.0, 3.0, 500))

        np.testing.assert_allclose(oracle.point_estimate, oracle.x_grid.centers ** 2, atol=1e-3)
        assert oracle.provenance['route'] == 'oracle'

    def test_anticausal_oracle_is_posterior(self):
        """Test the linear-Gaussian anticausal oracle against the conjugate posterior."""
        spec = GeneratorSpec('identity', 'gaussian(0, 1)', 'gaussian(0, 1)', 10)
        oracle = oracle_conditional(spec, Direction.ANTICAUSAL, Grid(-2.0, 2.0, 16),
                                    Grid(-6.0, 6.0, 600))

        np.testing.assert_allclose(oracle.point_estimate, oracle.x_grid.centers / 2.0, atol=1e-3)
        np.testing.assert_allclose(oracle.row_std(), np.sqrt(0.5), rtol=1e-3)
