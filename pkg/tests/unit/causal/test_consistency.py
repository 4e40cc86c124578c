"""
Unit tests for the marginal consistency check.
"""
import numpy as np
import pytest

from causal.base import AdditiveConditional, StochasticMatrix
from causal.consistency import ConsistencyResult, implied_marginal, marginal_consistency_check
from density import Grid, gaussian_density
from errors import DimensionMismatch, EmptySample, InvalidGrid, TypeMismatch


class TestImpliedMarginal:
    """Test cases for implied_marginal."""

    def test_discrete_is_matrix_product(self):
        """Test the discrete marginal is M @ p."""
        matrix = StochasticMatrix([[0.9, 0.2], [0.1, 0.8]])

        implied = implied_marginal(matrix, np.array([0.5, 0.5]))

        np.testing.assert_allclose(implied, [0.55, 0.45])

    def test_continuous_adds_noise_variance(self):
        """Test identity mechanism plus noise widens the prior."""
        noise = gaussian_density(Grid(-1.5, 1.5, 150), 0.0, 0.3)
        prior = gaussian_density(Grid(-4.0, 4.0, 160), 0.0, 1.0)
        conditional = AdditiveConditional(lambda y: y, noise)

        implied = implied_marginal(conditional, prior, Grid(-6.0, 6.0, 240))

        assert implied.mean() == pytest.approx(0.0, abs=1e-3)
        assert implied.std() == pytest.approx(np.sqrt(1.09), rel=0.02)

    def test_type_mismatch(self):
        """Test a matrix with a density prior."""
        prior = gaussian_density(Grid(-1.0, 1.0, 16), 0.0, 0.3)

        with pytest.raises(TypeMismatch):
            implied_marginal(StochasticMatrix(np.eye(2)), prior)

    def test_continuous_needs_grid(self):
        """Test the target grid is required."""
        noise = gaussian_density(Grid(-1.0, 1.0, 32), 0.0, 0.2)
        prior = gaussian_density(Grid(-1.0, 1.0, 32), 0.0, 0.3)

        with pytest.raises(InvalidGrid):
            implied_marginal(AdditiveConditional(lambda y: y, noise), prior)


class TestMarginalConsistencyCheck:
    """Test cases for marginal_consistency_check."""

    @pytest.fixture
    def matrix(self):
        return StochasticMatrix(np.eye(3))

    @pytest.fixture
    def prior(self):
        return np.array([0.2, 0.3, 0.5])

    def test_exact_proportions_are_consistent(self, matrix, prior, fast_config):
        """Test labels in the implied proportions pass."""
        labels = np.repeat([0, 1, 2], [20, 30, 50])

        result = marginal_consistency_check(matrix, prior, labels, fast_config)

        assert result.distance == pytest.approx(0.0)
        assert result.consistent

    def test_single_label_is_inconsistent(self, matrix, prior, fast_config):
        """Test a sample concentrated on one label fails."""
        result = marginal_consistency_check(matrix, prior, np.zeros(100, dtype=int),
                                            fast_config)

        assert result.distance == pytest.approx(1.6)
        assert not result.consistent
        assert result.threshold < result.distance

    @pytest.mark.parametrize('labels', [[0, 1, 3], [-1, 0, 2]])
    def test_labels_outside_the_outputs(self, matrix, prior, fast_config, labels):
        """Test labels with no matrix row are rejected."""
        with pytest.raises(DimensionMismatch):
            marginal_consistency_check(matrix, prior, np.array(labels), fast_config)

    def test_shifted_continuous_inputs_are_inconsistent(self, rng, fast_config):
        """Test extra inputs far from the implied marginal fail."""
        noise = gaussian_density(Grid(-1.5, 1.5, 150), 0.0, 0.3)
        prior = gaussian_density(Grid(-4.0, 4.0, 160), 0.0, 1.0)
        conditional = AdditiveConditional(lambda y: y, noise)

        result = marginal_consistency_check(conditional, prior, rng.normal(5.0, 0.3, 200),
                                            fast_config)

        assert not result.consistent

    def test_deterministic_for_fixed_seed(self, matrix, prior, fast_config):
        """Test the calibrated threshold depends only on the seed."""
        labels = np.repeat([0, 1, 2], [25, 30, 45])

        first = marginal_consistency_check(matrix, prior, labels, fast_config)
        second = marginal_consistency_check(matrix, prior, labels, fast_config)

        assert first == second

    def test_empty_extra(self, matrix, prior):
        """Test an empty label sample."""
        with pytest.raises(EmptySample):
            marginal_consistency_check(matrix, prior, [])

    def test_type_mismatch(self, fast_config):
        """Test an additive conditional with a vector prior."""
        noise = gaussian_density(Grid(-1.0, 1.0, 32), 0.0, 0.2)

        with pytest.raises(TypeMismatch):
            marginal_consistency_check(AdditiveConditional(lambda y: y, noise),
                                       np.array([0.5, 0.5]), [0.1, 0.2], fast_config)

    def test_to_dict(self):
        """Test the record layout."""
        record = ConsistencyResult(0.1, True, 0.2).to_dict()

        assert record == {'distance': 0.1, 'consistent': True, 'threshold': 0.2}
