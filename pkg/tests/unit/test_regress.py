"""
Unit tests for kernel ridge regression.
"""
import numpy as np
import pytest

from errors import DegenerateInput, InvalidConfig, ShapeMismatch, TooFewSamples
from regress import (
    RIDGE_LADDER,
    RegressionModel,
    cross_validated_ridge,
    evaluate,
    fit_krr,
    rank_folds,
    solve_coefficients,
)
from samples import PairedSample


class TestFitKrr:
    """Test cases for fit_krr."""

    @pytest.fixture
    def sine_pairs(self, rng):
        x = rng.uniform(-2, 2, size=150)
        return PairedSample(x, np.sin(x) + 0.05 * rng.normal(size=150))

    def test_recovers_smooth_function(self, sine_pairs):
        """Test the fit tracks sin on the interior of the data."""
        model = fit_krr(sine_pairs)
        points = np.linspace(-1.5, 1.5, 50)

        rmse = np.sqrt(np.mean((model(points) - np.sin(points)) ** 2))

        assert rmse < 0.1

    def test_residuals_have_zero_mean(self, sine_pairs):
        """Test the unpenalized intercept centers the residuals."""
        model = fit_krr(sine_pairs)
        residuals = sine_pairs.y - model.evaluate(sine_pairs.x)

        assert np.mean(residuals) == pytest.approx(0.0, abs=1e-10)

    def test_explicit_hyperparameters(self, sine_pairs):
        """Test fixed bandwidth and ridge are used as given."""
        model = fit_krr(sine_pairs, bandwidth=0.5, ridge=2.0)

        assert model.bandwidth == 0.5
        assert model.ridge == 2.0

    def test_auto_ridge_comes_from_ladder(self, sine_pairs):
        """Test cross-validation picks factor * n."""
        model = fit_krr(sine_pairs)

        assert any(model.ridge / sine_pairs.n == pytest.approx(f) for f in RIDGE_LADDER)

    def test_too_few_samples(self):
        """Test the minimum sample size."""
        with pytest.raises(TooFewSamples):
            fit_krr(PairedSample(np.arange(5.0), np.arange(5.0)))

    def test_constant_causes(self):
        """Test that identical causes cannot be regressed on."""
        with pytest.raises(DegenerateInput):
            fit_krr(PairedSample(np.ones(20), np.arange(20.0)))

    def test_negative_ridge(self, sine_pairs):
        """Test that a negative ridge is rejected."""
        with pytest.raises(InvalidConfig):
            fit_krr(sine_pairs, ridge=-1.0)


class TestRegressionModel:
    """Test cases for RegressionModel."""

    @pytest.fixture
    def model(self):
        return RegressionModel(np.array([0.0, 1.0]), np.array([1.0, -1.0]), 1.0, 0.1, 0.5)

    def test_evaluate(self, model):
        """Test the kernel expansion plus intercept."""
        expected = 1.0 - np.exp(-0.5) + 0.5

        assert model.evaluate([0.0])[0] == pytest.approx(expected)
        assert evaluate(model, [0.0])[0] == pytest.approx(expected)

    def test_shifted(self, model):
        """Test adding a constant."""
        points = np.linspace(-1, 2, 7)

        np.testing.assert_allclose(model.shifted(2.0)(points), model(points) + 2.0)

    def test_to_dict_and_back(self, model):
        """Test serialization preserves predictions."""
        record = model.to_dict()
        restored = RegressionModel.from_dict(record)

        assert record['version'] == 1
        np.testing.assert_array_equal(restored([0.3, 0.7]), model([0.3, 0.7]))

    def test_mismatched_coefficients(self):
        """Test inputs and coefficients must align."""
        with pytest.raises(ShapeMismatch):
            RegressionModel(np.zeros(3), np.zeros(2), 1.0, 0.1, 0.0)

    def test_nonpositive_bandwidth(self):
        """Test bandwidth must be positive."""
        with pytest.raises(InvalidConfig):
            RegressionModel(np.zeros(2), np.zeros(2), 0.0, 0.1, 0.0)


class TestSolvers:
    """Test cases for the linear-algebra helpers."""

    def test_huge_ridge_gives_mean(self):
        """Test strong shrinkage leaves only the intercept."""
        x = np.linspace(0, 1, 6)
        gram = np.exp(-(x[:, None] - x[None, :]) ** 2 / (2 * 0.3 ** 2))
        targets = np.array([1.0, 3.0, 2.0, 5.0, 4.0, 6.0])

        coefficients, intercept = solve_coefficients(gram, targets, 1e12)

        assert intercept == pytest.approx(np.mean(targets), abs=1e-6)
        np.testing.assert_allclose(coefficients, 0.0, atol=1e-9)

    def test_cross_validated_ridge_uses_ladder(self, rng):
        """Test the CV choice is one of the candidates."""
        x = rng.uniform(-1, 1, size=40)
        gram = np.exp(-(x[:, None] - x[None, :]) ** 2 / 0.5)
        targets = x ** 2 + 0.1 * rng.normal(size=40)

        ridge = cross_validated_ridge(gram, targets, ladder=(0.01, 0.1))

        assert ridge == pytest.approx(0.4) or ridge == pytest.approx(4.0)


class TestRegressionProperties:
    """Test cases for invariances of the fitted mechanism."""

    @pytest.fixture
    def cubic_pairs(self, rng):
        x = rng.uniform(-1, 1, size=120)
        return PairedSample(x, x ** 3 + 0.1 * rng.normal(size=120))

    def test_translation_equivariance(self, cubic_pairs):
        """Test shifting the effects by c shifts phi by c pointwise."""
        shifted = PairedSample(cubic_pairs.x, cubic_pairs.y + 2.5)
        points = np.linspace(-1, 1, 33)

        model = fit_krr(cubic_pairs)
        moved = fit_krr(shifted)

        assert moved.ridge == model.ridge
        np.testing.assert_allclose(moved(points), model(points) + 2.5, atol=1e-8)

    def test_training_error_grows_with_ridge(self, cubic_pairs):
        """Test training squared error is non-decreasing along the ridge ladder."""
        bandwidth = 0.4
        errors = []
        for factor in RIDGE_LADDER:
            model = fit_krr(cubic_pairs, bandwidth=bandwidth, ridge=factor * cubic_pairs.n)
            errors.append(np.sum((cubic_pairs.y - model(cubic_pairs.x)) ** 2))

        assert np.all(np.diff(errors) >= -1e-9)

    def test_sample_order_does_not_change_ridge(self, cubic_pairs):
        """Test cross-validation folds follow the data, not its order."""
        order = np.random.default_rng(8).permutation(cubic_pairs.n)
        permuted = PairedSample(cubic_pairs.x[order], cubic_pairs.y[order])
        points = np.linspace(-0.9, 0.9, 21)

        model = fit_krr(cubic_pairs)
        reordered = fit_krr(permuted)

        assert reordered.ridge == model.ridge
        np.testing.assert_allclose(reordered(points), model(points), atol=1e-8)

    def test_rank_folds_are_balanced(self):
        """Test fold labels depend on rank and cycle through all folds."""
        x = np.array([0.5, -1.0, 2.0, 0.0, 1.0, -0.5])

        folds = rank_folds(x, np.zeros(6), n_folds=3)

        np.testing.assert_array_equal(folds, [0, 0, 2, 2, 1, 1])
        np.testing.assert_array_equal(rank_folds(x[::-1], np.zeros(6), n_folds=3), folds[::-1])
