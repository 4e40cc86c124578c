"""
Seeded Monte Carlo checks of the statistical behaviour at desk scale.
"""
import numpy as np
import pandas as pd
import pytest

from anm import Direction, fit_conditional_anm, infer_direction
from benchmark import CATALOG, BenchmarkRunner, run_cell
from causal.base import Verdict
from causal.localize import ShiftLocalizer
from datagen import GeneratorSpec, Shift, generate, generate_shift_pair
from density import (
    Grid,
    convolve,
    gaussian_density,
    gaussian_kernel,
    l1_distance,
    max_gaussian_deconvolve,
    uniform_density,
)
from dependence import hsic_test
from errors import AnmMisfit
from samples import PairedSample

pytestmark = [pytest.mark.integration, pytest.mark.slow]


@pytest.fixture
def localize_config(fast_config):
    return dict(fast_config, n_bootstrap=100, grid_m=512, n_permutations=199)


def _verdicts(config, noise, shift, seeds, n=1000):
    verdicts = []
    for seed in seeds:
        base = GeneratorSpec('identity', 'uniform(-1, 1)', noise, n, seed)
        data = generate_shift_pair(base, Shift.parse(shift), n)
        localizer = ShiftLocalizer(dict(config, seed=seed))
        try:
            verdicts.append(localizer.localize_shift(data.train, data.extra.y).verdict)
        except AnmMisfit:
            verdicts.append(None)
    return verdicts


class TestIndependenceCalibration:
    """Test cases for the HSIC permutation test over many trials."""

    def test_type_one_error(self):
        """Test the rejection rate on independent data stays near alpha."""
        rejections = 0
        for trial in range(200):
            rng = np.random.default_rng([2024, trial])
            result = hsic_test(rng.normal(size=300), rng.normal(size=300),
                               n_permutations=499, seed=trial)
            rejections += result.p_value <= 0.05

        assert 0.02 <= rejections / 200 <= 0.09

    def test_power_on_cubic_dependence(self):
        """Test y = x^3 + 0.1 noise is detected."""
        rng = np.random.default_rng(99)
        x = rng.normal(size=300)
        y = x ** 3 + 0.1 * rng.normal(size=300)

        assert hsic_test(x, y, n_permutations=499, seed=1).p_value <= 0.01


class TestDirectionInference:
    """Test cases for the direction majority over seeds."""

    def test_identifiable_tanh(self, fast_config):
        """Test tanh(3x) with uniform noise is oriented forward in at least 85% of 50 seeds."""
        config = dict(fast_config, n_permutations=199)
        forward = 0
        for seed in range(50):
            pairs = generate(GeneratorSpec('tanh3', 'gaussian(0, 1)', 'uniform(-0.3, 0.3)',
                                           400, seed))
            forward += infer_direction(pairs, 0.05, config).direction == Direction.X_TO_Y

        assert forward >= 43

    def test_linear_gaussian_is_undecided(self, fast_config):
        """Test y = x + N(0, 1) with Gaussian x abstains in at least 60% of 50 seeds."""
        config = dict(fast_config, n_permutations=199)
        undecided = 0
        for seed in range(50):
            pairs = generate(GeneratorSpec('identity', 'gaussian(0, 1)', 'gaussian(0, 1)',
                                           300, seed))
            undecided += infer_direction(pairs, 0.05, config).direction == Direction.UNDECIDED

        assert undecided >= 30


class TestSharedMechanism:
    """Test cases for the conditional ANM over 30 seeds."""

    GRID = np.linspace(-0.9, 0.9, 91)

    @staticmethod
    def _datasets(seed):
        first = generate(GeneratorSpec('square', 'uniform(-1, 1)', 'gaussian(0, 0.2)', 300,
                                       2 * seed))
        second = generate(GeneratorSpec('square', 'gaussian(0, 1)', 'gaussian(0, 0.6)', 300,
                                        2 * seed + 1))
        return first, second

    def test_shared_square_is_recovered(self, fast_config):
        """Test the median RMSE to c^2 and how often both residual sets pass."""
        config = dict(fast_config, n_permutations=199)
        errors, accepted = [], 0
        for seed in range(30):
            fit = fit_conditional_anm(list(self._datasets(seed)), dict(config, seed=seed))
            fitted = fit.model_for(0).evaluate(self.GRID)
            errors.append(np.sqrt(np.mean((fitted - self.GRID ** 2) ** 2)))
            accepted += all(d.independence.p_value > 0.05 for d in fit.per_dataset)
            assert np.all(np.diff(fit.objective_trace) <= 0)

        assert np.median(errors) <= 0.1
        assert accepted >= 24

    def test_opposite_mechanisms_are_a_misfit(self, fast_config):
        """Test c^2 against -c^2 leaves dependent residuals in at least 80% of 30 seeds."""
        config = dict(fast_config, n_permutations=199)
        detected = 0
        for seed in range(30):
            first, second = self._datasets(seed)
            flipped = PairedSample(second.x, -second.y)
            fit = fit_conditional_anm([first, flipped], dict(config, seed=seed))
            detected += fit.misfit(0.05)

        assert detected >= 24


class TestShiftLocalization:
    """Test cases for the branch verdicts on generated shifts over 30 seeds."""

    def test_cause_shift(self, localize_config):
        """Test a moved cause marginal is attributed to the cause in at least 70% of seeds."""
        verdicts = _verdicts(dict(localize_config, grid_m=1024), 'gaussian(0, 2)',
                             'cause:uniform(-0.5, 1.5)', range(30), n=1000)

        assert verdicts.count(Verdict.CAUSE_CHANGED) >= 21

    def test_narrower_noise_is_a_mechanism_change(self, localize_config):
        """Test train noise N(0, 4) against new noise N(0, 1) in at least 80% of seeds."""
        verdicts = _verdicts(localize_config, 'gaussian(0, 2)', 'noise:gaussian(0, 1)',
                             range(30), n=2000)

        assert verdicts.count(Verdict.MECHANISM_CHANGED) >= 24

    def test_wider_noise_is_ambiguous(self, localize_config):
        """Test train noise N(0, 1) against new noise N(0, 4) in at least 80% of seeds."""
        verdicts = _verdicts(localize_config, 'gaussian(0, 1)', 'noise:gaussian(0, 2)',
                             range(30), n=2000)

        assert verdicts.count(Verdict.AMBIGUOUS) >= 24


class TestGaussianFactor:
    """Test cases for the maximal Gaussian factor of uniform * Gaussian."""

    @pytest.mark.parametrize('sigma', [0.5, 1.0])
    def test_sigma_max(self, sigma):
        """Test the recovered width and how close the remainder is to the box."""
        grid = Grid(-1.0, 2.0, 1024)
        box = uniform_density(grid, 0.0, 1.0)
        d = convolve(box, gaussian_kernel(grid.step, sigma))

        result = max_gaussian_deconvolve(d, 0.05)

        assert result.sigma_max == pytest.approx(sigma, rel=0.1)
        assert result.remainder.mean() == pytest.approx(0.5, abs=0.05)
        assert l1_distance(result.remainder, box) <= 0.5 * l1_distance(d, box)

    def test_gaussian_leaves_point_mass(self):
        """Test N(0, 2) gives a width near sqrt(2) and a remainder near a point mass."""
        d = gaussian_density(Grid(-8.0, 8.0, 1024), 0.0, np.sqrt(2.0))

        result = max_gaussian_deconvolve(d, 0.05)

        assert result.sigma_max == pytest.approx(np.sqrt(2.0), rel=0.1)
        assert result.remainder.std() <= 0.5 * d.std()


class TestGenerator:
    """Test cases for generator moments at large n."""

    def test_square_mechanism_mean(self):
        """Test E[C^2] = 1/3 for C ~ U(-1, 1)."""
        spec = GeneratorSpec('square', 'uniform(-1, 1)', 'gaussian(0, 0.3)', 100_000, 0)
        pairs = generate(spec)

        assert np.mean(pairs.y) == pytest.approx(1.0 / 3.0, abs=0.01)


class TestBenchmark:
    """Test cases for benchmark cells and summaries."""

    def test_pass_through_is_exact_over_seeds(self, fast_config):
        """Test covariate-shift cells score exactly like the baseline."""
        for seed in range(5):
            row = run_cell('causal-covariate-shift', seed, 200, 200, fast_config)

            assert row['status'] == 'ok'
            assert row['adapted_row_l1'] == row['baseline_row_l1']

    def test_single_cell_summary(self, tmp_path, fast_config):
        """Test a one-cell sweep summarizes to that cell's metrics."""
        config = dict(fast_config, scenarios='causal-transfer', n_seeds=1, n=200)

        summary = BenchmarkRunner(config, tmp_path).run()

        cell = pd.read_csv(tmp_path / 'causal-transfer' / 'seed_0' / 'metrics.csv')
        assert summary.loc[0, 'n_ok'] + summary.loc[0, 'n_failed'] == 1
        if cell.loc[0, 'status'] == 'ok':
            assert summary.loc[0, 'adapted_row_l1_mean'] == \
                pytest.approx(cell.loc[0, 'adapted_row_l1'])
            assert summary.loc[0, 'adapted_row_l1_std'] == 0.0

    def test_failing_cell_does_not_abort(self, tmp_path, fast_config):
        """Test a sweep with too few samples records failures."""
        config = dict(fast_config, scenarios='causal-covariate-shift', n_seeds=2, n=5)

        summary = BenchmarkRunner(config, tmp_path).run()

        assert summary.loc[0, 'n_failed'] == 2
        assert (tmp_path / 'summary.csv').exists()

    def test_sweep_beats_the_baseline(self, tmp_path, localize_config):
        """Test every shifted scenario improves on the baseline over 30 seeds at n = 500."""
        config = dict(localize_config, scenarios='all', n_seeds=30, n=500, workers=4)

        summary = BenchmarkRunner(config, tmp_path).run().set_index('scenario')

        shifted = [name for name, scenario in CATALOG.items()
                   if scenario.shift is not None and name != 'causal-covariate-shift']
        for name in shifted:
            row = summary.loc[name]
            assert row['adapted_row_l1_mean'] < row['baseline_row_l1_mean'], name
        pass_through = summary.loc['causal-covariate-shift']
        assert pass_through['adapted_row_l1_mean'] == pass_through['baseline_row_l1_mean']
