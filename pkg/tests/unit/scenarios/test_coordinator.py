"""
Unit tests for scenario routing.
"""
from unittest.mock import Mock

import numpy as np
import pytest

from errors import ShapeMismatch, UnsupportedScenario
from samples import PairedSample
from scenarios.base import (
    ConditionalPredictor,
    Direction,
    DriftKind,
    ExtraKind,
    ScenarioSpec,
    UnpairedSample,
    baseline_predictor,
    prediction_grids,
)
from scenarios.coordinator import ScenarioCoordinator, adapt, route_key


def _all_specs():
    specs = []
    for direction in Direction:
        for kind in (ExtraKind.INPUTS, ExtraKind.OUTPUTS, ExtraKind.UNPAIRED):
            for shifted in (True, False):
                specs.append(ScenarioSpec(direction, kind, extra_is_shifted=shifted))
        for drift in DriftKind:
            specs.append(ScenarioSpec(direction, ExtraKind.PAIRS, drift_kind=drift))
    return specs


class TestRouting:
    """Test cases for the route table."""

    def test_every_scenario_has_one_pipeline(self):
        """Test all sixteen scenarios route to distinct pipelines."""
        coordinator = ScenarioCoordinator()
        pipelines = [coordinator.pipeline_for(spec) for spec in _all_specs()]

        assert len(pipelines) == 16
        assert len(set(pipelines)) == 16
        assert len(coordinator.routes) == 16

    def test_pairs_ignore_the_shift_flag(self):
        """Test pairs are keyed by drift kind only."""
        shifted = ScenarioSpec('causal', 'pairs', True, drift_kind='noise-change')
        unshifted = ScenarioSpec('causal', 'pairs', False, drift_kind='noise-change')

        assert route_key(shifted) == route_key(unshifted)

    def test_missing_route(self):
        """Test a scenario without a pipeline."""
        coordinator = ScenarioCoordinator()
        spec = ScenarioSpec('causal', 'inputs')
        del coordinator.routes[route_key(spec)]

        with pytest.raises(UnsupportedScenario):
            coordinator.pipeline_for(spec)

    @pytest.mark.parametrize('name,expected', [
        (('causal', 'inputs', True, None), 'covariate_shift'),
        (('causal', 'outputs', True, None), 'causal_output_shift'),
        (('causal', 'pairs', True, 'mechanism-change'), 'causal_concept_drift'),
        (('anticausal', 'inputs', True, None), 'anticausal_input_shift'),
        (('anticausal', 'outputs', False, None), 'anticausal_ssl_outputs'),
        (('anticausal', 'pairs', True, 'noise-change'), 'anticausal_transfer'),
        (('causal', 'unpaired', True, None), 'causal_unpaired_transfer'),
        (('anticausal', 'unpaired', False, None), 'anticausal_ssl_unpaired'),
    ])
    def test_known_routes(self, name, expected):
        """Test a sample of route targets."""
        direction, kind, shifted, drift = name
        spec = ScenarioSpec(direction, kind, shifted, drift_kind=drift)

        assert ScenarioCoordinator().pipeline_for(spec).__name__ == expected


class TestAdapt:
    """Test cases for ScenarioCoordinator.adapt."""

    @pytest.fixture
    def fake_pipeline(self, square_pairs, fast_config):
        predictor = baseline_predictor(square_pairs, fast_config)
        pipeline = Mock(return_value=predictor)
        pipeline.__name__ = 'fake_pipeline'
        return pipeline

    def test_spec_overrides_alpha_and_seed(self, square_pairs, fast_config, fake_pipeline):
        """Test the scenario's alpha and seed reach the pipeline."""
        coordinator = ScenarioCoordinator(fast_config)
        spec = ScenarioSpec('causal', 'inputs', alpha=0.1, seed=9)
        coordinator.routes[route_key(spec)] = fake_pipeline

        predictor = coordinator.adapt(spec, square_pairs, np.zeros(30))

        config = fake_pipeline.call_args[0][2]
        assert config['alpha'] == 0.1
        assert config['seed'] == 9
        assert fast_config['alpha'] == 0.01
        assert predictor.provenance['pipeline'] == 'fake_pipeline'
        assert predictor.provenance['scenario'] == spec.to_dict()

    def test_pairs_need_paired_extra(self, square_pairs):
        """Test single-column extra data for a pairs scenario."""
        spec = ScenarioSpec('causal', 'pairs', drift_kind='noise-change')

        with pytest.raises(ShapeMismatch):
            adapt(spec, square_pairs, np.zeros(10))

    def test_columns_reject_pairs(self, square_pairs):
        """Test paired extra data for an inputs scenario."""
        with pytest.raises(ShapeMismatch):
            adapt(ScenarioSpec('causal', 'inputs'), square_pairs, square_pairs)

    def test_unpaired_need_both_marginals(self, square_pairs):
        """Test unpaired scenarios reject single columns and pairs."""
        spec = ScenarioSpec('causal', 'unpaired')

        with pytest.raises(ShapeMismatch):
            adapt(spec, square_pairs, square_pairs.x)
        with pytest.raises(ShapeMismatch):
            adapt(spec, square_pairs, square_pairs)
        with pytest.raises(ShapeMismatch):
            adapt(ScenarioSpec('causal', 'inputs'), square_pairs,
                  UnpairedSample(square_pairs.x, square_pairs.y))

    def test_covariate_shift_is_the_baseline(self, square_pairs, fast_config, rng):
        """Test the causal covariate-shift route returns the trained conditional unchanged."""
        spec = ScenarioSpec('causal', 'inputs', alpha=0.05, seed=2)
        extra = rng.uniform(0.0, 2.0, size=80)

        adapted = adapt(spec, square_pairs, extra, fast_config)
        config = dict(fast_config, alpha=spec.alpha, seed=spec.seed)
        baseline = baseline_predictor(
            square_pairs, config, prediction_grids(square_pairs, extra, ExtraKind.INPUTS, config)
        )

        assert isinstance(adapted, ConditionalPredictor)
        np.testing.assert_array_equal(adapted.density, baseline.density)
        assert adapted.provenance['route'] == 'pass-through'
        assert adapted.provenance['n_extra'] == 80

    def test_unshifted_inputs_flag_no_gain(self, square_pairs, fast_config):
        """Test the causal semi-supervised route."""
        spec = ScenarioSpec('causal', 'inputs', extra_is_shifted=False)
        extra = PairedSample(np.zeros(3), np.zeros(3))

        with pytest.raises(ShapeMismatch):
            adapt(spec, square_pairs, extra, fast_config)

        adapted = adapt(spec, square_pairs, square_pairs.x[:40], fast_config)

        assert 'ssl_no_gain' in adapted.flags
