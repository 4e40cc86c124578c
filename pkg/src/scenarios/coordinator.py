"""Routes each adaptation scenario to its pipeline."""
import logging
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np

from errors import ShapeMismatch, UnsupportedScenario
from samples import PairedSample, as_sample
from scenarios import anticausal, causal
from scenarios.base import (
    ConditionalPredictor,
    Direction,
    DriftKind,
    ExtraKind,
    ScenarioSpec,
    UnpairedSample,
    prediction_grids,
)

logger = logging.getLogger(__name__)

Extra = Union[np.ndarray, PairedSample, UnpairedSample]
RouteKey = Tuple[Direction, ExtraKind, Union[bool, DriftKind]]


def route_key(spec: ScenarioSpec) -> RouteKey:
    """Pairs are keyed by drift kind; inputs and outputs by whether the extra data is shifted."""
    if spec.extra_kind == ExtraKind.PAIRS:
        return spec.direction, spec.extra_kind, spec.drift_kind
    return spec.direction, spec.extra_kind, bool(spec.extra_is_shifted)


class ScenarioCoordinator:
    """Dispatches a scenario to exactly one adaptation pipeline."""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.config = config or {}
        self.routes: Dict[RouteKey, Callable[..., ConditionalPredictor]] = {
            (Direction.CAUSAL, ExtraKind.INPUTS, True): causal.covariate_shift,
            (Direction.CAUSAL, ExtraKind.INPUTS, False): causal.causal_ssl_inputs,
            (Direction.CAUSAL, ExtraKind.OUTPUTS, True): causal.causal_output_shift,
            (Direction.CAUSAL, ExtraKind.OUTPUTS, False): causal.causal_ssl_outputs,
            (Direction.CAUSAL, ExtraKind.PAIRS, DriftKind.NOISE_CHANGE): causal.causal_transfer,
            (Direction.CAUSAL, ExtraKind.PAIRS, DriftKind.MECHANISM_CHANGE):
                causal.causal_concept_drift,
            (Direction.CAUSAL, ExtraKind.UNPAIRED, True): causal.causal_unpaired_transfer,
            (Direction.CAUSAL, ExtraKind.UNPAIRED, False): causal.causal_ssl_unpaired,
            (Direction.ANTICAUSAL, ExtraKind.INPUTS, True): anticausal.anticausal_input_shift,
            (Direction.ANTICAUSAL, ExtraKind.INPUTS, False): anticausal.anticausal_ssl_inputs,
            (Direction.ANTICAUSAL, ExtraKind.OUTPUTS, True): anticausal.anticausal_output_shift,
            (Direction.ANTICAUSAL, ExtraKind.OUTPUTS, False): anticausal.anticausal_ssl_outputs,
            (Direction.ANTICAUSAL, ExtraKind.PAIRS, DriftKind.NOISE_CHANGE):
                anticausal.anticausal_transfer,
            (Direction.ANTICAUSAL, ExtraKind.PAIRS, DriftKind.MECHANISM_CHANGE):
                anticausal.anticausal_concept_drift,
            (Direction.ANTICAUSAL, ExtraKind.UNPAIRED, True):
                anticausal.anticausal_unpaired_transfer,
            (Direction.ANTICAUSAL, ExtraKind.UNPAIRED, False): anticausal.anticausal_ssl_unpaired,
        }

    def pipeline_for(self, spec: ScenarioSpec) -> Callable[..., ConditionalPredictor]:
        key = route_key(spec)
        if key not in self.routes:
            raise UnsupportedScenario(f"no adaptation pipeline for {spec.to_dict()}")
        return self.routes[key]

    def adapt(self, spec: ScenarioSpec, train: PairedSample, extra: Any) -> ConditionalPredictor:
        extra = _check_extra(spec, extra)
        config = dict(self.config)
        config['alpha'] = spec.alpha
        config['seed'] = spec.seed

        pipeline = self.pipeline_for(spec)
        grids = prediction_grids(train, extra, spec.extra_kind, config)
        logger.info(f"Adapting {spec.direction.value}/{spec.extra_kind.value} scenario "
                    f"with {pipeline.__name__}")
        predictor = pipeline(train, extra, config, grids)
        return predictor.with_provenance(pipeline=pipeline.__name__, scenario=spec.to_dict())


def _check_extra(spec: ScenarioSpec, extra: Any) -> Extra:
    if spec.extra_kind == ExtraKind.PAIRS:
        if not isinstance(extra, PairedSample):
            raise ShapeMismatch(f"{spec.extra_kind.value} scenarios need paired extra data, "
                                f"got {type(extra).__name__}")
        return extra
    if spec.extra_kind == ExtraKind.UNPAIRED:
        if not isinstance(extra, UnpairedSample):
            raise ShapeMismatch(f"unpaired scenarios need separate extra inputs and outputs, "
                                f"got {type(extra).__name__}")
        return extra
    if isinstance(extra, (PairedSample, UnpairedSample)):
        raise ShapeMismatch(f"{spec.extra_kind.value} scenarios need a single column of "
                            f"extra data, got {type(extra).__name__}")
    return as_sample(extra)


def adapt(spec: ScenarioSpec, train: PairedSample, extra: Any,
          config: Optional[Dict[str, Any]] = None) -> ConditionalPredictor:
    return ScenarioCoordinator(config).adapt(spec, train, extra)
