"""Adaptation pipelines when the prediction input is the effect.

Everything is fitted in the causal direction Y -> X and turned into
P(Y | X) by Bayes' rule with an estimated prior over Y.
"""
import logging
from typing import Any, Dict, List, Optional

import numpy as np

from anm import AnmFit, fit_anm, fit_conditional_anm, noise_density_of
from causal.base import AdditiveConditional, TabulatedMap, Verdict, pushforward
from causal.consistency import marginal_consistency_check
from causal.localize import ShiftLocalizer
from density import GridDensity
from errors import NonMonotonePhi
from samples import PairedSample, as_sample
from scenarios.base import (
    ConditionalPredictor,
    PredictionGrids,
    UnpairedSample,
    baseline_predictor,
    causal_table,
    noise_from_marginals,
    prediction_grids,
)
from scenarios.bayes import bayes_reweight

logger = logging.getLogger(__name__)

MONOTONE_KNOTS = 2049


def _grids(train: PairedSample, grids: Optional[PredictionGrids],
           config: Dict[str, Any]) -> PredictionGrids:
    return grids or prediction_grids(train, config=config)


def prior_density(outputs: Any, config: Dict[str, Any]) -> GridDensity:
    """KDE of a sample of the target variable, used as P(Y)."""
    return noise_density_of(as_sample(outputs), config)


def _posterior(conditional: AdditiveConditional, prior: GridDensity, grids: PredictionGrids,
               record: Dict[str, Any]) -> ConditionalPredictor:
    predictor = bayes_reweight(causal_table(conditional, grids), prior)
    flags: List[str] = list(predictor.flags)
    flags += [flag for flag in record.get('flags', []) if flag not in flags]
    entries = dict(record)
    entries['flags'] = flags
    return predictor.with_provenance(**entries)


def monotone_mechanism(fit: AnmFit, outputs: np.ndarray) -> TabulatedMap:
    """The fitted Y -> X mechanism tabulated over the observed outputs; must be invertible."""
    mapping = TabulatedMap.from_function(fit.model.evaluate, float(np.min(outputs)),
                                         float(np.max(outputs)), MONOTONE_KNOTS)
    if not mapping.is_strictly_monotone():
        raise NonMonotonePhi(
            "the fitted mechanism from outputs to inputs is not strictly monotone on the "
            "training range; the prior cannot be recovered from its image"
        )
    return mapping


def anticausal_input_shift(train: PairedSample, new_inputs: Any, config: Dict[str, Any],
                           grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """Localize the shift of P(X) and update whichever factor of P(X, Y) moved."""
    grids = _grids(train, grids, config)
    causal_pairs = train.swapped()
    fit = fit_anm(causal_pairs, config)
    mapping = monotone_mechanism(fit, train.y)

    localizer = ShiftLocalizer(config)
    analysis = localizer.diagnose(causal_pairs, new_inputs, fit)
    diagnosis = analysis.diagnosis
    record = {'route': 'localize-invert', 'verdict': diagnosis.verdict.value,
              'diagnosis': diagnosis.to_dict(), 'flags': [], 'warnings': []}

    if diagnosis.verdict == Verdict.CAUSE_CHANGED:
        inverse = mapping.inverse().extended(*diagnosis.recovered.support())
        grids = grids.covering_outputs(*inverse.image)
        prior = pushforward(diagnosis.recovered, inverse, grids.y)
        record['recovered_prior'] = prior.to_dict()
        forward = mapping.extended(grids.y.lo, grids.y.hi)
        conditional = AdditiveConditional(forward, fit.noise_density)
        return _posterior(conditional, prior, grids, record)

    if diagnosis.verdict == Verdict.MECHANISM_CHANGED:
        estimate = localizer.estimate_from(analysis)
        record['estimate'] = estimate.to_dict()
        if estimate.flagged:
            record['flags'].append('reconvolution_mismatch')
        conditional = AdditiveConditional(estimate.model, estimate.new_noise)
        return _posterior(conditional, prior_density(train.y, config), grids, record)

    record['warnings'].append(f"shift localization returned {diagnosis.verdict.value}; "
                              f"returning the unadapted baseline")
    logger.warning(record['warnings'][-1])
    return baseline_predictor(train, config, grids).with_provenance(**record)


def anticausal_ssl_inputs(train: PairedSample, extra_inputs: Any, config: Dict[str, Any],
                          grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """Unshifted extra inputs: the baseline, with a consistency check of the extra inputs."""
    grids = _grids(train, grids, config)
    fit = fit_anm(train.swapped(), config)
    prior = prior_density(train.y, config)
    conditional = AdditiveConditional(fit.model, fit.noise_density)
    check = marginal_consistency_check(conditional, prior, extra_inputs, config)
    record = {
        'route': 'consistency-check',
        'consistency': check.to_dict(),
        'flags': [] if check.consistent else ['inconsistent_marginal'],
    }
    if not check.consistent:
        logger.warning(f"Extra inputs disagree with the training model "
                       f"(distance {check.distance:.4f} > {check.threshold:.4f})")
    predictor = baseline_predictor(train, config, grids)
    record['flags'] = predictor.flags + record['flags']
    return predictor.with_provenance(**record)


def anticausal_output_shift(train: PairedSample, new_outputs: Any, config: Dict[str, Any],
                            grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """P(X | Y) is invariant; the new outputs give the prior."""
    grids = _grids(train, grids, config)
    fit = fit_anm(train.swapped(), config)
    new_outputs = as_sample(new_outputs)
    conditional = AdditiveConditional(fit.model, fit.noise_density)
    record = {'route': 'bayes-reweight', 'flags': [], 'n_extra': int(new_outputs.size)}
    return _posterior(conditional, prior_density(new_outputs, config), grids, record)


def anticausal_ssl_outputs(train: PairedSample, extra_outputs: Any, config: Dict[str, Any],
                           grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """Unshifted extra outputs sharpen the prior by pooling them with the training outputs."""
    grids = _grids(train, grids, config)
    fit = fit_anm(train.swapped(), config)
    pooled = np.concatenate([train.y, as_sample(extra_outputs)])
    conditional = AdditiveConditional(fit.model, fit.noise_density)
    record = {'route': 'bayes-reweight', 'flags': ['pooled_prior'], 'n_prior': int(pooled.size)}
    return _posterior(conditional, prior_density(pooled, config), grids, record)


def anticausal_transfer(train: PairedSample, extra_pairs: PairedSample, config: Dict[str, Any],
                        grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """Shared Y -> X mechanism, target-domain noise and target-domain prior."""
    grids = _grids(train, grids, config)
    fit = fit_conditional_anm([train.swapped(), extra_pairs.swapped()], config)
    alpha = config.get('alpha', 0.05)
    record = {
        'route': 'conditional-anm',
        'flags': ['mechanism_misfit'] if fit.misfit(alpha) else [],
        'p_values': [float(d.independence.p_value) for d in fit.per_dataset],
        'offsets': [float(d.offset) for d in fit.per_dataset],
    }
    conditional = AdditiveConditional(fit.model_for(1), fit.per_dataset[1].noise_density)
    return _posterior(conditional, prior_density(extra_pairs.y, config), grids, record)


def anticausal_concept_drift(train: PairedSample, extra_pairs: PairedSample,
                             config: Dict[str, Any],
                             grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """Refit the Y -> X mechanism on the extra pairs; keep the training noise and prior."""
    grids = _grids(train, grids, config)
    original = fit_anm(train.swapped(), config)
    drifted = fit_anm(extra_pairs.swapped(), config)
    alpha = config.get('alpha', 0.05)
    record = {
        'route': 'anm-refit',
        'flags': ['mechanism_misfit'] if drifted.independence.p_value <= alpha else [],
        'p_value_train': float(original.independence.p_value),
        'p_value_extra': float(drifted.independence.p_value),
    }
    conditional = AdditiveConditional(drifted.model, original.noise_density)
    return _posterior(conditional, prior_density(train.y, config), grids, record)


def anticausal_unpaired_transfer(train: PairedSample, extra: UnpairedSample,
                                 config: Dict[str, Any],
                                 grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """Shared Y -> X mechanism; target noise from the unpaired marginals, target prior."""
    grids = _grids(train, grids, config)
    fit = fit_anm(train.swapped(), config)
    noise, report = noise_from_marginals(fit.model, extra.outputs, extra.inputs, config)
    record = {
        'route': 'marginal-deconvolution',
        'flags': [],
        'validity': report.to_dict(),
        'n_extra_inputs': int(extra.inputs.size),
        'n_extra_outputs': int(extra.outputs.size),
    }
    if not report.is_valid:
        record['flags'].append('suspect_noise_deconvolution')
        logger.warning(f"Target inputs deconvolve poorly by the mechanism image "
                       f"(negative mass {report.negative_mass:.4f}); the noise law is suspect")
    conditional = AdditiveConditional(fit.model, noise)
    return _posterior(conditional, prior_density(extra.outputs, config), grids, record)


def anticausal_ssl_unpaired(train: PairedSample, extra: UnpairedSample, config: Dict[str, Any],
                            grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """Unshifted unpaired data: pool the extra outputs into the prior."""
    predictor = anticausal_ssl_outputs(train, extra.outputs, config, grids)
    return predictor.with_provenance(n_extra_inputs=int(extra.inputs.size))
