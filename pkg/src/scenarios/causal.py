"""Adaptation pipelines when the prediction input is the cause."""
import logging
from typing import Any, Dict, Optional

import numpy as np

from anm import fit_anm, fit_conditional_anm
from causal.base import AdditiveConditional, Verdict
from causal.localize import ShiftLocalizer
from density import (
    aligned_grid,
    calibrate_tolerance,
    deconvolve,
    gaussian_kernel,
    kde,
    max_gaussian_deconvolve,
    silverman_bandwidth,
    validity,
)
from samples import PairedSample, as_sample
from scenarios.base import (
    ConditionalPredictor,
    PredictionGrids,
    UnpairedSample,
    additive_predictor,
    baseline_from_fit,
    baseline_predictor,
    noise_from_marginals,
    prediction_grids,
)

logger = logging.getLogger(__name__)


def _grids(train: PairedSample, grids: Optional[PredictionGrids],
           config: Dict[str, Any]) -> PredictionGrids:
    return grids or prediction_grids(train, config=config)


def covariate_shift(train: PairedSample, new_inputs: Any, config: Dict[str, Any],
                    grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """The mechanism does not depend on P(X): keep the trained conditional."""
    predictor = baseline_predictor(train, config, _grids(train, grids, config))
    return predictor.with_provenance(route='pass-through', flags=predictor.flags,
                                     n_extra=int(as_sample(new_inputs).size))


def causal_ssl_inputs(train: PairedSample, extra_inputs: Any, config: Dict[str, Any],
                      grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """Unlabeled causes carry no information about P(Y | X)."""
    predictor = covariate_shift(train, extra_inputs, config, grids)
    return predictor.with_provenance(flags=predictor.flags + ['ssl_no_gain'])


def causal_output_shift(train: PairedSample, new_outputs: Any, config: Dict[str, Any],
                        grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """Decide which factor changed; re-estimate the noise only when the mechanism did."""
    grids = _grids(train, grids, config)
    localizer = ShiftLocalizer(config)
    fit = fit_anm(train, config)
    analysis = localizer.diagnose(train, new_outputs, fit)
    diagnosis = analysis.diagnosis
    record = {'route': 'localize', 'verdict': diagnosis.verdict.value,
              'diagnosis': diagnosis.to_dict(), 'flags': [], 'warnings': []}

    if diagnosis.verdict == Verdict.MECHANISM_CHANGED:
        estimate = localizer.estimate_from(analysis)
        record['estimate'] = estimate.to_dict()
        if estimate.flagged:
            record['flags'].append('reconvolution_mismatch')
        conditional = AdditiveConditional(estimate.model, estimate.new_noise)
        return additive_predictor(conditional, grids, record)

    if diagnosis.verdict != Verdict.CAUSE_CHANGED:
        record['warnings'].append(f"shift localization returned {diagnosis.verdict.value}; "
                                  f"keeping the training conditional")
        logger.warning(record['warnings'][-1])
    return baseline_from_fit(fit, grids, record)


def _gaussian_width_tolerance(fit, train: PairedSample, n_pooled: int, step: float,
                              config: Dict[str, Any]) -> float:
    """Null negative mass for outputs simulated with Gaussian noise of the residual width.

    Each resample is deconvolved by its own total Gaussian width, residual
    noise plus KDE bandwidth.
    """
    sigma = float(np.std(fit.residuals))
    rng = np.random.default_rng([int(config.get('seed', 0)), 2])
    pad = config.get('kde_pad', 3.0)
    reg = config.get('gaussian_reg', 1e-3)
    draws = []
    for _ in range(int(config.get('n_bootstrap', 200))):
        causes = train.x[rng.integers(0, train.n, n_pooled)]
        outputs = fit.model.evaluate(causes) + sigma * rng.standard_normal(n_pooled)
        bandwidth = silverman_bandwidth(outputs)
        density = kde(outputs, aligned_grid(outputs, bandwidth, step, pad), bandwidth, pad)
        kernel = gaussian_kernel(step, float(np.hypot(sigma, bandwidth)))
        draws.append(validity(deconvolve(density, kernel, reg), 1.0).negative_mass)
    return calibrate_tolerance(draws, config.get('null_quantile', 0.95))


def causal_ssl_outputs(train: PairedSample, extra_outputs: Any, config: Dict[str, Any],
                       grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """Identify a Gaussian noise width from the pooled output marginal."""
    extra_outputs = as_sample(extra_outputs)
    grids = _grids(train, grids, config)
    fit = fit_anm(train, config)
    if extra_outputs.size == 0:
        return baseline_from_fit(fit, grids, {'route': 'gaussian-decomposition',
                                              'flags': ['no_extra_outputs']})

    pooled = np.concatenate([train.y, extra_outputs])
    pad = config.get('kde_pad', 3.0)
    bandwidth = silverman_bandwidth(pooled)
    step = (float(np.ptp(pooled)) + 2 * pad * bandwidth) / int(config.get('grid_m', 512))
    density = kde(pooled, aligned_grid(pooled, bandwidth, step, pad), bandwidth, pad)

    tolerance = _gaussian_width_tolerance(fit, train, pooled.size, step, config)
    decomposition = max_gaussian_deconvolve(density, tolerance,
                                            reg=config.get('gaussian_reg', 1e-3))
    sigma_hat = float(np.sqrt(max(decomposition.sigma_max ** 2 - bandwidth ** 2, 0.0)))
    residual_sigma = float(np.std(fit.residuals))
    logger.info(f"Gaussian noise width {sigma_hat:.4f} (residual std {residual_sigma:.4f})")

    flags = []
    mismatch = config.get('noise_width_mismatch', 0.25)
    if residual_sigma > 0 and abs(sigma_hat - residual_sigma) > mismatch * residual_sigma:
        flags.append('noise_width_mismatch')
    record = {
        'route': 'gaussian-decomposition',
        'flags': flags,
        'sigma_hat': sigma_hat,
        'sigma_max': float(decomposition.sigma_max),
        'kde_bandwidth': float(bandwidth),
        'tolerance': float(tolerance),
        'remainder_clipped_mass': float(decomposition.clipped_mass),
        'remainder_std': float(decomposition.remainder.std()),
    }
    noise = gaussian_kernel(max(sigma_hat, grids.y.step) / 8.0, sigma_hat)
    return additive_predictor(AdditiveConditional(fit.model, noise), grids, record)


def causal_transfer(train: PairedSample, extra_pairs: PairedSample, config: Dict[str, Any],
                    grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """Shared mechanism across both datasets, target-domain noise."""
    grids = _grids(train, grids, config)
    fit = fit_conditional_anm([train, extra_pairs], config)
    alpha = config.get('alpha', 0.05)
    record = {
        'route': 'conditional-anm',
        'flags': ['mechanism_misfit'] if fit.misfit(alpha) else [],
        'p_values': [float(d.independence.p_value) for d in fit.per_dataset],
        'offsets': [float(d.offset) for d in fit.per_dataset],
        'iterations': max(len(fit.objective_trace) - 1, 0),
    }
    target = fit.per_dataset[1]
    conditional = AdditiveConditional(fit.model_for(1), target.noise_density)
    return additive_predictor(conditional, grids, record)


def causal_concept_drift(train: PairedSample, extra_pairs: PairedSample, config: Dict[str, Any],
                         grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """New mechanism from the extra pairs, noise law kept from training."""
    grids = _grids(train, grids, config)
    drifted = fit_anm(extra_pairs, config)
    original = fit_anm(train, config)
    alpha = config.get('alpha', 0.05)
    record = {
        'route': 'anm-refit',
        'flags': ['mechanism_misfit'] if drifted.independence.p_value <= alpha else [],
        'p_value_train': float(original.independence.p_value),
        'p_value_extra': float(drifted.independence.p_value),
    }
    conditional = AdditiveConditional(drifted.model, original.noise_density)
    return additive_predictor(conditional, grids, record)


def causal_unpaired_transfer(train: PairedSample, extra: UnpairedSample, config: Dict[str, Any],
                             grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """Shared mechanism; the target noise law is read off unpaired target marginals."""
    grids = _grids(train, grids, config)
    fit = fit_anm(train, config)
    noise, report = noise_from_marginals(fit.model, extra.inputs, extra.outputs, config)
    record = {
        'route': 'marginal-deconvolution',
        'flags': [],
        'validity': report.to_dict(),
        'n_extra_inputs': int(extra.inputs.size),
        'n_extra_outputs': int(extra.outputs.size),
    }
    if not report.is_valid:
        record['flags'].append('suspect_noise_deconvolution')
        logger.warning(f"Target outputs deconvolve poorly by the mechanism image "
                       f"(negative mass {report.negative_mass:.4f}); the noise law is suspect")
    logger.info(f"Target noise std {noise.std():.4f} "
                f"(training residual std {float(np.std(fit.residuals)):.4f})")
    return additive_predictor(AdditiveConditional(fit.model, noise), grids, record)


def causal_ssl_unpaired(train: PairedSample, extra: UnpairedSample, config: Dict[str, Any],
                        grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """Only the unlabeled outputs can help; the unlabeled inputs are ignored."""
    predictor = causal_ssl_outputs(train, extra.outputs, config, grids)
    return predictor.with_provenance(n_extra_inputs=int(extra.inputs.size))
