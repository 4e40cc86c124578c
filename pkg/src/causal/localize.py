"""Which factor of P(C, E) changed, and the re-estimated mechanism noise."""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from anm import AnmFit, fit_anm
from causal.base import ShiftDiagnosis
from density import (
    GridDensity,
    SignedGridFn,
    ValidityReport,
    aligned_grid,
    calibrate_tolerance,
    clip_to_density,
    convolve,
    deconvolve,
    kde,
    l1_distance,
    silverman_bandwidth,
    validity,
)
from errors import AnmMisfit, InvalidDeconvolution, TooFewSamples
from regress import RegressionModel
from samples import PairedSample, as_sample

logger = logging.getLogger(__name__)

MIN_SAMPLES = 20


@dataclass(frozen=True)
class BranchTolerances:
    cause: float
    mechanism: float
    mean: float
    reconstruction: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'cause': float(self.cause),
            'mechanism': float(self.mechanism),
            'mean': float(self.mean),
            'reconstruction': float(self.reconstruction),
        }


@dataclass(frozen=True, eq=False)
class Factorization:
    """Training-side factors of P(E) = P(phi(C)) * P(N_E) on a common bin width."""

    fit: AnmFit
    mechanism_density: GridDensity
    noise_density: GridDensity
    effect_density: GridDensity
    step: float
    smoothing: float


@dataclass(frozen=True, eq=False)
class BranchResult:
    effect_density: GridDensity
    cause_candidate: SignedGridFn
    mechanism_candidate: SignedGridFn


@dataclass(frozen=True, eq=False)
class ShiftAnalysis:
    factorization: Factorization
    branches: BranchResult
    tolerances: BranchTolerances
    diagnosis: ShiftDiagnosis


@dataclass(frozen=True, eq=False)
class CausalConditionalEstimate:
    model: RegressionModel
    new_noise: GridDensity
    report: ValidityReport
    reconstruction_error: float
    reconstruction_threshold: float
    noise_mean_offset: float
    flagged: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'validity': self.report.to_dict(),
            'reconstruction_error': float(self.reconstruction_error),
            'reconstruction_threshold': float(self.reconstruction_threshold),
            'noise_mean_offset': float(self.noise_mean_offset),
            'flagged': bool(self.flagged),
        }


class ShiftLocalizer:
    """Compares a new effect sample against the training ANM factorization.

    Branch tolerances are the upper quantiles of the same statistics computed
    on bootstrap resamples of the training effects at the new sample size.
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.config = config or {}
        self.alpha = self.config.get('alpha', 0.05)
        self.reg = self.config.get('deconvolution_reg', 1e-6)
        self.n_bootstrap = int(self.config.get('n_bootstrap', 200))
        self.quantile = self.config.get('null_quantile', 0.95)
        self.seed = int(self.config.get('seed', 0))
        self.grid_m = int(self.config.get('grid_m', 512))
        self.pad = self.config.get('kde_pad', 3.0)

    def factorize(self, train: PairedSample, new_effects: np.ndarray,
                  fit: Optional[AnmFit] = None) -> Factorization:
        if train.n < MIN_SAMPLES:
            raise TooFewSamples(f"training data needs at least {MIN_SAMPLES} pairs, got {train.n}")
        fit = fit or fit_anm(train, self.config)
        if fit.independence.p_value <= self.alpha:
            raise AnmMisfit(
                f"training residuals depend on the cause (p={fit.independence.p_value:.4f} "
                f"<= alpha={self.alpha})"
            )

        images = fit.model.evaluate(train.x)
        h_phi = silverman_bandwidth(images)
        h_noise = silverman_bandwidth(fit.residuals)
        values = np.concatenate([train.y, images, new_effects])
        step = (float(np.ptp(values)) + 2 * self.pad * max(h_phi, h_noise)) / self.grid_m

        def estimate(samples: np.ndarray, bandwidth: float) -> GridDensity:
            grid = aligned_grid(samples, bandwidth, step, self.pad)
            return kde(samples, grid, bandwidth, self.pad)

        smoothing = max(h_phi, h_noise)
        mechanism_density = estimate(images, h_phi)
        noise_density = estimate(fit.residuals, h_noise)
        effect_density = self.effect_density(train.y, step, smoothing)
        logger.debug(
            f"Factorization: step {step:.4g}, h_phi {h_phi:.4g}, h_noise {h_noise:.4g}"
        )
        return Factorization(fit, mechanism_density, noise_density, effect_density, step,
                             smoothing)

    def effect_density(self, effects: np.ndarray, step: float, smoothing: float) -> GridDensity:
        """KDE widened so both deconvolutions keep a positive residual smoothing."""
        bandwidth = float(np.hypot(silverman_bandwidth(effects), smoothing))
        grid = aligned_grid(effects, bandwidth, step, self.pad)
        return kde(effects, grid, bandwidth, self.pad)

    def branches(self, factorization: Factorization, effects: np.ndarray) -> BranchResult:
        density = self.effect_density(effects, factorization.step, factorization.smoothing)
        return BranchResult(
            effect_density=density,
            cause_candidate=deconvolve(density, factorization.noise_density, self.reg),
            mechanism_candidate=deconvolve(density, factorization.mechanism_density, self.reg),
        )

    def _statistics(self, factorization: Factorization, result: BranchResult) -> tuple:
        cause_negative = validity(result.cause_candidate, 1.0).negative_mass
        mechanism_negative = validity(result.mechanism_candidate, 1.0).negative_mass
        noise, _ = clip_to_density(result.mechanism_candidate)
        reconstruction = l1_distance(convolve(factorization.mechanism_density, noise),
                                     result.effect_density)
        return cause_negative, mechanism_negative, abs(noise.mean()), reconstruction

    def calibrate(self, factorization: Factorization, train: PairedSample,
                  n_new: int) -> BranchTolerances:
        rng = np.random.default_rng([self.seed, n_new])
        draws = []
        for _ in range(self.n_bootstrap):
            resample = train.y[rng.integers(0, train.n, n_new)]
            draws.append(self._statistics(factorization, self.branches(factorization, resample)))
        draws = np.asarray(draws)
        tolerances = BranchTolerances(
            cause=calibrate_tolerance(draws[:, 0], self.quantile),
            mechanism=calibrate_tolerance(draws[:, 1], self.quantile),
            mean=calibrate_tolerance(draws[:, 2], self.quantile),
            reconstruction=calibrate_tolerance(draws[:, 3], self.quantile),
        )
        logger.debug(f"Bootstrap tolerances over {self.n_bootstrap} resamples: {tolerances}")
        return tolerances

    def diagnose(self, train: PairedSample, new_effects: Any,
                 fit: Optional[AnmFit] = None) -> ShiftAnalysis:
        new_effects = as_sample(new_effects)
        if new_effects.size < MIN_SAMPLES:
            raise TooFewSamples(
                f"new effects need at least {MIN_SAMPLES} samples, got {new_effects.size}"
            )
        factorization = self.factorize(train, new_effects, fit)
        tolerances = self.calibrate(factorization, train, new_effects.size)
        result = self.branches(factorization, new_effects)

        cause_report = validity(result.cause_candidate, tolerances.cause)
        mechanism_report = validity(result.mechanism_candidate, tolerances.mechanism)
        cause_density, _ = clip_to_density(result.cause_candidate)
        noise_density, _ = clip_to_density(result.mechanism_candidate)
        diagnosis = ShiftDiagnosis.from_reports(
            cause_report,
            mechanism_report,
            cause_candidate=cause_density,
            mechanism_candidate=noise_density.recentered(),
            noise_mean_offset=noise_density.mean(),
            mean_tolerance=tolerances.mean,
            details={'tolerances': tolerances.to_dict(), 'n_new': int(new_effects.size)},
        )
        log = logger.info if diagnosis.verdict.decided else logger.warning
        log(
            f"Shift verdict {diagnosis.verdict.value}: cause branch negative mass "
            f"{cause_report.negative_mass:.4f} (tol {tolerances.cause:.4f}), mechanism branch "
            f"{mechanism_report.negative_mass:.4f} (tol {tolerances.mechanism:.4f}), "
            f"noise mean {diagnosis.noise_mean_offset:.4f} (tol {tolerances.mean:.4f})"
        )
        return ShiftAnalysis(factorization, result, tolerances, diagnosis)

    def localize_shift(self, train: PairedSample, new_effects: Any,
                       fit: Optional[AnmFit] = None) -> ShiftDiagnosis:
        return self.diagnose(train, new_effects, fit).diagnosis

    def estimate_from(self, analysis: ShiftAnalysis) -> CausalConditionalEstimate:
        """New mechanism noise assuming P(C) stayed fixed."""
        report = analysis.diagnosis.mechanism_branch
        if not report.is_valid:
            raise InvalidDeconvolution(
                f"new effects deconvolved by P(phi(C)) leave negative mass "
                f"{report.negative_mass:.4f} (tolerance {report.tolerance_used:.4f}); "
                f"the cause distribution has likely changed too"
            )
        noise, _ = clip_to_density(analysis.branches.mechanism_candidate)
        reconstruction = l1_distance(
            convolve(analysis.factorization.mechanism_density, noise),
            analysis.branches.effect_density,
        )
        offset = noise.mean()
        flagged = (
            reconstruction > analysis.tolerances.reconstruction
            or abs(offset) > analysis.tolerances.mean
        )
        if flagged:
            logger.warning(
                f"Estimated mechanism noise is suspect: reconvolution error "
                f"{reconstruction:.4f} (threshold {analysis.tolerances.reconstruction:.4f}), "
                f"mean offset {offset:.4f}"
            )
        return CausalConditionalEstimate(
            model=analysis.factorization.fit.model,
            new_noise=noise.recentered(),
            report=report,
            reconstruction_error=reconstruction,
            reconstruction_threshold=analysis.tolerances.reconstruction,
            noise_mean_offset=offset,
            flagged=bool(flagged),
        )

    def estimate_causal_conditional(self, train: PairedSample, new_effects: Any,
                                    fit: Optional[AnmFit] = None) -> CausalConditionalEstimate:
        return self.estimate_from(self.diagnose(train, new_effects, fit))


def localize_shift(train: PairedSample, new_effects: Any,
                   config: Optional[Dict[str, Any]] = None) -> ShiftDiagnosis:
    return ShiftLocalizer(config).localize_shift(train, new_effects)


def estimate_causal_conditional(
    train: PairedSample, new_effects: Any, config: Optional[Dict[str, Any]] = None
) -> CausalConditionalEstimate:
    return ShiftLocalizer(config).estimate_causal_conditional(train, new_effects)

