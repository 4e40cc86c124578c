"""Additive noise models: fitting, direction inference and the shared-mechanism fit."""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from density import GridDensity, auto_grid, kde, silverman_bandwidth
from dependence import (
    HsicResult,
    centered_gram,
    gaussian_gram,
    hsic_test,
    median_bandwidth,
)
from errors import NonFiniteObjective, TooFewDatasets, TooFewSamples
from regress import RegressionModel, fit_krr
from samples import PairedSample

logger = logging.getLogger(__name__)

MIN_SAMPLES = 20


class Direction(str, Enum):
    X_TO_Y = 'X_to_Y'
    Y_TO_X = 'Y_to_X'
    UNDECIDED = 'Undecided'


@dataclass(frozen=True, eq=False)
class AnmFit:
    model: RegressionModel
    residuals: np.ndarray
    independence: HsicResult
    noise_density: GridDensity

    def to_dict(self) -> Dict[str, Any]:
        return {
            'version': 1,
            'model': self.model.to_dict(),
            'residuals': self.residuals.tolist(),
            'independence': self.independence.to_dict(),
            'noise_density': self.noise_density.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class DirectionVerdict:
    direction: Direction
    forward: AnmFit
    backward: AnmFit
    alpha: float

    @classmethod
    def from_fits(cls, forward: AnmFit, backward: AnmFit, alpha: float) -> 'DirectionVerdict':
        forward_ok = forward.independence.p_value > alpha
        backward_ok = backward.independence.p_value > alpha
        if forward_ok and not backward_ok:
            direction = Direction.X_TO_Y
        elif backward_ok and not forward_ok:
            direction = Direction.Y_TO_X
        else:
            direction = Direction.UNDECIDED
        return cls(direction, forward, backward, alpha)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'direction': self.direction.value,
            'alpha': float(self.alpha),
            'forward': self.forward.independence.to_dict(),
            'backward': self.backward.independence.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class DatasetDiagnostics:
    offset: float
    residuals: np.ndarray
    independence: HsicResult
    noise_density: GridDensity

    def to_dict(self) -> Dict[str, Any]:
        return {
            'offset': float(self.offset),
            'residuals': self.residuals.tolist(),
            'independence': self.independence.to_dict(),
            'noise_density': self.noise_density.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class ConditionalAnmFit:
    model: RegressionModel
    per_dataset: List[DatasetDiagnostics]
    objective_trace: List[float] = field(default_factory=list)
    baseline: float = 0.0

    def model_for(self, index: int) -> RegressionModel:
        """Shared mechanism plus the constant of dataset ``index``."""
        return self.model.shifted(self.baseline + self.per_dataset[index].offset)

    def misfit(self, alpha: float) -> bool:
        return any(d.independence.p_value <= alpha for d in self.per_dataset)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'version': 1,
            'model': self.model.to_dict(),
            'per_dataset': [d.to_dict() for d in self.per_dataset],
            'objective_trace': [float(v) for v in self.objective_trace],
            'baseline': float(self.baseline),
        }


def noise_density_of(residuals: np.ndarray, config: Dict[str, Any]) -> GridDensity:
    """KDE of residuals on an automatically sized grid."""
    pad = config.get('kde_pad', 3.0)
    bandwidth = silverman_bandwidth(residuals)
    grid = auto_grid(residuals, bandwidth, config.get('grid_m', 512), pad)
    return kde(residuals, grid, bandwidth, pad)


def _independence(causes: np.ndarray, residuals: np.ndarray,
                  config: Dict[str, Any]) -> HsicResult:
    return hsic_test(
        causes,
        residuals,
        n_permutations=config.get('n_permutations', 199),
        seed=config.get('seed', 0),
        workers=config.get('hsic_workers'),
    )


def fit_anm(pairs: PairedSample, config: Optional[Dict[str, Any]] = None) -> AnmFit:
    """Regress y on x, then test the residuals for independence of x.

    The fit never rejects by itself; callers read ``independence.p_value``.
    """
    config = config or {}
    if pairs.n < MIN_SAMPLES:
        raise TooFewSamples(f"ANM fit needs at least {MIN_SAMPLES} pairs, got {pairs.n}")

    model = fit_krr(pairs, config.get('bandwidth', 'auto'), config.get('ridge', 'auto'))
    residuals = pairs.y - model.evaluate(pairs.x)
    offset = float(np.mean(residuals))
    if offset != 0.0:
        model = model.shifted(offset)
        residuals = residuals - offset

    independence = _independence(pairs.x, residuals, config)
    logger.info(f"ANM fit on {pairs.n} pairs: HSIC p-value {independence.p_value:.4f}")
    return AnmFit(model, residuals, independence, noise_density_of(residuals, config))


def infer_direction(pairs: PairedSample, alpha: float,
                    config: Optional[Dict[str, Any]] = None) -> DirectionVerdict:
    """Fit an ANM both ways and keep the direction whose residuals alone look independent."""
    config = config or {}
    forward = fit_anm(pairs, config)
    backward = fit_anm(pairs.swapped(), config)
    verdict = DirectionVerdict.from_fits(forward, backward, alpha)
    logger.info(
        f"Direction {verdict.direction.value}: p(X->Y)={forward.independence.p_value:.4f}, "
        f"p(Y->X)={backward.independence.p_value:.4f}, alpha={alpha}"
    )
    return verdict


class ConditionalAnmObjective:
    """Sum of per-dataset HSIC(cause, residual) plus a kernel-norm penalty.

    The mechanism is ``K(., pooled causes) @ alpha`` up to per-dataset
    constants, which HSIC ignores. Kernel bandwidths are fixed at
    construction.
    """

    def __init__(self, datasets: Sequence[PairedSample], model_bandwidth: float,
                 residual_bandwidths: Sequence[float], weight: float):
        self.datasets = list(datasets)
        self.pooled_causes = np.concatenate([d.x for d in self.datasets])
        self.gram = gaussian_gram(self.pooled_causes, self.pooled_causes, model_bandwidth)
        self.cross_grams = [
            gaussian_gram(d.x, self.pooled_causes, model_bandwidth) for d in self.datasets
        ]
        self.centered_cause_grams = [
            centered_gram(gaussian_gram(d.x, d.x, median_bandwidth(d.x))) for d in self.datasets
        ]
        self.residual_bandwidths = [float(b) for b in residual_bandwidths]
        self.weight = float(weight)

    def residuals(self, coefficients: np.ndarray) -> List[np.ndarray]:
        return [d.y - k @ coefficients for d, k in zip(self.datasets, self.cross_grams)]

    def hsic_terms(self, coefficients: np.ndarray) -> List[float]:
        terms = []
        for residual, centered, width in zip(self.residuals(coefficients),
                                             self.centered_cause_grams,
                                             self.residual_bandwidths):
            n = residual.size
            gram = gaussian_gram(residual, residual, width)
            terms.append(float(np.sum(centered * gram)) / (n * n))
        return terms

    def penalty(self, coefficients: np.ndarray) -> float:
        return float(coefficients @ self.gram @ coefficients)

    def value(self, coefficients: np.ndarray) -> float:
        return sum(self.hsic_terms(coefficients)) + self.weight * self.penalty(coefficients)

    def gradient(self, coefficients: np.ndarray) -> np.ndarray:
        grad = 2.0 * self.weight * (self.gram @ coefficients)
        for residual, centered, width, cross in zip(self.residuals(coefficients),
                                                    self.centered_cause_grams,
                                                    self.residual_bandwidths,
                                                    self.cross_grams):
            n = residual.size
            weights = centered * gaussian_gram(residual, residual, width)
            # d HSIC / d r_i = -2/(n^2 s^2) * (r_i * sum_j W_ij - sum_j W_ij r_j)
            d_residual = -(2.0 / (n * n * width * width)) * (
                residual * weights.sum(axis=1) - weights @ residual
            )
            grad -= cross.T @ d_residual
        return grad


def _descend(objective: ConditionalAnmObjective, start: np.ndarray,
             config: Dict[str, Any]) -> tuple:
    """Gradient descent with Armijo backtracking; the trace holds accepted values only."""
    max_iterations = int(config.get('max_iterations', 500))
    relative_tolerance = float(config.get('relative_tolerance', 1e-6))

    coefficients = start.copy()
    current = objective.value(coefficients)
    if not np.isfinite(current):
        raise NonFiniteObjective(f"objective is {current} at the initial fit")
    trace = [current]
    step = None

    for iteration in range(max_iterations):
        grad = objective.gradient(coefficients)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteObjective(f"gradient became non-finite at iteration {iteration}")
        norm_sq = float(grad @ grad)
        if norm_sq == 0.0:
            break
        if step is None:
            step = 0.1 * max(float(np.linalg.norm(coefficients)), 1e-3) / np.sqrt(norm_sq)

        accepted = False
        while step > 1e-20:
            candidate = coefficients - step * grad
            value = objective.value(candidate)
            if np.isfinite(value) and value <= current - 1e-4 * step * norm_sq:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            logger.debug(f"Line search stalled at iteration {iteration}")
            break

        decrease = (current - value) / max(abs(current), 1e-300)
        coefficients, current = candidate, value
        trace.append(current)
        step *= 2.0
        if decrease < relative_tolerance:
            break

    logger.debug(f"Conditional ANM descent: {len(trace) - 1} steps, objective {current:.6g}")
    return coefficients, trace


def _unique_datasets(datasets: Sequence[PairedSample]) -> List[int]:
    """Index of the first identical dataset for each input dataset."""
    owners = []
    for i, dataset in enumerate(datasets):
        owner = next((j for j in range(i) if datasets[j].same_draws(dataset)), i)
        owners.append(owner)
    return owners


def _canonical_key(dataset: PairedSample):
    """Sort key that depends on the draws only, never on list position."""
    order = np.lexsort((dataset.y, dataset.x))
    return dataset.n, np.column_stack([dataset.x[order], dataset.y[order]]).tobytes()


def _diagnostics(datasets: Sequence[PairedSample], model: RegressionModel,
                 config: Dict[str, Any]) -> List[DatasetDiagnostics]:
    """Diagnostics with offsets relative to the model's own constant."""
    diagnostics = []
    for dataset in datasets:
        raw = dataset.y - model.evaluate(dataset.x)
        residuals = raw - np.mean(raw)
        diagnostics.append(DatasetDiagnostics(
            offset=float(np.mean(raw)),
            residuals=residuals,
            independence=_independence(dataset.x, residuals, config),
            noise_density=noise_density_of(residuals, config),
        ))
    return diagnostics


def fit_conditional_anm(datasets: Sequence[PairedSample],
                        config: Optional[Dict[str, Any]] = None) -> ConditionalAnmFit:
    """One mechanism shared by several datasets, each with its own noise.

    Residual independence is enforced separately per dataset. The datasets
    are fitted in a canonical order and the shared mechanism's constant is
    the pooled residual mean, so reordering the inputs reorders
    ``per_dataset`` and nothing else. Offsets are reported relative to the
    first input dataset, whose offset is zero; ``baseline`` holds that
    dataset's own constant.
    """
    config = config or {}
    datasets = list(datasets)
    if len(datasets) < 2:
        raise TooFewDatasets(f"need at least 2 datasets, got {len(datasets)}")
    for index, dataset in enumerate(datasets):
        if dataset.n < MIN_SAMPLES:
            raise TooFewSamples(
                f"dataset {index} needs at least {MIN_SAMPLES} pairs, got {dataset.n}"
            )

    owners = _unique_datasets(datasets)
    ordered = sorted(set(owners), key=lambda i: _canonical_key(datasets[i]))
    distinct = [datasets[i] for i in ordered]
    if len(distinct) == 1:
        logger.info("All datasets are identical; using the single-dataset ANM fit")
        single = fit_anm(distinct[0], config)
        per_dataset = [
            DatasetDiagnostics(0.0, single.residuals, single.independence, single.noise_density)
            for _ in datasets
        ]
        return ConditionalAnmFit(single.model, per_dataset, [])

    pooled = PairedSample(np.concatenate([d.x for d in distinct]),
                          np.concatenate([d.y for d in distinct]))
    initial = fit_krr(pooled, config.get('bandwidth', 'auto'), config.get('ridge', 'auto'))

    start_residuals = [d.y - initial.evaluate(d.x) for d in distinct]
    residual_bandwidths = [median_bandwidth(r) for r in start_residuals]
    objective = ConditionalAnmObjective(distinct, initial.bandwidth, residual_bandwidths, 0.0)
    start = initial.coefficients
    hsic_start = sum(objective.hsic_terms(start))
    norm_start = objective.penalty(start)
    ratio = float(config.get('penalty_ratio', 0.1))
    objective.weight = ratio * hsic_start / norm_start if norm_start > 0 else 0.0

    coefficients, trace = _descend(objective, start, config)

    fitted = np.concatenate([gram @ coefficients for gram in objective.cross_grams])
    intercept = float(np.mean(pooled.y - fitted))
    model = RegressionModel(pooled.x, coefficients, initial.bandwidth, initial.ridge, intercept)
    per_distinct = _diagnostics(distinct, model, config)
    lookup = {owner: per_distinct[k] for k, owner in enumerate(ordered)}
    baseline = lookup[owners[0]].offset
    per_dataset = [replace(lookup[owner], offset=lookup[owner].offset - baseline)
                   for owner in owners]

    logger.info(
        f"Conditional ANM over {len(datasets)} datasets: objective "
        f"{trace[0]:.4g} -> {trace[-1]:.4g}, p-values "
        f"{[round(d.independence.p_value, 4) for d in per_dataset]}"
    )
    return ConditionalAnmFit(model, per_dataset, trace, baseline)
