"""Checking a causal model against extra unlabeled inputs through the marginal it implies."""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Union

import numpy as np

from causal.base import AdditiveConditional, StochasticMatrix
from density import (
    Grid,
    GridDensity,
    calibrate_tolerance,
    convolve,
    gaussian_kernel,
    kde,
    l1_distance,
    silverman_bandwidth,
)
from errors import DimensionMismatch, EmptySample, InvalidGrid, TypeMismatch
from samples import as_sample

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConsistencyResult:
    distance: float
    consistent: bool
    threshold: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'distance': float(self.distance),
            'consistent': bool(self.consistent),
            'threshold': float(self.threshold),
        }


def implied_marginal(conditional: Union[StochasticMatrix, AdditiveConditional],
                     prior: Union[np.ndarray, GridDensity],
                     grid: Optional[Grid] = None) -> Union[np.ndarray, GridDensity]:
    """Integrate P(X | Y) against P(Y).

    Discrete: the matrix-vector product. Continuous: the mixture of noise
    densities centered at the mechanism image of each prior bin, on ``grid``.
    """
    if isinstance(conditional, StochasticMatrix):
        if isinstance(prior, GridDensity):
            raise TypeMismatch("a stochastic matrix needs a probability vector prior")
        return conditional @ prior
    if isinstance(conditional, AdditiveConditional):
        if not isinstance(prior, GridDensity):
            raise TypeMismatch("an additive conditional needs a grid density prior")
        if grid is None:
            raise InvalidGrid("a target grid is required for a continuous implied marginal")
        rows = conditional.table(prior.grid, grid)
        return GridDensity.normalized(grid, prior.masses @ rows)
    raise TypeMismatch(f"unsupported conditional type {type(conditional).__name__}")


def _implied_grid(conditional: AdditiveConditional, prior: GridDensity, extra: np.ndarray,
                  bandwidth: float, m: int) -> Grid:
    images = conditional.mechanism(prior.grid.centers[prior.values > 0])
    noise_lo, noise_hi = conditional.noise.support()
    lo = min(float(np.min(images)) + noise_lo, float(np.min(extra))) - 4.0 * bandwidth
    hi = max(float(np.max(images)) + noise_hi, float(np.max(extra))) + 4.0 * bandwidth
    return Grid(lo, hi, m)


def _smoothed(density: GridDensity, bandwidth: float) -> GridDensity:
    """``density`` convolved with N(0, bandwidth^2), back on the original grid."""
    return convolve(density, gaussian_kernel(density.step, bandwidth)).regrid(density.grid)


def marginal_consistency_check(conditional: Union[StochasticMatrix, AdditiveConditional],
                               prior: Union[np.ndarray, GridDensity], extra_inputs: Any,
                               config: Optional[Dict[str, Any]] = None) -> ConsistencyResult:
    """Compare the model-implied input marginal with extra observed inputs.

    The threshold is the upper quantile of the same distance for samples of
    equal size drawn from the implied marginal itself.
    """
    config = config or {}
    n_bootstrap = int(config.get('n_bootstrap', 200))
    quantile = config.get('null_quantile', 0.95)
    rng = np.random.default_rng([int(config.get('seed', 0)), 3])

    if isinstance(conditional, StochasticMatrix):
        if isinstance(prior, GridDensity):
            raise TypeMismatch("a stochastic matrix needs a probability vector prior")
        labels = np.asarray(extra_inputs).reshape(-1).astype(int)
        if labels.size == 0:
            raise EmptySample("no extra inputs to check against")
        if np.any(labels < 0) or np.any(labels >= conditional.n_out):
            raise DimensionMismatch(
                f"labels must lie in [0, {conditional.n_out}), got range "
                f"[{labels.min()}, {labels.max()}]"
            )
        implied = implied_marginal(conditional, np.asarray(prior, dtype=float))
        observed = np.bincount(labels, minlength=conditional.n_out)
        distance = float(np.sum(np.abs(observed / labels.size - implied)))
        null = [
            np.sum(np.abs(rng.multinomial(labels.size, implied) / labels.size - implied))
            for _ in range(n_bootstrap)
        ]
    elif isinstance(conditional, AdditiveConditional):
        if not isinstance(prior, GridDensity):
            raise TypeMismatch("an additive conditional needs a grid density prior")
        extra = as_sample(extra_inputs)
        if extra.size == 0:
            raise EmptySample("no extra inputs to check against")
        bandwidth = silverman_bandwidth(extra)
        grid = _implied_grid(conditional, prior, extra, bandwidth, int(config.get('grid_m', 512)))
        implied = implied_marginal(conditional, prior, grid)
        reference = _smoothed(implied, bandwidth)
        distance = l1_distance(kde(extra, grid, bandwidth), reference)
        null = [
            l1_distance(kde(implied.sample(rng, extra.size), grid, bandwidth), reference)
            for _ in range(n_bootstrap)
        ]
    else:
        raise TypeMismatch(f"unsupported conditional type {type(conditional).__name__}")

    threshold = calibrate_tolerance(null, quantile)
    result = ConsistencyResult(distance, distance <= threshold, threshold)
    logger.info(
        f"Marginal consistency: distance {distance:.4f}, threshold {threshold:.4f}, "
        f"consistent={result.consistent}"
    )
    return result
