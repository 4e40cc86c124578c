"""Kernel ridge regression of effect on cause."""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
from scipy import linalg

from dependence import gaussian_gram, median_bandwidth
from errors import DegenerateInput, InvalidConfig, ShapeMismatch, TooFewSamples
from samples import PairedSample, as_sample

logger = logging.getLogger(__name__)

AUTO = 'auto'
MIN_SAMPLES = 10
RIDGE_LADDER = (1e-4, 1e-3, 1e-2, 1e-1)
N_FOLDS = 5


@dataclass(frozen=True, eq=False)
class RegressionModel:
    """phi(t) = sum_j coefficients[j] * k(t, inputs[j]) + intercept."""

    inputs: np.ndarray
    coefficients: np.ndarray
    bandwidth: float
    ridge: float
    intercept: float

    def __post_init__(self):
        inputs = as_sample(self.inputs)
        coefficients = as_sample(self.coefficients)
        if inputs.size != coefficients.size:
            raise ShapeMismatch(
                f"{coefficients.size} coefficients for {inputs.size} inputs"
            )
        if not self.bandwidth > 0:
            raise InvalidConfig(f"bandwidth must be positive, got {self.bandwidth}")
        object.__setattr__(self, 'inputs', inputs)
        object.__setattr__(self, 'coefficients', coefficients)

    def evaluate(self, points: Any) -> np.ndarray:
        points = as_sample(points)
        gram = gaussian_gram(points, self.inputs, self.bandwidth)
        return gram @ self.coefficients + self.intercept

    def __call__(self, points: Any) -> np.ndarray:
        return self.evaluate(points)

    def shifted(self, offset: float) -> 'RegressionModel':
        """The same function plus a constant."""
        return RegressionModel(self.inputs, self.coefficients, self.bandwidth, self.ridge,
                               self.intercept + offset)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'version': 1,
            'bandwidth': float(self.bandwidth),
            'ridge': float(self.ridge),
            'intercept': float(self.intercept),
            'inputs': self.inputs.tolist(),
            'coefficients': self.coefficients.tolist(),
        }

    @classmethod
    def from_dict(cls, record: Dict[str, Any]) -> 'RegressionModel':
        return cls(
            inputs=np.asarray(record['inputs'], dtype=float),
            coefficients=np.asarray(record['coefficients'], dtype=float),
            bandwidth=float(record['bandwidth']),
            ridge=float(record['ridge']),
            intercept=float(record['intercept']),
        )


def evaluate(model: RegressionModel, points: Any) -> np.ndarray:
    return model.evaluate(points)


def solve_coefficients(gram: np.ndarray, targets: np.ndarray, ridge: float):
    """Penalized least squares with an unpenalized intercept.

    Minimizes ||y - K a - b||^2 + ridge * a'Ka. With P the centering matrix
    the coefficients solve (P K + ridge I) a = P y and b = mean(y - K a).
    """
    n = targets.size
    centered_targets = targets - targets.mean()
    system = gram - gram.mean(axis=0, keepdims=True) + ridge * np.eye(n)
    try:
        coefficients = linalg.solve(system, centered_targets, check_finite=False)
    except (linalg.LinAlgError, ValueError):
        coefficients = linalg.lstsq(system, centered_targets)[0]
    intercept = float(np.mean(targets - gram @ coefficients))
    return coefficients, intercept


def rank_folds(x: np.ndarray, y: np.ndarray, n_folds: int = N_FOLDS) -> np.ndarray:
    """Fold labels assigned by the rank of each pair in (x, y) order."""
    folds = np.empty(x.size, dtype=int)
    folds[np.lexsort((y, x))] = np.arange(x.size) % n_folds
    return folds


def cross_validated_ridge(gram: np.ndarray, targets: np.ndarray,
                          ladder: Sequence[float] = RIDGE_LADDER,
                          folds: Optional[np.ndarray] = None) -> float:
    """Pick ``factor * n`` from the ladder by deterministic 5-fold CV on squared error.

    Without explicit ``folds`` the labels follow the sample order.
    """
    n = targets.size
    if folds is None:
        folds = np.arange(n) % N_FOLDS
    best_ridge, best_error = None, np.inf
    for factor in ladder:
        ridge = factor * n
        error = 0.0
        for fold in range(N_FOLDS):
            held = folds == fold
            kept = ~held
            if not np.any(held) or np.sum(kept) < 2:
                continue
            coefficients, intercept = solve_coefficients(gram[np.ix_(kept, kept)],
                                                         targets[kept], ridge)
            predicted = gram[np.ix_(held, kept)] @ coefficients + intercept
            error += float(np.sum((targets[held] - predicted) ** 2))
        logger.debug(f"ridge {ridge:.4g}: CV squared error {error:.6g}")
        if error < best_error:
            best_ridge, best_error = ridge, error
    return float(best_ridge)


def fit_krr(pairs: PairedSample, bandwidth: Union[float, str] = AUTO,
            ridge: Union[float, str] = AUTO) -> RegressionModel:
    """Fit phi by Gaussian-kernel ridge regression of ``pairs.y`` on ``pairs.x``.

    Residuals ``y - phi(x)`` have sample mean zero.
    """
    if pairs.n < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {pairs.n}")
    if np.ptp(pairs.x) == 0:
        raise DegenerateInput("all causes are identical")

    if bandwidth is None or bandwidth == AUTO:
        bandwidth = median_bandwidth(pairs.x)
    gram = gaussian_gram(pairs.x, pairs.x, float(bandwidth))
    if ridge is None or ridge == AUTO:
        ridge = cross_validated_ridge(gram, pairs.y, folds=rank_folds(pairs.x, pairs.y))
    ridge = float(ridge)
    if ridge < 0:
        raise InvalidConfig(f"ridge must be nonnegative, got {ridge}")

    coefficients, intercept = solve_coefficients(gram, pairs.y, ridge)
    logger.debug(f"KRR fit: n={pairs.n}, bandwidth={float(bandwidth):.4g}, ridge={ridge:.4g}")
    return RegressionModel(pairs.x.copy(), coefficients, float(bandwidth), ridge, intercept)
