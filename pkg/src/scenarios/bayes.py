"""Posterior P'(Y | X) from a causal conditional P(X | Y) and a new prior P'(Y)."""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Union

import numpy as np

from causal.base import UNDEFINED_MASS, StochasticMatrix
from density import GridDensity
from errors import ShapeMismatch
from scenarios.base import ConditionalPredictor

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DiscretePosterior:
    """Row ``x`` holds P'(Y | X = x); undefined rows are NaN."""

    table: np.ndarray
    undefined: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {
            'table': [[None if np.isnan(v) else float(v) for v in row] for row in self.table],
            'undefined': [bool(u) for u in self.undefined],
        }


def _discrete(matrix: StochasticMatrix, prior: Any) -> DiscretePosterior:
    prior = np.asarray(prior, dtype=float).reshape(-1)
    if prior.size != matrix.n_in:
        raise ShapeMismatch(f"prior has {prior.size} entries, matrix has {matrix.n_in} columns")
    joint = matrix.entries * prior[None, :]
    evidence = joint.sum(axis=1)
    undefined = ~(evidence >= UNDEFINED_MASS)
    table = np.full(joint.shape, np.nan)
    table[~undefined] = joint[~undefined] / evidence[~undefined, None]
    if np.any(undefined):
        logger.warning(f"{int(undefined.sum())} inputs have zero evidence")
    return DiscretePosterior(table, undefined)


def _continuous(causal: ConditionalPredictor, prior: GridDensity) -> ConditionalPredictor:
    # causal rows run over the output (cause) grid, columns over the input grid
    cause_grid = causal.x_grid
    weights = np.diff(prior.cdf(cause_grid.edges))
    likelihood = np.nan_to_num(causal.density, nan=0.0)
    joint = likelihood * weights[:, None]
    provenance = {'prior_mass_on_grid': float(weights.sum())}
    return ConditionalPredictor.from_table(causal.y_grid, cause_grid, joint.T / cause_grid.step,
                                           provenance)


def bayes_reweight(p_x_given_y: Union[StochasticMatrix, ConditionalPredictor],
                   p_y_new: Union[np.ndarray, GridDensity]):
    """Combine an invariant P(X | Y) with a new P'(Y) and normalize over y per input."""
    if isinstance(p_x_given_y, StochasticMatrix):
        if isinstance(p_y_new, GridDensity):
            raise ShapeMismatch("a stochastic matrix needs a probability vector prior")
        return _discrete(p_x_given_y, p_y_new)
    if isinstance(p_x_given_y, ConditionalPredictor):
        if not isinstance(p_y_new, GridDensity):
            raise ShapeMismatch("a tabulated conditional needs a grid density prior")
        return _continuous(p_x_given_y, p_y_new)
    raise ShapeMismatch(f"unsupported conditional type {type(p_x_given_y).__name__}")
