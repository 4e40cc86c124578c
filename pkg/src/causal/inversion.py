"""Recovering an input distribution from an output distribution through an injective conditional."""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy import optimize

from causal.base import PnlConditional, StochasticMatrix, TabulatedMap, pushforward
from density import Grid, GridDensity, clip_to_density, deconvolve, validity
from errors import (
    DimensionMismatch,
    InvalidDeconvolution,
    NonInjectivePhi,
    NonInvertiblePsi,
    RankDeficient,
)

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-10
SUM_WEIGHT = 1.0
DECONVOLUTION_REG = 1e-6
VALIDITY_TOLERANCE = 0.05


@dataclass(frozen=True, eq=False)
class InversionResult:
    distribution: np.ndarray
    residual_l1: float


def invert_matrix_conditional(matrix: StochasticMatrix, q: Any) -> InversionResult:
    """Solve M p = q over the probability simplex."""
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != matrix.n_out:
        raise DimensionMismatch(f"q has {q.size} entries, matrix has {matrix.n_out} rows")
    if matrix.n_in > matrix.n_out:
        raise DimensionMismatch(
            f"{matrix.n_in} inputs cannot be recovered from {matrix.n_out} outputs"
        )
    singular = np.linalg.svd(matrix.entries, compute_uv=False)
    rank = int(np.sum(singular > RANK_RTOL * singular[0]))
    if rank < matrix.n_in:
        raise RankDeficient(f"matrix has rank {rank}, needs full column rank {matrix.n_in}")

    # the appended row enforces sum(p) = 1 alongside p >= 0
    system = np.vstack([matrix.entries, SUM_WEIGHT * np.ones(matrix.n_in)])
    target = np.concatenate([q, [SUM_WEIGHT]])
    p, _ = optimize.nnls(system, target)
    total = p.sum()
    if total > 0:
        p = p / total
    residual = float(np.sum(np.abs(matrix.entries @ p - q)))
    return InversionResult(p, residual)


def _change_of_variables(density: GridDensity, mapping: TabulatedMap, m: int) -> GridDensity:
    """Density of ``mapping(T)`` on a grid spanning the image of the density's support."""
    lo, hi = density.support()
    domain_lo, domain_hi = mapping.domain
    lo, hi = max(lo, domain_lo), min(hi, domain_hi)
    if not hi > lo:
        raise NonInjectivePhi("support falls outside the tabulated map's domain")
    ends = mapping(np.array([lo, hi]))
    grid = Grid(float(np.min(ends)), float(np.max(ends)), m)
    return pushforward(density, mapping, grid)


def invert_pnl_conditional(cond: PnlConditional, q: GridDensity,
                           config: Optional[Dict[str, Any]] = None) -> GridDensity:
    """Recover P(X) from P(Y) for Y = psi(phi(X) + N).

    The noise is removed with ``deconvolution_reg`` and the result must pass
    ``validity`` at ``validity_tolerance``.
    """
    config = config or {}
    reg = float(config.get('deconvolution_reg', DECONVOLUTION_REG))
    tolerance = float(config.get('validity_tolerance', VALIDITY_TOLERANCE))
    if not cond.psi.is_strictly_monotone():
        raise NonInvertiblePsi("psi table is not strictly monotone")
    if not cond.phi.is_strictly_monotone():
        raise NonInjectivePhi("phi table is not strictly monotone on its domain")

    image_lo, image_hi = cond.psi.image
    q_lo, q_hi = q.support()
    if q_lo < image_lo - q.step or q_hi > image_hi + q.step:
        raise NonInvertiblePsi(
            f"q is supported on [{q_lo:.4g}, {q_hi:.4g}] beyond psi's range "
            f"[{image_lo:.4g}, {image_hi:.4g}]"
        )

    # step (i): undo psi
    inner = _change_of_variables(q, cond.psi.inverse(), q.grid.m)

    # step (ii): remove the noise
    noise_grid = Grid.from_step(
        cond.noise.grid.lo, inner.step,
        max(int(np.ceil((cond.noise.grid.hi - cond.noise.grid.lo) / inner.step)), 8),
    )
    noise = cond.noise.regrid(noise_grid)
    raw = deconvolve(inner, noise, reg)
    report = validity(raw, tolerance)
    if not report.is_valid:
        raise InvalidDeconvolution(
            f"noise removal left negative mass {report.negative_mass:.4f} "
            f"(tolerance {tolerance})"
        )
    mechanism_density, clipped = clip_to_density(raw)
    logger.debug(f"PNL inversion: clipped mass {clipped:.3g}")

    # step (iii): undo phi
    return _change_of_variables(mechanism_density, cond.phi.inverse(), q.grid.m)
