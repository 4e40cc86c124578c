"""Conditional representations and the shift diagnosis record."""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional

import numpy as np

from density import Grid, GridDensity, ValidityReport
from errors import InvalidConfig, NonInjectivePhi, NonInvertiblePsi
from regress import RegressionModel

logger = logging.getLogger(__name__)

COLUMN_ATOL = 1e-9
UNDEFINED_MASS = 1e-12


class StochasticMatrix:
    """Column ``j`` holds P(output | input = j)."""

    def __init__(self, entries: Any):
        entries = np.asarray(entries, dtype=float)
        if entries.ndim != 2 or entries.size == 0:
            raise InvalidConfig(f"stochastic matrix must be 2-D, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)) or np.any(entries < 0):
            raise InvalidConfig("stochastic matrix entries must be finite and nonnegative")
        sums = entries.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > COLUMN_ATOL):
            raise InvalidConfig(f"columns must sum to 1, got {sums.tolist()}")
        self.entries = entries

    @property
    def n_out(self) -> int:
        return int(self.entries.shape[0])

    @property
    def n_in(self) -> int:
        return int(self.entries.shape[1])

    def column(self, index: int) -> np.ndarray:
        return self.entries[:, index].copy()

    def __matmul__(self, vector: Any) -> np.ndarray:
        return self.entries @ np.asarray(vector, dtype=float)

    def __repr__(self):
        return f"StochasticMatrix(n_out={self.n_out}, n_in={self.n_in})"


class TabulatedMap:
    """Scalar map given by a table, linearly interpolated between knots."""

    def __init__(self, knots_x: Any, knots_y: Any):
        knots_x = np.asarray(knots_x, dtype=float).reshape(-1)
        knots_y = np.asarray(knots_y, dtype=float).reshape(-1)
        if knots_x.size != knots_y.size or knots_x.size < 2:
            raise InvalidConfig("a tabulated map needs at least two matching knots")
        if np.any(np.diff(knots_x) <= 0):
            raise InvalidConfig("knot abscissae must be strictly increasing")
        self.knots_x = knots_x
        self.knots_y = knots_y

    @classmethod
    def from_function(cls, function: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                      m: int = 2049) -> 'TabulatedMap':
        knots = np.linspace(lo, hi, m)
        return cls(knots, function(knots))

    @property
    def domain(self) -> tuple:
        return float(self.knots_x[0]), float(self.knots_x[-1])

    @property
    def image(self) -> tuple:
        return float(np.min(self.knots_y)), float(np.max(self.knots_y))

    def __call__(self, points: Any) -> np.ndarray:
        return np.interp(np.asarray(points, dtype=float), self.knots_x, self.knots_y)

    def derivative(self, points: Any) -> np.ndarray:
        slopes = np.diff(self.knots_y) / np.diff(self.knots_x)
        index = np.searchsorted(self.knots_x, np.asarray(points, dtype=float), side='right') - 1
        return slopes[np.clip(index, 0, slopes.size - 1)]

    @property
    def increasing(self) -> bool:
        return bool(np.all(np.diff(self.knots_y) > 0))

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.knots_y) < 0))

    def is_strictly_monotone(self) -> bool:
        return self.increasing or self.decreasing

    def inverse(self) -> 'TabulatedMap':
        if self.increasing:
            return TabulatedMap(self.knots_y, self.knots_x)
        if self.decreasing:
            return TabulatedMap(self.knots_y[::-1], self.knots_x[::-1])
        raise NonInjectivePhi("table is not strictly monotone")

    def extended(self, lo: float, hi: float) -> 'TabulatedMap':
        """The map continued linearly with its end slopes so its domain covers [lo, hi]."""
        knots_x, knots_y = self.knots_x, self.knots_y
        if lo < knots_x[0]:
            slope = (knots_y[1] - knots_y[0]) / (knots_x[1] - knots_x[0])
            knots_y = np.concatenate([[knots_y[0] - slope * (knots_x[0] - lo)], knots_y])
            knots_x = np.concatenate([[lo], knots_x])
        if hi > knots_x[-1]:
            slope = (knots_y[-1] - knots_y[-2]) / (knots_x[-1] - knots_x[-2])
            knots_y = np.concatenate([knots_y, [knots_y[-1] + slope * (hi - knots_x[-1])]])
            knots_x = np.concatenate([knots_x, [hi]])
        return TabulatedMap(knots_x, knots_y)


def pushforward(density: GridDensity, mapping: TabulatedMap, grid: Grid) -> GridDensity:
    """Density of ``mapping(T)`` for T ~ ``density``, binned on ``grid``.

    ``mapping`` must be strictly monotone; bin masses come from the CDF of T
    at the preimages of the bin edges.
    """
    inverse = mapping.inverse()
    lo, hi = mapping.image
    edges = np.clip(grid.edges, lo, hi)
    cumulative = density.cdf(inverse(edges))
    if mapping.decreasing:
        cumulative = 1.0 - cumulative
    masses = np.abs(np.diff(cumulative))
    return GridDensity.normalized(grid, masses / grid.step)


class PnlConditional:
    """Post-nonlinear conditional Y = psi(phi(X) + N)."""

    def __init__(self, psi: TabulatedMap, phi: TabulatedMap, noise: GridDensity):
        if not psi.is_strictly_monotone():
            raise NonInvertiblePsi("psi table is not strictly monotone")
        self.psi = psi
        self.phi = phi
        self.noise = noise.recentered()


class AdditiveConditional:
    """P(E | C = c) = noise(e - model(c))."""

    def __init__(self, model: Any, noise: GridDensity):
        self.model = model
        self.noise = noise

    def mechanism(self, points: Any) -> np.ndarray:
        if isinstance(self.model, RegressionModel):
            return self.model.evaluate(points)
        return np.asarray(self.model(np.asarray(points, dtype=float)), dtype=float)

    def table(self, cause_grid: Grid, effect_grid: Grid) -> np.ndarray:
        """Unnormalized rows P(E in bin j | C = center_k) / step, one row per cause bin."""
        location = self.mechanism(cause_grid.centers)
        upper = self.noise.cdf(effect_grid.edges[None, 1:] - location[:, None])
        lower = self.noise.cdf(effect_grid.edges[None, :-1] - location[:, None])
        return np.clip(upper - lower, 0.0, None) / effect_grid.step


class Verdict(str, Enum):
    CAUSE_CHANGED = 'CauseChanged'
    MECHANISM_CHANGED = 'MechanismChanged'
    AMBIGUOUS = 'Ambiguous'
    NO_FIT = 'NoFit'

    @property
    def decided(self) -> bool:
        return self in (Verdict.CAUSE_CHANGED, Verdict.MECHANISM_CHANGED)


def verdict_for(cause_valid: bool, mechanism_valid: bool) -> Verdict:
    if cause_valid and mechanism_valid:
        return Verdict.AMBIGUOUS
    if cause_valid:
        return Verdict.CAUSE_CHANGED
    if mechanism_valid:
        return Verdict.MECHANISM_CHANGED
    return Verdict.NO_FIT


@dataclass(frozen=True, eq=False)
class ShiftDiagnosis:
    """Which factor of P(C, E) changed.

    ``cause_branch`` validates the new effect distribution deconvolved by the
    training noise (a candidate new P(phi(C))); ``mechanism_branch`` validates
    it deconvolved by the training P(phi(C)) (a candidate new noise), which
    must additionally be centered.
    """

    verdict: Verdict
    cause_branch: ValidityReport
    mechanism_branch: ValidityReport
    recovered: Optional[GridDensity] = None
    noise_mean_offset: float = 0.0
    mean_tolerance: float = float('inf')
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def mechanism_centered(self) -> bool:
        return abs(self.noise_mean_offset) <= self.mean_tolerance

    @classmethod
    def from_reports(cls, cause_branch: ValidityReport, mechanism_branch: ValidityReport,
                     cause_candidate: Optional[GridDensity] = None,
                     mechanism_candidate: Optional[GridDensity] = None,
                     noise_mean_offset: float = 0.0,
                     mean_tolerance: float = float('inf'),
                     details: Optional[Dict[str, Any]] = None) -> 'ShiftDiagnosis':
        centered = abs(noise_mean_offset) <= mean_tolerance
        verdict = verdict_for(cause_branch.is_valid, mechanism_branch.is_valid and centered)
        recovered = None
        if verdict == Verdict.CAUSE_CHANGED:
            recovered = cause_candidate
        elif verdict == Verdict.MECHANISM_CHANGED:
            recovered = mechanism_candidate
        return cls(verdict, cause_branch, mechanism_branch, recovered, float(noise_mean_offset),
                   float(mean_tolerance), dict(details or {}))

    def to_dict(self) -> Dict[str, Any]:
        record = {
            'verdict': self.verdict.value,
            'cause_branch': self.cause_branch.to_dict(),
            'mechanism_branch': self.mechanism_branch.to_dict(),
            'noise_mean_offset': float(self.noise_mean_offset),
            'mean_tolerance': float(self.mean_tolerance),
            'mechanism_centered': bool(self.mechanism_centered),
        }
        record.update(self.details)
        return record
