"""Scenario descriptions, the conditional predictor and the unadapted baseline."""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from anm import AnmFit, fit_anm
from causal.base import UNDEFINED_MASS, AdditiveConditional
from causal.localize import MIN_SAMPLES
from density import (
    Grid,
    GridDensity,
    ValidityReport,
    aligned_grid,
    centered_grid,
    clip_to_density,
    deconvolve,
    kde,
    refine_remainder,
    silverman_bandwidth,
    validity,
)
from errors import DegenerateInput, InvalidScenario, ShapeMismatch, TooFewSamples
from samples import PairedSample, as_sample

logger = logging.getLogger(__name__)


class Direction(str, Enum):
    """Whether the prediction input X is the cause or the effect."""

    CAUSAL = 'causal'
    ANTICAUSAL = 'anticausal'


class ExtraKind(str, Enum):
    INPUTS = 'inputs'
    OUTPUTS = 'outputs'
    PAIRS = 'pairs'
    UNPAIRED = 'unpaired'


class DriftKind(str, Enum):
    NOISE_CHANGE = 'noise-change'
    MECHANISM_CHANGE = 'mechanism-change'


@dataclass(frozen=True)
class ScenarioSpec:
    direction: Direction
    extra_kind: ExtraKind
    extra_is_shifted: bool = True
    drift_kind: Optional[DriftKind] = None
    alpha: float = 0.05
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, 'direction', Direction(self.direction))
            object.__setattr__(self, 'extra_kind', ExtraKind(self.extra_kind))
            if self.drift_kind is not None:
                object.__setattr__(self, 'drift_kind', DriftKind(self.drift_kind))
        except ValueError as e:
            raise InvalidScenario(str(e)) from e
        if (self.drift_kind is not None) != (self.extra_kind == ExtraKind.PAIRS):
            raise InvalidScenario("drift_kind is required for pairs and only for pairs")
        if not 0 < self.alpha < 1:
            raise InvalidScenario(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.seed < 0:
            raise InvalidScenario(f"seed must be nonnegative, got {self.seed}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'direction': self.direction.value,
            'extra_kind': self.extra_kind.value,
            'extra_is_shifted': bool(self.extra_is_shifted),
            'drift_kind': self.drift_kind.value if self.drift_kind else None,
            'alpha': float(self.alpha),
            'seed': int(self.seed),
        }


class UnpairedSample:
    """Extra inputs and extra outputs drawn separately; the two may differ in size."""

    def __init__(self, inputs: Any, outputs: Any):
        self.inputs = as_sample(inputs)
        self.outputs = as_sample(outputs)

    def __repr__(self):
        return f"UnpairedSample(inputs={self.inputs.size}, outputs={self.outputs.size})"


@dataclass(frozen=True)
class PredictionGrids:
    x: Grid
    y: Grid

    def covering_outputs(self, lo: float, hi: float) -> 'PredictionGrids':
        """The same grids with the output grid stretched to cover [lo, hi]."""
        if lo >= self.y.lo and hi <= self.y.hi:
            return self
        return PredictionGrids(self.x, Grid(min(lo, self.y.lo), max(hi, self.y.hi), self.y.m))


def prediction_grids(train: PairedSample,
                     extra: Union[None, np.ndarray, PairedSample, UnpairedSample] = None,
                     extra_kind: Optional[ExtraKind] = None,
                     config: Optional[Dict[str, Any]] = None) -> PredictionGrids:
    """Input grid over the training and extra inputs; output grid padded by ``output_pad``."""
    config = config or {}
    xs, ys = [train.x], [train.y]
    if isinstance(extra, PairedSample):
        xs.append(extra.x)
        ys.append(extra.y)
    elif isinstance(extra, UnpairedSample):
        xs.append(extra.inputs)
        ys.append(extra.outputs)
    elif extra is not None and extra_kind == ExtraKind.OUTPUTS:
        ys.append(as_sample(extra))
    elif extra is not None and extra_kind == ExtraKind.INPUTS:
        xs.append(as_sample(extra))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateInput("inputs or outputs are constant")
    pad = config.get('output_pad', 0.25) * float(np.ptp(y))
    return PredictionGrids(
        x=Grid(float(np.min(x)), float(np.max(x)), int(config.get('predictor_m_x', 64))),
        y=Grid(float(np.min(y)) - pad, float(np.max(y)) + pad,
               int(config.get('predictor_m_y', 256))),
    )


@dataclass(frozen=True, eq=False)
class ConditionalPredictor:
    """Tabulated p(y | x): one row per input bin, each integrating to one over y.

    Rows without evidence are marked undefined and hold NaN.
    """

    x_grid: Grid
    y_grid: Grid
    density: np.ndarray
    point_estimate: np.ndarray
    undefined: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_table(cls, x_grid: Grid, y_grid: Grid, table: Any,
                   provenance: Optional[Dict[str, Any]] = None) -> 'ConditionalPredictor':
        table = np.clip(np.asarray(table, dtype=float), 0.0, None)
        if table.shape != (x_grid.m, y_grid.m):
            raise ShapeMismatch(f"table shape {table.shape} does not match grids "
                                f"({x_grid.m}, {y_grid.m})")
        mass = table.sum(axis=1) * y_grid.step
        undefined = ~(mass >= UNDEFINED_MASS)
        density = np.full(table.shape, np.nan)
        density[~undefined] = table[~undefined] / mass[~undefined, None]
        point = density @ y_grid.centers * y_grid.step
        provenance = dict(provenance or {})
        if np.any(undefined):
            provenance.setdefault('flags', [])
            if 'undefined_rows' not in provenance['flags']:
                provenance['flags'] = list(provenance['flags']) + ['undefined_rows']
            logger.warning(f"{int(undefined.sum())} of {x_grid.m} rows have no evidence")
        return cls(x_grid, y_grid, density, point, undefined, provenance)

    def with_provenance(self, **entries: Any) -> 'ConditionalPredictor':
        provenance = dict(self.provenance)
        provenance.update(entries)
        return ConditionalPredictor(self.x_grid, self.y_grid, self.density, self.point_estimate,
                                    self.undefined, provenance)

    @property
    def flags(self) -> list:
        return list(self.provenance.get('flags', []))

    @property
    def warnings(self) -> list:
        return list(self.provenance.get('warnings', []))

    def row_std(self) -> np.ndarray:
        centers = self.y_grid.centers
        second = self.density @ (centers ** 2) * self.y_grid.step
        return np.sqrt(np.clip(second - self.point_estimate ** 2, 0.0, None))

    def row_l1(self, other: 'ConditionalPredictor') -> np.ndarray:
        """Per-row L1 distance on shared grids; NaN where either row is undefined."""
        if self.x_grid != other.x_grid or self.y_grid != other.y_grid:
            raise ShapeMismatch("predictors live on different grids")
        return np.sum(np.abs(self.density - other.density), axis=1) * self.y_grid.step

    def mean_row_l1(self, other: 'ConditionalPredictor') -> float:
        distances = self.row_l1(other)
        distances = distances[np.isfinite(distances)]
        return float(np.mean(distances)) if distances.size else float('nan')

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'x': self.x_grid.centers,
            'point_estimate': self.point_estimate,
            'row_std': self.row_std(),
        })

    def to_dict(self) -> Dict[str, Any]:
        return {
            'version': 1,
            'x_grid': self.x_grid.to_dict(),
            'y_grid': self.y_grid.to_dict(),
            'density': [[None if np.isnan(v) else float(v) for v in row] for row in self.density],
            'provenance': self.provenance,
        }

    @classmethod
    def from_dict(cls, record: Dict[str, Any]) -> 'ConditionalPredictor':
        x_grid = Grid(**record['x_grid'])
        y_grid = Grid(**record['y_grid'])
        table = np.array([[0.0 if v is None else v for v in row] for row in record['density']],
                         dtype=float)
        return cls.from_table(x_grid, y_grid, table, record.get('provenance'))


def additive_predictor(conditional: AdditiveConditional, grids: PredictionGrids,
                       provenance: Dict[str, Any]) -> ConditionalPredictor:
    """Predictor whose rows are the noise density shifted by the mechanism."""
    return ConditionalPredictor.from_table(
        grids.x, grids.y, conditional.table(grids.x, grids.y), provenance
    )


def causal_table(conditional: AdditiveConditional, grids: PredictionGrids) -> ConditionalPredictor:
    """P(X | Y) in the causal direction: rows over the output grid, columns over inputs."""
    return ConditionalPredictor.from_table(
        grids.y, grids.x, conditional.table(grids.y, grids.x), {'route': 'causal-table'}
    )


def baseline_from_fit(fit: AnmFit, grids: PredictionGrids,
                      provenance: Optional[Dict[str, Any]] = None) -> ConditionalPredictor:
    record = {'route': 'baseline', 'anm_p_value': float(fit.independence.p_value)}
    record.update(provenance or {})
    return additive_predictor(AdditiveConditional(fit.model, fit.noise_density), grids, record)


def baseline_predictor(train: PairedSample, config: Optional[Dict[str, Any]] = None,
                       grids: Optional[PredictionGrids] = None) -> ConditionalPredictor:
    """The unadapted model P(Y | X) = P_N(Y - phi(X)) fitted on the training pairs."""
    config = config or {}
    grids = grids or prediction_grids(train, config=config)
    return baseline_from_fit(fit_anm(train, config), grids)


def noise_from_marginals(model: Any, causes: Any, effects: Any,
                         config: Optional[Dict[str, Any]] = None) -> Tuple[GridDensity,
                                                                           ValidityReport]:
    """Noise law that turns the mechanism image of ``causes`` into the law of ``effects``.

    Both samples come from the same domain but need not be paired. The effect
    KDE is widened by the image bandwidth so the deconvolution keeps a
    positive residual smoothing. The report is taken on the linear
    deconvolution at ``validity_tolerance``; the returned law is its clipped
    version refined by ``refine_remainder``, so it is a density even when the
    report fails.
    """
    config = config or {}
    causes, effects = as_sample(causes), as_sample(effects)
    if min(causes.size, effects.size) < MIN_SAMPLES:
        raise TooFewSamples(f"unpaired marginals need at least {MIN_SAMPLES} samples each, "
                            f"got {causes.size} causes and {effects.size} effects")
    pad = config.get('kde_pad', 3.0)
    images = np.asarray(model.evaluate(causes), dtype=float)
    h_image = silverman_bandwidth(images)
    h_effect = float(np.hypot(silverman_bandwidth(effects), h_image))
    span = float(np.ptp(np.concatenate([images, effects])))
    step = (span + 2 * pad * h_effect) / int(config.get('grid_m', 512))

    image_density = kde(images, aligned_grid(images, h_image, step, pad), h_image, pad)
    effect_density = kde(effects, aligned_grid(effects, h_effect, step, pad), h_effect, pad)
    raw = deconvolve(effect_density, image_density, config.get('deconvolution_reg', 1e-6))
    report = validity(raw, config.get('validity_tolerance', 0.05))
    start, clipped = clip_to_density(raw)

    # refinement convolves with a kernel whose middle bin sits at zero
    centered = image_density.recentered()
    lo, hi = centered.support()
    kernel = centered.regrid(centered_grid(step, max(-lo, hi)))
    start = GridDensity(start.grid.shifted(image_density.mean()), start.values)
    noise = refine_remainder(effect_density, kernel, start)
    logger.debug(f"Noise from unpaired marginals: negative mass {report.negative_mass:.4f}, "
                 f"clipped {clipped:.3g}, mean {noise.mean():.4f}")
    return noise.recentered(), report
