"""Seeded sweeps of every adaptation scenario against the generator's oracle."""
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from artifacts import write_frame
from datagen import GeneratorSpec, Shift, generate_shift_pair, oracle_conditional, oriented
from errors import InvalidConfig
from report import ReportGenerator, Series
from samples import PairedSample
from scenarios.base import (
    ConditionalPredictor,
    ExtraKind,
    PredictionGrids,
    ScenarioSpec,
    UnpairedSample,
    baseline_predictor,
)
from scenarios.coordinator import Extra, ScenarioCoordinator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchmarkScenario:
    name: str
    direction: str
    extra_kind: str
    extra_is_shifted: bool
    drift_kind: Optional[str]
    generator: Dict[str, Any]
    shift: Optional[str]
    extra_factor: float = 1.0

    def scenario_spec(self, alpha: float, seed: int) -> ScenarioSpec:
        return ScenarioSpec(self.direction, self.extra_kind, self.extra_is_shifted,
                            self.drift_kind, alpha, seed)


def _scenario(name, direction, kind, shifted, drift, mechanism, cause, noise, shift,
              extra_factor=1.0) -> BenchmarkScenario:
    generator = {'mechanism': mechanism, 'cause': cause, 'noise': noise}
    return BenchmarkScenario(name, direction, kind, shifted, drift, generator, shift, extra_factor)


CATALOG: Dict[str, BenchmarkScenario] = {s.name: s for s in [
    _scenario('causal-covariate-shift', 'causal', 'inputs', True, None,
              'tanh3', 'gaussian(0, 0.5)', 'gaussian(0, 0.2)', 'cause:gaussian(0.4, 0.5)'),
    _scenario('causal-ssl-inputs', 'causal', 'inputs', False, None,
              'tanh3', 'gaussian(0, 0.5)', 'gaussian(0, 0.2)', None),
    _scenario('causal-output-shift', 'causal', 'outputs', True, None,
              'square', 'uniform(-1, 1)', 'gaussian(0, 0.3)', 'noise:gaussian(0, 0.6)'),
    _scenario('causal-ssl-outputs', 'causal', 'outputs', False, None,
              'square', 'uniform(-1, 1)', 'gaussian(0, 0.5)', None, extra_factor=4.0),
    _scenario('causal-transfer', 'causal', 'pairs', True, 'noise-change',
              'tanh3', 'uniform(-1, 1)', 'gaussian(0, 0.2)', 'noise:gaussian(0, 0.5)'),
    _scenario('causal-concept-drift', 'causal', 'pairs', True, 'mechanism-change',
              'square', 'uniform(-1, 1)', 'gaussian(0, 0.3)', 'mechanism:cube'),
    _scenario('anticausal-input-shift', 'anticausal', 'inputs', True, None,
              'cube_plus', 'gaussian(0, 0.5)', 'gaussian(0, 0.3)', 'cause:gaussian(0.4, 0.5)'),
    _scenario('anticausal-ssl-inputs', 'anticausal', 'inputs', False, None,
              'cube_plus', 'gaussian(0, 0.5)', 'gaussian(0, 0.3)', None),
    _scenario('anticausal-output-shift', 'anticausal', 'outputs', True, None,
              'cube_plus', 'gaussian(0, 0.5)', 'gaussian(0, 0.3)', 'cause:gaussian(0.4, 0.5)'),
    _scenario('anticausal-transfer', 'anticausal', 'pairs', True, 'noise-change',
              'tanh3', 'uniform(-1, 1)', 'gaussian(0, 0.2)', 'noise:gaussian(0, 0.5)'),
    _scenario('anticausal-concept-drift', 'anticausal', 'pairs', True, 'mechanism-change',
              'cube', 'uniform(-1, 1)', 'gaussian(0, 0.3)', 'mechanism:cube_plus'),
]}


def extra_for(kind: Union[str, ExtraKind], pairs: PairedSample) -> Extra:
    """The part of the extra pairs a scenario gets to see, in prediction orientation.

    Unpaired scenarios see the inputs of the first half and the outputs of the
    second half, so no input is seen with its own output.
    """
    kind = ExtraKind(kind)
    if kind == ExtraKind.INPUTS:
        return pairs.x
    if kind == ExtraKind.OUTPUTS:
        return pairs.y
    if kind == ExtraKind.UNPAIRED:
        half = pairs.n // 2
        return UnpairedSample(pairs.x[:half], pairs.y[half:])
    return pairs


def score_predictor(predictor: ConditionalPredictor,
                    oracle: ConditionalPredictor) -> Dict[str, float]:
    """Mean per-row L1 to the oracle and RMSE of the point estimates over rows both define."""
    defined = ~(predictor.undefined | oracle.undefined)
    errors = predictor.point_estimate[defined] - oracle.point_estimate[defined]
    return {
        'row_l1': predictor.mean_row_l1(oracle),
        'rmse': float(np.sqrt(np.mean(errors ** 2))) if errors.size else float('nan'),
    }


def run_cell(name: str, seed: int, n: int, n_extra: int,
             config: Dict[str, Any]) -> Dict[str, Any]:
    """One scenario at one seed; failures are reported in the row, never raised."""
    row: Dict[str, Any] = {'scenario': name, 'seed': seed, 'status': 'ok', 'error': ''}
    try:
        scenario = CATALOG[name]
        base = GeneratorSpec.from_dict(dict(scenario.generator, n=n, seed=seed))
        shift = Shift.parse(scenario.shift) if scenario.shift else None
        n_extra = max(int(round(n_extra * scenario.extra_factor)), 1)
        data = generate_shift_pair(base, shift, n_extra)
        train = oriented(data.train, scenario.direction)
        extra = oriented(data.extra, scenario.direction)

        spec = scenario.scenario_spec(config.get('alpha', 0.05), seed)
        visible = extra_for(spec.extra_kind, extra)
        predictor = ScenarioCoordinator(config).adapt(spec, train, visible)
        grids = PredictionGrids(predictor.x_grid, predictor.y_grid)
        baseline = baseline_predictor(train, dict(config, seed=seed), grids)
        truth = GeneratorSpec.from_dict(data.truth['shifted'])
        oracle = oracle_conditional(truth, scenario.direction, predictor.x_grid, predictor.y_grid)

        adapted = score_predictor(predictor, oracle)
        reference = score_predictor(baseline, oracle)
        row.update({
            'route': predictor.provenance.get('route', ''),
            'flags': ';'.join(predictor.flags),
            'adapted_row_l1': adapted['row_l1'],
            'adapted_rmse': adapted['rmse'],
            'baseline_row_l1': reference['row_l1'],
            'baseline_rmse': reference['rmse'],
        })
    except Exception as e:
        row['status'] = 'failed'
        row['error'] = f"{type(e).__name__}: {e}"
        logger.warning(f"Benchmark cell {name} seed {seed} failed: {row['error']}")
    return row


def summarize(cells: pd.DataFrame) -> pd.DataFrame:
    """Per-scenario mean and std over the successful seeds."""
    ok = cells[cells['status'] == 'ok']
    metrics = ['adapted_row_l1', 'baseline_row_l1', 'adapted_rmse', 'baseline_rmse']
    rows = []
    for name in cells['scenario'].drop_duplicates():
        group = ok[ok['scenario'] == name]
        row = {'scenario': name, 'n_ok': int(len(group)),
               'n_failed': int((cells['scenario'] == name).sum() - len(group))}
        for metric in metrics:
            values = group[metric].astype(float) if metric in group else pd.Series(dtype=float)
            row[f"{metric}_mean"] = float(values.mean()) if len(values) else float('nan')
            row[f"{metric}_std"] = float(values.std(ddof=0)) if len(values) else float('nan')
        rows.append(row)
    return pd.DataFrame(rows)


class BenchmarkRunner:
    """Runs scenario x seed cells, each into its own directory, then aggregates."""

    def __init__(self, config: Dict[str, Any], output_dir: Union[str, Path]):
        self.config = dict(config)
        self.output_dir = Path(output_dir)
        self.scenarios = self._scenario_names(config.get('scenarios', 'all'))
        self.n_seeds = int(config.get('n_seeds', 30))
        self.first_seed = int(config.get('first_seed', 0))
        self.n = int(config.get('n', 500))
        self.n_extra = int(config.get('n_extra', self.n))
        self.workers = int(config.get('workers', 1))

    @staticmethod
    def _scenario_names(selection: Any) -> List[str]:
        if selection in (None, 'all'):
            return list(CATALOG)
        names = [s.strip() for s in str(selection).split(',') if s.strip()]
        unknown = [s for s in names if s not in CATALOG]
        if unknown:
            raise InvalidConfig(f"unknown benchmark scenarios {unknown}, expected {list(CATALOG)}")
        return names

    def cells(self) -> List[tuple]:
        seeds = range(self.first_seed, self.first_seed + self.n_seeds)
        return [(name, seed) for name in self.scenarios for seed in seeds]

    def _write_cell(self, row: Dict[str, Any]):
        cell_dir = self.output_dir / row['scenario'] / f"seed_{row['seed']}"
        write_frame(cell_dir / 'metrics.csv', pd.DataFrame([row]))

    def run(self) -> pd.DataFrame:
        cells = self.cells()
        logger.info(f"Benchmark: {len(self.scenarios)} scenarios x {self.n_seeds} seeds "
                    f"on {self.workers} worker(s)")
        rows = []
        if self.workers > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                futures = [pool.submit(run_cell, name, seed, self.n, self.n_extra, self.config)
                           for name, seed in cells]
                for future in tqdm(as_completed(futures), total=len(futures), desc='cells'):
                    rows.append(future.result())
        else:
            for name, seed in tqdm(cells, desc='cells'):
                rows.append(run_cell(name, seed, self.n, self.n_extra, self.config))

        for row in rows:
            self._write_cell(row)
        frame = pd.DataFrame(rows)
        order = {cell: index for index, cell in enumerate(cells)}
        frame['order'] = [order[(r['scenario'], r['seed'])] for r in rows]
        frame = frame.sort_values('order').drop(columns='order').reset_index(drop=True)

        summary = summarize(frame)
        write_frame(self.output_dir / 'summary.csv', summary)
        self._plot(frame)
        failed = int((frame['status'] == 'failed').sum())
        log = logger.warning if failed else logger.info
        log(f"Benchmark finished: {len(frame) - failed} cells ok, {failed} failed")
        return summary

    def _plot(self, frame: pd.DataFrame):
        generator = ReportGenerator(self.output_dir)
        for name in self.scenarios:
            group = frame[(frame['scenario'] == name) & (frame['status'] == 'ok')]
            if group.empty:
                continue
            seeds = group['seed'].to_numpy(dtype=float)
            generator.write_overlay(
                f"{name}.svg",
                f"{name}: row L1 to oracle",
                [Series('adapted', seeds, group['adapted_row_l1'].to_numpy(dtype=float)),
                 Series('baseline', seeds, group['baseline_row_l1'].to_numpy(dtype=float))],
                x_label='seed',
            )
