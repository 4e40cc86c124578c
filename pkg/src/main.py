"""Command-line entry point for causeshift."""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import colorlog
import pandas as pd
from dotenv import load_dotenv

from anm import Direction as CausalDirection
from anm import fit_anm, infer_direction
from artifacts import (
    read_marginal,
    read_pairs,
    read_record,
    write_frame,
    write_marginal,
    write_pairs,
    write_record,
)
from benchmark import BenchmarkRunner, score_predictor
from causal.localize import ShiftLocalizer
from datagen import (
    GeneratorSpec,
    Shift,
    generate_shift_pair,
    oracle_conditional,
    oriented,
)
from errors import CauseShiftError, InvalidConfig
from report import ReportGenerator, Series, density_series
from scenarios.base import (
    ExtraKind,
    PredictionGrids,
    ScenarioSpec,
    UnpairedSample,
    baseline_predictor,
)
from scenarios.coordinator import ScenarioCoordinator
from settings import DEFAULT_CONFIG_FILE, build_config, load_config, output_dir

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ABSTAIN = 2

TRUTH_FILE = 'truth.meta'

# command-line flags that override config keys
CONFIG_FLAGS = [
    'seed', 'alpha', 'n_permutations', 'grid_m', 'n_bootstrap', 'predictor_m_x', 'predictor_m_y',
    'mechanism', 'cause', 'noise', 'n', 'n_extra', 'shift', 'direction', 'extra_kind',
    'extra_is_shifted', 'drift_kind', 'scenarios', 'n_seeds', 'workers',
]


def setup_logging():
    """Setup colored logging."""
    log_level = os.getenv('LOG_LEVEL', 'INFO')

    handler = colorlog.StreamHandler()
    handler.setFormatter(colorlog.ColoredFormatter(
        '%(log_color)s%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'red,bg_white',
        }
    ))

    root_logger = logging.getLogger()
    root_logger.handlers = [handler]
    root_logger.setLevel(getattr(logging, log_level.upper(), logging.INFO))


def resolve_config(args: argparse.Namespace) -> Dict[str, Any]:
    """Defaults < config/analysis.yaml < --config file < command-line flags."""
    flags = {key: getattr(args, key, None) for key in CONFIG_FLAGS}
    return build_config(load_config(DEFAULT_CONFIG_FILE), load_config(args.config), flags)


# Commands

def cmd_gen(config: Dict[str, Any], args: argparse.Namespace) -> int:
    base = GeneratorSpec(
        config.get('mechanism', 'square'),
        config.get('cause', 'uniform(-1, 1)'),
        config.get('noise', 'gaussian(0, 0.3)'),
        config.get('n', 500),
        config.get('seed', 0),
    )
    shift = Shift.parse(config['shift']) if config.get('shift') else None
    direction = config.get('direction', 'causal')
    data = generate_shift_pair(base, shift, config.get('n_extra') or base.n)

    out = output_dir(args.output_dir)
    write_pairs(out / 'train.csv', oriented(data.train, direction))
    write_pairs(out / 'extra.csv', oriented(data.extra, direction))
    write_record(out / TRUTH_FILE, dict(data.truth, direction=direction))
    logger.info(f"Generated data in {out}")
    return EXIT_OK


def cmd_fit_anm(config: Dict[str, Any], args: argparse.Namespace) -> int:
    pairs = read_pairs(args.train)
    fit = fit_anm(pairs, config)
    out = output_dir(args.output_dir)
    write_record(out / 'model.yaml', fit.model.to_dict())
    write_record(out / 'noise_density.yaml', fit.noise_density.to_dict())
    write_marginal(out / 'residuals.csv', fit.residuals, column='residual')
    alpha = config['alpha']
    ReportGenerator(out).write_report('anm.report', {
        'n': pairs.n,
        'independence': fit.independence.to_dict(),
        'alpha': alpha,
        'residuals_independent': fit.independence.p_value > alpha,
        'bandwidth': fit.model.bandwidth,
        'ridge': fit.model.ridge,
    })
    if fit.independence.p_value <= alpha:
        logger.warning(f"Residuals depend on the input (p={fit.independence.p_value:.4f})")
    return EXIT_OK


def cmd_direction(config: Dict[str, Any], args: argparse.Namespace) -> int:
    pairs = read_pairs(args.train)
    verdict = infer_direction(pairs, config['alpha'], config)
    record = verdict.to_dict()
    record.update({'seed': config['seed'], 'n_permutations': config['n_permutations']})
    ReportGenerator(output_dir(args.output_dir)).write_report('direction.report', record)
    return EXIT_ABSTAIN if verdict.direction == CausalDirection.UNDECIDED else EXIT_OK


def cmd_localize(config: Dict[str, Any], args: argparse.Namespace) -> int:
    train = read_pairs(args.train)
    new_effects = read_marginal(args.extra, column='y')
    analysis = ShiftLocalizer(config).diagnose(train, new_effects)
    diagnosis = analysis.diagnosis

    out = output_dir(args.output_dir)
    generator = ReportGenerator(out)
    generator.write_report('diagnosis.report', diagnosis.to_dict())
    series: List[Series] = [
        density_series('training effects', analysis.factorization.effect_density),
        density_series('new effects', analysis.branches.effect_density),
    ]
    if diagnosis.recovered is not None:
        write_record(out / 'recovered.yaml', diagnosis.recovered.to_dict())
        series.append(density_series('recovered factor', diagnosis.recovered))
    generator.write_overlay('localize.svg', f"Shift verdict: {diagnosis.verdict.value}", series)
    return EXIT_OK if diagnosis.verdict.decided else EXIT_ABSTAIN


def _scenario_spec(config: Dict[str, Any]) -> ScenarioSpec:
    try:
        return ScenarioSpec(
            config['direction'],
            config['extra_kind'],
            bool(config.get('extra_is_shifted', True)),
            config.get('drift_kind'),
            config['alpha'],
            config['seed'],
        )
    except KeyError as e:
        raise InvalidConfig(f"adapt needs the scenario setting {e}") from e


def _truth(args: argparse.Namespace) -> Optional[Dict[str, Any]]:
    path = Path(args.truth) if args.truth else Path(args.train).parent / TRUTH_FILE
    if not path.exists():
        return None
    return read_record(path)


def cmd_adapt(config: Dict[str, Any], args: argparse.Namespace) -> int:
    spec = _scenario_spec(config)
    train = read_pairs(args.train)
    if spec.extra_kind == ExtraKind.PAIRS:
        extra = read_pairs(args.extra)
    elif spec.extra_kind == ExtraKind.UNPAIRED:
        if not args.extra_outputs:
            raise InvalidConfig("unpaired scenarios need --extra-outputs next to --extra")
        extra = UnpairedSample(read_marginal(args.extra, column='x'),
                               read_marginal(args.extra_outputs, column='y'))
    else:
        column = 'x' if spec.extra_kind == ExtraKind.INPUTS else 'y'
        extra = read_marginal(args.extra, column=column)
    predictor = ScenarioCoordinator(config).adapt(spec, train, extra)

    out = output_dir(args.output_dir)
    write_record(out / 'predictor.yaml', predictor.to_dict())
    write_frame(out / 'predictions.csv', predictor.to_frame())
    ReportGenerator(out).write_report('provenance.report', predictor.provenance)

    truth = _truth(args)
    if truth is not None:
        oracle = oracle_conditional(GeneratorSpec.from_dict(truth['shifted']), spec.direction,
                                    predictor.x_grid, predictor.y_grid)
        grids = PredictionGrids(predictor.x_grid, predictor.y_grid)
        adapted = score_predictor(predictor, oracle)
        baseline = score_predictor(baseline_predictor(train, config, grids), oracle)
        write_frame(out / 'metrics.csv', pd.DataFrame([{
            'row_l1': adapted['row_l1'],
            'rmse': adapted['rmse'],
            'baseline_row_l1': baseline['row_l1'],
            'baseline_rmse': baseline['rmse'],
        }]))
        logger.info(f"Row L1 to oracle {adapted['row_l1']:.4f} "
                    f"(baseline {baseline['row_l1']:.4f})")
    return EXIT_ABSTAIN if predictor.warnings else EXIT_OK


def cmd_benchmark(config: Dict[str, Any], args: argparse.Namespace) -> int:
    BenchmarkRunner(config, output_dir(args.output_dir)).run()
    return EXIT_OK


COMMANDS = {
    'gen': cmd_gen,
    'fit-anm': cmd_fit_anm,
    'direction': cmd_direction,
    'localize': cmd_localize,
    'adapt': cmd_adapt,
    'benchmark': cmd_benchmark,
}


def _bool(text: str) -> bool:
    if text.lower() in ('1', 'true', 'yes'):
        return True
    if text.lower() in ('0', 'false', 'no'):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='YAML file with flat key: value settings')
    common.add_argument('--output-dir', help='defaults to $CAUSESHIFT_OUTPUT_DIR or ./output')
    common.add_argument('--seed', type=int)
    common.add_argument('--alpha', type=float)
    common.add_argument('--n-permutations', type=int)
    common.add_argument('--n-bootstrap', type=int)
    common.add_argument('--grid-m', type=int)

    parser = argparse.ArgumentParser(prog='causeshift', description=__doc__)
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen', parents=[common], help='generate seeded synthetic data')
    gen.add_argument('--mechanism')
    gen.add_argument('--cause', help='e.g. uniform(-1, 1)')
    gen.add_argument('--noise', help='e.g. gaussian(0, 0.3)')
    gen.add_argument('--n', type=int)
    gen.add_argument('--n-extra', type=int)
    gen.add_argument('--shift', help='e.g. noise:gaussian(0, 0.6)')
    gen.add_argument('--direction', choices=['causal', 'anticausal'])

    for name, text in [('fit-anm', 'fit an additive noise model'),
                       ('direction', 'infer the causal direction')]:
        command = commands.add_parser(name, parents=[common], help=text)
        command.add_argument('--train', required=True)

    localize = commands.add_parser('localize', parents=[common],
                                   help='decide whether the cause or the mechanism changed')
    localize.add_argument('--train', required=True)
    localize.add_argument('--extra', required=True)

    adapt = commands.add_parser('adapt', parents=[common], help='adapt a predictor to a scenario')
    adapt.add_argument('--train', required=True)
    adapt.add_argument('--extra', required=True)
    adapt.add_argument('--extra-outputs', help='output column for unpaired scenarios')
    adapt.add_argument('--truth', help=f"generator ground truth (default: {TRUTH_FILE} "
                                       f"next to the training file)")
    adapt.add_argument('--direction', choices=['causal', 'anticausal'])
    adapt.add_argument('--extra-kind', choices=['inputs', 'outputs', 'pairs', 'unpaired'])
    adapt.add_argument('--extra-is-shifted', type=_bool)
    adapt.add_argument('--drift-kind', choices=['noise-change', 'mechanism-change'])
    adapt.add_argument('--predictor-m-x', type=int)
    adapt.add_argument('--predictor-m-y', type=int)

    bench = commands.add_parser('benchmark', parents=[common], help='run a scenario sweep')
    bench.add_argument('--scenarios', help="comma-separated names or 'all'")
    bench.add_argument('--n-seeds', type=int)
    bench.add_argument('--n', type=int)
    bench.add_argument('--n-extra', type=int)
    bench.add_argument('--workers', type=int)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    load_dotenv()
    setup_logging()

    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        logger.info(f"Running {args.command}")
        return COMMANDS[args.command](config, args)
    except (CauseShiftError, OSError) as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
