"""Analysis settings: built-in defaults, YAML files and validation."""
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from errors import InvalidConfig

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = Path('config') / 'analysis.yaml'
OUTPUT_DIR_ENV = 'CAUSESHIFT_OUTPUT_DIR'

DEFAULTS: Dict[str, Any] = {
    'alpha': 0.05,
    'n_permutations': 199,
    'seed': 0,
    'grid_m': 512,
    'kde_pad': 3.0,
    'n_bootstrap': 200,
    'null_quantile': 0.95,
    'deconvolution_reg': 1e-6,
    'validity_tolerance': 0.05,
    'gaussian_reg': 1e-3,
    'max_iterations': 500,
    'relative_tolerance': 1e-6,
    'penalty_ratio': 0.1,
    'predictor_m_x': 64,
    'predictor_m_y': 256,
    'bandwidth': 'auto',
    'ridge': 'auto',
    'noise_width_mismatch': 0.25,
    'output_pad': 0.25,
    'hsic_workers': 1,
}

# key -> (lower bound, upper bound, bounds inclusive)
_RANGES = {
    'alpha': (0.0, 1.0, False),
    'null_quantile': (0.0, 1.0, False),
    'kde_pad': (0.0, float('inf'), False),
    'deconvolution_reg': (0.0, float('inf'), True),
    'gaussian_reg': (0.0, float('inf'), True),
    'validity_tolerance': (0.0, 1.0, True),
    'relative_tolerance': (0.0, float('inf'), False),
    'penalty_ratio': (0.0, float('inf'), True),
    'noise_width_mismatch': (0.0, float('inf'), False),
    'output_pad': (0.0, float('inf'), True),
}
_MINIMUMS = {
    'n_permutations': 99,
    'seed': 0,
    'grid_m': 8,
    'n_bootstrap': 1,
    'max_iterations': 1,
    'predictor_m_x': 8,
    'predictor_m_y': 8,
    'hsic_workers': 1,
}


def load_config(config_file: Union[str, Path, None]) -> Dict[str, Any]:
    """Load a flat YAML mapping; a missing default file yields an empty mapping."""
    if config_file is None:
        return {}
    path = Path(config_file)
    if not path.exists():
        if path == DEFAULT_CONFIG_FILE:
            return {}
        raise FileNotFoundError(f"config file {path} does not exist")
    try:
        with open(path, 'r') as f:
            loaded = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise InvalidConfig(f"cannot parse {path}: {e}") from e
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise InvalidConfig(f"{path} must hold a key: value mapping")
    nested = [key for key, value in loaded.items() if isinstance(value, (dict, list))]
    if nested:
        raise InvalidConfig(f"{path} must be flat, found nested values under {nested}")
    logger.debug(f"Loaded {len(loaded)} settings from {path}")
    return loaded


def _check_auto_or_number(config: Dict[str, Any], key: str, allow_zero: bool = False):
    value = config[key]
    if value == 'auto':
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidConfig(f"{key} must be 'auto' or a number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        kind = 'nonnegative' if allow_zero else 'positive'
        raise InvalidConfig(f"{key} must be 'auto' or a {kind} number, got {value!r}")


def validate(config: Dict[str, Any]) -> Dict[str, Any]:
    for key, (lo, hi, inclusive) in _RANGES.items():
        value = config.get(key)
        if value is None:
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidConfig(f"{key} must be a number, got {value!r}")
        inside = lo <= value <= hi if inclusive else lo < value < hi
        if not inside:
            raise InvalidConfig(f"{key} = {value} is outside the allowed range ({lo}, {hi})")
    for key, minimum in _MINIMUMS.items():
        value = config.get(key)
        if value is None:
            continue
        if isinstance(value, bool) or int(value) != value or value < minimum:
            raise InvalidConfig(f"{key} must be an integer >= {minimum}, got {value!r}")
    if 'bandwidth' in config:
        _check_auto_or_number(config, 'bandwidth')
    if 'ridge' in config:
        _check_auto_or_number(config, 'ridge', allow_zero=True)
    return config


def build_config(*layers: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Defaults overlaid by each layer in turn; ``None`` values in a layer are skipped."""
    config = dict(DEFAULTS)
    for layer in layers:
        for key, value in (layer or {}).items():
            if value is not None:
                config[key] = value
    return validate(config)


def output_dir(explicit: Optional[str] = None) -> Path:
    return Path(explicit or os.getenv(OUTPUT_DIR_ENV, 'output'))
