"""Reading and writing sample CSVs and YAML records."""
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd
import yaml

from errors import MalformedCsv, MalformedRecord
from samples import PairedSample

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
PathLike = Union[str, Path]


def _ensure_parent(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)


def _read_frame(path: PathLike) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, float_precision='round_trip')
    except pd.errors.EmptyDataError as e:
        raise MalformedCsv(f"{path} is empty") from e
    except pd.errors.ParserError as e:
        raise MalformedCsv(f"{path} is not valid CSV: {e}") from e
    if frame.empty:
        raise MalformedCsv(f"{path} has a header but no rows")
    return frame


def _numeric(frame: pd.DataFrame, column: str, path: PathLike) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors='coerce').to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        bad = int(np.argmax(~np.isfinite(values)))
        raise MalformedCsv(f"{path}: column '{column}' row {bad + 1} is not a finite number")
    return values


def write_pairs(path: PathLike, pairs: PairedSample) -> Path:
    path = Path(path)
    _ensure_parent(path)
    pd.DataFrame({'x': pairs.x, 'y': pairs.y}).to_csv(path, index=False,
                                                       float_format=FLOAT_FORMAT)
    logger.debug(f"Wrote {pairs.n} pairs to {path}")
    return path


def read_pairs(path: PathLike) -> PairedSample:
    """Pairs from a CSV with header ``x,y``."""
    frame = _read_frame(path)
    missing = [name for name in ('x', 'y') if name not in frame.columns]
    if missing:
        raise MalformedCsv(f"{path} needs columns x,y; missing {missing} "
                           f"(found {list(frame.columns)})")
    return PairedSample(_numeric(frame, 'x', path), _numeric(frame, 'y', path),
                        {'source': str(path)})


def write_marginal(path: PathLike, values: Any, column: str = 'value') -> Path:
    path = Path(path)
    _ensure_parent(path)
    pd.DataFrame({column: np.asarray(values, dtype=float)}).to_csv(
        path, index=False, float_format=FLOAT_FORMAT
    )
    return path


def read_marginal(path: PathLike, column: Optional[str] = None) -> np.ndarray:
    """One column of samples; a single-column file needs no column name."""
    frame = _read_frame(path)
    if len(frame.columns) == 1:
        return _numeric(frame, frame.columns[0], path)
    if column is None or column not in frame.columns:
        raise MalformedCsv(f"{path} has columns {list(frame.columns)}; "
                           f"expected a single column or a '{column}' column")
    return _numeric(frame, column, path)


def write_frame(path: PathLike, frame: pd.DataFrame) -> Path:
    path = Path(path)
    _ensure_parent(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def plain(value: Any) -> Any:
    """Convert numpy and enum values into YAML-safe builtins."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, Enum):
        return plain(value.value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def dump_record(record: Dict[str, Any]) -> str:
    return yaml.safe_dump(plain(record), sort_keys=True, default_flow_style=False)


def write_record(path: PathLike, record: Dict[str, Any], header: Optional[str] = None) -> Path:
    """YAML record, optionally preceded by a single comment header line."""
    path = Path(path)
    _ensure_parent(path)
    text = dump_record(record)
    if header is not None:
        text = f"# {header}\n{text}"
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)
    logger.debug(f"Wrote record {path}")
    return path


def read_record(path: PathLike) -> Dict[str, Any]:
    with open(path, 'r', encoding='utf-8') as f:
        loaded = yaml.safe_load(f)
    if not isinstance(loaded, dict):
        raise MalformedRecord(f"{path} does not hold a record")
    return loaded
