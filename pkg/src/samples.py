"""Empirical inputs: paired draws from P(X, Y) and 1-D marginal samples."""
from typing import Any, Dict, Optional

import numpy as np

from errors import EmptySample, LengthMismatch, NonFiniteSample


def as_sample(values: Any) -> np.ndarray:
    """Coerce ``values`` to a finite 1-D float array."""
    array = np.asarray(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(array)):
        raise NonFiniteSample("sample contains non-finite values")
    return array


class PairedSample:
    """Represents ``n`` paired observations (x_i, y_i)."""

    def __init__(self, x: Any, y: Any, metadata: Optional[Dict[str, Any]] = None):
        self.x = as_sample(x)
        self.y = as_sample(y)
        if self.x.size != self.y.size:
            raise LengthMismatch(f"x has {self.x.size} values but y has {self.y.size}")
        if self.x.size == 0:
            raise EmptySample("paired sample is empty")
        self.metadata = dict(metadata or {})

    @property
    def n(self) -> int:
        return int(self.x.size)

    def swapped(self) -> 'PairedSample':
        """The same draws with the roles of x and y exchanged."""
        return PairedSample(self.y, self.x, self.metadata)

    def same_draws(self, other: 'PairedSample') -> bool:
        return (
            self.n == other.n
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'x': self.x.tolist(),
            'y': self.y.tolist(),
            'metadata': self.metadata,
        }

    def __repr__(self):
        return f"PairedSample(n={self.n})"
