"""Seeded synthetic cause-effect data with known ground truth."""
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from density import Grid, GridDensity, bin_integrated
from errors import InvalidConfig, UnknownMechanism
from samples import PairedSample
from scenarios.base import ConditionalPredictor, Direction

logger = logging.getLogger(__name__)

MECHANISMS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    'identity': lambda c: c,
    'square': lambda c: c ** 2,
    'cube': lambda c: c ** 3,
    'tanh3': lambda c: np.tanh(3.0 * c),
    'cube_plus': lambda c: c ** 3 + c,
}

# kind -> parameter names
DISTRIBUTIONS: Dict[str, Tuple[str, ...]] = {
    'uniform': ('a', 'b'),
    'gaussian': ('mu', 'sigma'),
    'laplace': ('loc', 'b'),
    'mixture2': ('mu1', 'sigma1', 'mu2', 'sigma2', 'w'),
}

_CALL = re.compile(r'^\s*([a-z0-9_]+)\s*\((.*)\)\s*$')


def mechanism(name: str) -> Callable[[np.ndarray], np.ndarray]:
    if name not in MECHANISMS:
        raise UnknownMechanism(f"unknown mechanism '{name}', expected {sorted(MECHANISMS)}")
    return MECHANISMS[name]


@dataclass(frozen=True)
class Distribution:
    """A named scalar law with its parameters, written like ``gaussian(0, 0.3)``."""

    kind: str
    params: Tuple[float, ...]

    def __post_init__(self):
        if self.kind not in DISTRIBUTIONS:
            raise InvalidConfig(f"unknown distribution '{self.kind}', "
                                f"expected one of {sorted(DISTRIBUTIONS)}")
        params = tuple(float(p) for p in self.params)
        names = DISTRIBUTIONS[self.kind]
        if len(params) != len(names):
            raise InvalidConfig(f"{self.kind} takes {len(names)} parameters {names}, "
                                f"got {len(params)}")
        if not all(np.isfinite(params)):
            raise InvalidConfig(f"{self.kind} parameters must be finite, got {params}")
        object.__setattr__(self, 'params', params)
        self._check_scales()

    def _check_scales(self):
        p = self.params
        if self.kind == 'uniform' and not p[1] > p[0]:
            raise InvalidConfig(f"uniform({p[0]}, {p[1]}) needs b > a")
        if self.kind in ('gaussian', 'laplace') and not p[1] > 0:
            raise InvalidConfig(f"{self.kind} scale must be positive, got {p[1]}")
        if self.kind == 'mixture2':
            if not (p[1] > 0 and p[3] > 0):
                raise InvalidConfig(f"mixture2 scales must be positive, got {p[1]}, {p[3]}")
            if not 0 < p[4] < 1:
                raise InvalidConfig(f"mixture2 weight must lie in (0, 1), got {p[4]}")

    @classmethod
    def parse(cls, text: str) -> 'Distribution':
        match = _CALL.match(str(text).lower())
        if not match:
            raise InvalidConfig(f"cannot parse distribution '{text}', expected kind(params)")
        kind, body = match.groups()
        try:
            params = tuple(float(p) for p in body.split(',')) if body.strip() else ()
        except ValueError as e:
            raise InvalidConfig(f"non-numeric parameter in '{text}'") from e
        return cls(kind, params)

    def __str__(self):
        return f"{self.kind}({', '.join(repr(p) for p in self.params)})"

    def _components(self) -> List[Tuple[float, Any]]:
        p = self.params
        if self.kind == 'uniform':
            return [(1.0, stats.uniform(loc=p[0], scale=p[1] - p[0]))]
        if self.kind == 'gaussian':
            return [(1.0, stats.norm(loc=p[0], scale=p[1]))]
        if self.kind == 'laplace':
            return [(1.0, stats.laplace(loc=p[0], scale=p[1]))]
        return [(p[4], stats.norm(loc=p[0], scale=p[1])),
                (1.0 - p[4], stats.norm(loc=p[2], scale=p[3]))]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        components = self._components()
        if len(components) == 1:
            return components[0][1].rvs(size=n, random_state=rng)
        first = rng.uniform(size=n) < components[0][0]
        draws = components[1][1].rvs(size=n, random_state=rng)
        draws[first] = components[0][1].rvs(size=int(first.sum()), random_state=rng)
        return draws

    def mean(self) -> float:
        return float(sum(w * law.mean() for w, law in self._components()))

    def std(self) -> float:
        components = self._components()
        mu = self.mean()
        second = sum(w * (law.var() + law.mean() ** 2) for w, law in components)
        return float(np.sqrt(max(second - mu ** 2, 0.0)))

    def pdf(self, points: Any) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return sum(w * law.pdf(points) for w, law in self._components())

    def cdf(self, points: Any) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return sum(w * law.cdf(points) for w, law in self._components())

    def centered(self) -> 'CenteredLaw':
        return CenteredLaw(self)


@dataclass(frozen=True)
class CenteredLaw:
    """``base`` translated to mean zero."""

    base: Distribution

    def pdf(self, points: Any) -> np.ndarray:
        return self.base.pdf(np.asarray(points, dtype=float) + self.base.mean())

    def cdf(self, points: Any) -> np.ndarray:
        return self.base.cdf(np.asarray(points, dtype=float) + self.base.mean())


def _distribution(value: Any) -> Distribution:
    return value if isinstance(value, Distribution) else Distribution.parse(value)


@dataclass(frozen=True)
class GeneratorSpec:
    """E = mechanism(C) + N with C ~ cause and N ~ noise re-centred to mean zero."""

    mechanism: str
    cause: Distribution
    noise: Distribution
    n: int
    seed: int = 0

    def __post_init__(self):
        mechanism(self.mechanism)
        object.__setattr__(self, 'cause', _distribution(self.cause))
        object.__setattr__(self, 'noise', _distribution(self.noise))
        if int(self.n) != self.n or self.n <= 0:
            raise InvalidConfig(f"n must be a positive integer, got {self.n}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise InvalidConfig(f"seed must be a nonnegative integer, got {self.seed}")
        object.__setattr__(self, 'n', int(self.n))
        object.__setattr__(self, 'seed', int(self.seed))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mechanism': self.mechanism,
            'cause': str(self.cause),
            'noise': str(self.noise),
            'n': self.n,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, record: Dict[str, Any]) -> 'GeneratorSpec':
        try:
            return cls(record['mechanism'], record['cause'], record['noise'], record['n'],
                       record.get('seed', 0))
        except KeyError as e:
            raise InvalidConfig(f"generator spec is missing {e}") from e

    def effect(self, causes: Any) -> np.ndarray:
        return mechanism(self.mechanism)(np.asarray(causes, dtype=float))


def _draw(spec: GeneratorSpec, rng: np.random.Generator, n: int) -> PairedSample:
    causes = spec.cause.sample(rng, n)
    noise = spec.noise.sample(rng, n) - spec.noise.mean()
    return PairedSample(causes, spec.effect(causes) + noise, {'generator': spec.to_dict()})


def generate(spec: GeneratorSpec) -> PairedSample:
    """Cause-effect pairs (x = cause, y = effect), deterministic in ``spec.seed``."""
    sample = _draw(spec, np.random.default_rng(spec.seed), spec.n)
    logger.debug(f"Generated {spec.n} pairs from {spec.to_dict()}")
    return sample


SHIFT_FIELDS = ('cause', 'noise', 'mechanism')


@dataclass(frozen=True)
class Shift:
    """Replacement of exactly one generator component, written ``noise:gaussian(0, 2)``."""

    field: str
    value: Any

    def __post_init__(self):
        if self.field not in SHIFT_FIELDS:
            raise InvalidConfig(f"shift field must be one of {SHIFT_FIELDS}, got '{self.field}'")
        if self.field == 'mechanism':
            mechanism(self.value)
        else:
            object.__setattr__(self, 'value', _distribution(self.value))

    @classmethod
    def parse(cls, text: str) -> 'Shift':
        name, sep, value = str(text).partition(':')
        if not sep:
            raise InvalidConfig(f"cannot parse shift '{text}', expected e.g. noise:gaussian(0, 2)")
        return cls(name.strip(), value.strip())

    def apply(self, base: GeneratorSpec) -> GeneratorSpec:
        return replace(base, **{self.field: self.value})

    def __str__(self):
        return f"{self.field}:{self.value}"


@dataclass(frozen=True, eq=False)
class ShiftPair:
    train: PairedSample
    extra: PairedSample
    truth: Dict[str, Any] = field(default_factory=dict)


def generate_shift_pair(base: GeneratorSpec, shift: Optional[Shift], n_extra: int) -> ShiftPair:
    """Training pairs from ``base`` and extra pairs from ``base`` with one substitution.

    ``shift=None`` draws the extra pairs from the unchanged generator.
    """
    if int(n_extra) != n_extra or n_extra <= 0:
        raise InvalidConfig(f"n_extra must be a positive integer, got {n_extra}")
    shifted = shift.apply(base) if shift is not None else base
    before, after = base.to_dict(), shifted.to_dict()
    changed = [name for name in SHIFT_FIELDS if before[name] != after[name]]
    if shift is not None and len(changed) != 1:
        raise InvalidConfig(f"shift {shift} must change exactly one component, changed {changed}")

    train = generate(base)
    extra = _draw(shifted, np.random.default_rng([base.seed, 1]), int(n_extra))
    truth = {
        'version': 1,
        'base': before,
        'shifted': after,
        'shift': str(shift) if shift is not None else None,
        'changed_fields': changed,
        'n_extra': int(n_extra),
    }
    logger.info(f"Generated {train.n} training and {extra.n} extra pairs, "
                f"changed {changed or 'nothing'}")
    return ShiftPair(train, extra, truth)


def oriented(pairs: PairedSample, direction: Direction) -> PairedSample:
    """Cause-effect pairs laid out as (input, output) for the prediction direction."""
    return pairs if Direction(direction) == Direction.CAUSAL else pairs.swapped()


def true_prior(spec: GeneratorSpec, grid: Grid) -> GridDensity:
    """Bin-integrated cause law on ``grid``."""
    return bin_integrated(grid, spec.cause.cdf)


def oracle_conditional(spec: GeneratorSpec, direction: Direction, x_grid: Grid,
                       y_grid: Grid) -> ConditionalPredictor:
    """True P(Y | X) on the prediction grids.

    Causal: rows are the centred noise law shifted by the mechanism, bin
    integrated over y. Anticausal: Bayes' rule with the true cause law as the
    prior over y and the noise density at each input as the likelihood.
    """
    noise = spec.noise.centered()
    if Direction(direction) == Direction.CAUSAL:
        location = spec.effect(x_grid.centers)
        upper = noise.cdf(y_grid.edges[None, 1:] - location[:, None])
        lower = noise.cdf(y_grid.edges[None, :-1] - location[:, None])
        table = np.clip(upper - lower, 0.0, None) / y_grid.step
    else:
        prior_mass = np.diff(spec.cause.cdf(y_grid.edges))
        images = spec.effect(y_grid.centers)
        likelihood = noise.pdf(x_grid.centers[:, None] - images[None, :])
        table = likelihood * prior_mass[None, :] / y_grid.step
    provenance = {'route': 'oracle', 'generator': spec.to_dict(),
                  'direction': Direction(direction).value}
    return ConditionalPredictor.from_table(x_grid, y_grid, table, provenance)
