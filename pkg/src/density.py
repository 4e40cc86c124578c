"""Grid densities: estimation, convolution, deconvolution and validity checks.

Every density lives on a uniform 1-D grid. Two densities can be convolved or
deconvolved when their grids share the bin width; offsets and extents may
differ.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
from scipy import signal, stats

from errors import (
    DegenerateKernel,
    EmptySample,
    GridTooNarrow,
    InvalidConfig,
    InvalidDensity,
    InvalidGrid,
    StepMismatch,
)
from samples import as_sample

logger = logging.getLogger(__name__)

AUTO = 'auto'
STEP_RTOL = 1e-9
NORMALIZATION_ATOL = 1e-6
KDE_CHUNK = 4096


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``m`` bins covering [lo, hi]."""

    lo: float
    hi: float
    m: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InvalidGrid(f"grid edges must be finite, got [{self.lo}, {self.hi}]")
        if not self.hi > self.lo:
            raise InvalidGrid(f"grid needs hi > lo, got [{self.lo}, {self.hi}]")
        if int(self.m) != self.m or self.m < 8:
            raise InvalidGrid(f"grid needs at least 8 bins, got {self.m}")
        object.__setattr__(self, 'lo', float(self.lo))
        object.__setattr__(self, 'hi', float(self.hi))
        object.__setattr__(self, 'm', int(self.m))

    @classmethod
    def from_step(cls, lo: float, step: float, m: int) -> 'Grid':
        return cls(lo, lo + step * m, m)

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / self.m

    @property
    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.m) + 0.5) * self.step

    @property
    def edges(self) -> np.ndarray:
        return self.lo + np.arange(self.m + 1) * self.step

    def shifted(self, offset: float) -> 'Grid':
        return Grid(self.lo + offset, self.hi + offset, self.m)

    def to_dict(self) -> Dict[str, Any]:
        return {'lo': self.lo, 'hi': self.hi, 'm': self.m}


def _same_step(a: Grid, b: Grid) -> bool:
    return abs(a.step - b.step) <= STEP_RTOL * max(a.step, b.step)


def _bin_lookup(grid: Grid, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Piecewise-constant evaluation, zero outside the grid."""
    index = np.floor((points - grid.lo) / grid.step).astype(int)
    inside = (index >= 0) & (index < grid.m)
    out = np.zeros(points.shape, dtype=float)
    out[inside] = values[index[inside]]
    return out


@dataclass(frozen=True, eq=False)
class SignedGridFn:
    """Unconstrained real values on a grid, e.g. a raw deconvolution result."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.m,):
            raise InvalidGrid(f"expected {self.grid.m} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidDensity("grid function has non-finite values")
        object.__setattr__(self, 'values', values)

    @property
    def total(self) -> float:
        return float(np.sum(self.values) * self.grid.step)

    def mean(self) -> float:
        total = self.total
        if total == 0:
            return 0.0
        return float(np.sum(self.values * self.grid.centers) * self.grid.step / total)

    def lookup(self, points: Any) -> np.ndarray:
        return _bin_lookup(self.grid, self.values, np.asarray(points, dtype=float))


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Nonnegative density on a grid that integrates to one."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.m,):
            raise InvalidGrid(f"expected {self.grid.m} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidDensity("density values must be finite and nonnegative")
        mass = float(np.sum(values) * self.grid.step)
        if abs(mass - 1.0) > NORMALIZATION_ATOL:
            raise InvalidDensity(f"density integrates to {mass}, expected 1")
        object.__setattr__(self, 'values', values)

    @classmethod
    def normalized(cls, grid: Grid, values: Any) -> 'GridDensity':
        """Clip negative values to zero and rescale to unit mass."""
        values = np.clip(np.asarray(values, dtype=float), 0.0, None)
        mass = np.sum(values) * grid.step
        if not mass > 0:
            raise InvalidDensity("cannot normalize a grid function with no positive mass")
        return cls(grid, values / mass)

    @property
    def step(self) -> float:
        return self.grid.step

    @property
    def masses(self) -> np.ndarray:
        return self.values * self.grid.step

    def mean(self) -> float:
        return float(np.sum(self.masses * self.grid.centers))

    def std(self) -> float:
        centers = self.grid.centers
        mu = np.sum(self.masses * centers)
        return float(np.sqrt(max(np.sum(self.masses * (centers - mu) ** 2), 0.0)))

    def evaluate(self, points: Any) -> np.ndarray:
        """Linear interpolation between bin centers, zero outside the grid."""
        points = np.asarray(points, dtype=float)
        return np.interp(points, self.grid.centers, self.values, left=0.0, right=0.0)

    def lookup(self, points: Any) -> np.ndarray:
        return _bin_lookup(self.grid, self.values, np.asarray(points, dtype=float))

    def cdf(self, points: Any) -> np.ndarray:
        """CDF of the piecewise-constant density."""
        cumulative = np.concatenate([[0.0], np.cumsum(self.masses)])
        cumulative = np.minimum(cumulative / cumulative[-1], 1.0)
        return np.interp(np.asarray(points, dtype=float), self.grid.edges, cumulative,
                         left=0.0, right=1.0)

    def quantile(self, probabilities: Any) -> np.ndarray:
        cumulative = np.concatenate([[0.0], np.cumsum(self.masses)])
        cumulative = cumulative / cumulative[-1]
        keep = np.concatenate([[True], np.diff(cumulative) > 0])
        return np.interp(np.asarray(probabilities, dtype=float), cumulative[keep],
                         self.grid.edges[keep])

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.quantile(rng.uniform(size=n))

    def recentered(self) -> 'GridDensity':
        """Translate the grid so the density has mean zero."""
        return GridDensity(self.grid.shifted(-self.mean()), self.values)

    def regrid(self, grid: Grid) -> 'GridDensity':
        """Mass-preserving transfer onto another grid."""
        masses = np.diff(self.cdf(grid.edges))
        return GridDensity.normalized(grid, masses / grid.step)

    def support(self, mass_cut: float = 1e-9) -> tuple:
        """Smallest interval outside of which at most ``mass_cut`` mass lies on each side."""
        lo, hi = self.quantile([mass_cut, 1.0 - mass_cut])
        return float(lo), float(hi)

    def as_signed(self) -> SignedGridFn:
        return SignedGridFn(self.grid, self.values.copy())

    def to_dict(self) -> Dict[str, Any]:
        return {
            'version': 1,
            'lo': self.grid.lo,
            'hi': self.grid.hi,
            'm': self.grid.m,
            'values': self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, record: Dict[str, Any]) -> 'GridDensity':
        grid = Grid(record['lo'], record['hi'], record['m'])
        return cls(grid, np.asarray(record['values'], dtype=float))


@dataclass(frozen=True)
class ValidityReport:
    negative_mass: float
    total_mass_error: float
    is_valid: bool
    tolerance_used: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'negative_mass': float(self.negative_mass),
            'total_mass_error': float(self.total_mass_error),
            'is_valid': bool(self.is_valid),
            'tolerance_used': float(self.tolerance_used),
        }


@dataclass(frozen=True, eq=False)
class GaussianDecomposition:
    sigma_max: float
    remainder: GridDensity
    clipped_mass: float = 0.0
    validity: Optional[ValidityReport] = field(default=None, compare=False)


GridFunction = Union[GridDensity, SignedGridFn]


def l1_distance(p: GridFunction, q: GridFunction) -> float:
    """L1 distance between two piecewise-constant grid functions.

    The grids may differ in step, offset and extent; each function is zero
    outside its own grid.
    """
    edges = np.union1d(p.grid.edges, q.grid.edges)
    midpoints = 0.5 * (edges[1:] + edges[:-1])
    widths = np.diff(edges)
    difference = _bin_lookup(p.grid, p.values, midpoints) - _bin_lookup(q.grid, q.values, midpoints)
    return float(np.sum(np.abs(difference) * widths))


# Constructors

def silverman_bandwidth(samples: Any) -> float:
    """Rule-of-thumb bandwidth 1.06 * sigma * n^(-1/5), with a positive floor."""
    samples = as_sample(samples)
    if samples.size == 0:
        raise EmptySample("cannot choose a bandwidth for an empty sample")
    sigma = float(np.std(samples, ddof=1)) if samples.size > 1 else 0.0
    bandwidth = 1.06 * sigma * samples.size ** (-0.2)
    if bandwidth <= 0:
        bandwidth = 1e-8 * max(1.0, float(np.max(np.abs(samples))))
    return bandwidth


def bin_integrated(grid: Grid, cdf) -> GridDensity:
    """Density whose bin masses are CDF increments across the bin edges."""
    masses = np.diff(cdf(grid.edges))
    return GridDensity.normalized(grid, masses / grid.step)


def delta_density(grid: Grid, at: float = 0.0) -> GridDensity:
    index = int(np.floor((at - grid.lo) / grid.step))
    if not 0 <= index < grid.m:
        raise GridTooNarrow(f"point {at} lies outside [{grid.lo}, {grid.hi}]")
    values = np.zeros(grid.m)
    values[index] = 1.0 / grid.step
    return GridDensity(grid, values)


def gaussian_density(grid: Grid, mean: float, sigma: float) -> GridDensity:
    """N(mean, sigma^2) on the grid, bin-integrated and renormalized."""
    if sigma <= 0:
        return delta_density(grid, mean)
    return bin_integrated(grid, stats.norm(loc=mean, scale=sigma).cdf)


def uniform_density(grid: Grid, a: float, b: float) -> GridDensity:
    return bin_integrated(grid, stats.uniform(loc=a, scale=b - a).cdf)


def centered_grid(step: float, half_width: float, min_bins: int = 9) -> Grid:
    """Odd-sized grid with a bin centered exactly at zero."""
    half = max(int(math.ceil(half_width / step)), (min_bins - 1) // 2)
    m = 2 * half + 1
    return Grid(-(half + 0.5) * step, (half + 0.5) * step, m)


def gaussian_kernel(step: float, sigma: float, width: float = 6.0) -> GridDensity:
    """Zero-mean Gaussian on a centered grid of the given bin width."""
    grid = centered_grid(step, width * max(sigma, 0.0))
    return gaussian_density(grid, 0.0, sigma)


def aligned_grid(samples: Any, bandwidth: float, step: float, pad: float = 3.0) -> Grid:
    """Grid of bin width ``step`` covering the samples padded by ``pad`` bandwidths."""
    samples = as_sample(samples)
    if samples.size == 0:
        raise EmptySample("cannot build a grid around an empty sample")
    margin = pad * bandwidth + step
    lo = float(np.min(samples)) - margin
    hi = float(np.max(samples)) + margin
    m = max(int(math.ceil((hi - lo) / step)), 8)
    return Grid.from_step(lo, step, m)


def auto_grid(samples: Any, bandwidth: float, m: int, pad: float = 3.0) -> Grid:
    """Grid of ``m`` bins covering the samples padded by ``pad`` bandwidths."""
    samples = as_sample(samples)
    if samples.size == 0:
        raise EmptySample("cannot build a grid around an empty sample")
    margin = (pad + 0.5) * bandwidth
    return Grid(float(np.min(samples)) - margin, float(np.max(samples)) + margin, m)


# Operations

def kde(samples: Any, grid: Grid, bandwidth: Union[float, str] = AUTO,
        pad: float = 3.0) -> GridDensity:
    """Gaussian kernel density estimate evaluated at the bin centers."""
    samples = as_sample(samples)
    if samples.size == 0:
        raise EmptySample("kde needs at least one sample")
    if bandwidth is None or bandwidth == AUTO:
        bandwidth = silverman_bandwidth(samples)
    bandwidth = float(bandwidth)
    if not bandwidth > 0:
        raise InvalidConfig(f"bandwidth must be positive, got {bandwidth}")

    slack = 1e-9 * max(1.0, abs(grid.lo), abs(grid.hi))
    needed_lo = float(np.min(samples)) - pad * bandwidth
    needed_hi = float(np.max(samples)) + pad * bandwidth
    if needed_lo < grid.lo - slack or needed_hi > grid.hi + slack:
        raise GridTooNarrow(
            f"samples padded by {pad} bandwidths span [{needed_lo:.6g}, {needed_hi:.6g}], "
            f"grid covers [{grid.lo:.6g}, {grid.hi:.6g}]"
        )

    if bandwidth < 0.5 * grid.step:
        counts, _ = np.histogram(samples, bins=grid.edges)
        return GridDensity.normalized(grid, counts.astype(float))

    centers = grid.centers
    values = np.zeros(grid.m)
    for start in range(0, samples.size, KDE_CHUNK):
        chunk = samples[start:start + KDE_CHUNK]
        z = (centers[:, None] - chunk[None, :]) / bandwidth
        values += np.exp(-0.5 * z * z).sum(axis=1)
    values /= samples.size * bandwidth * math.sqrt(2.0 * math.pi)
    return GridDensity.normalized(grid, values)


def convolve(a: GridDensity, b: GridDensity) -> GridDensity:
    """Density of the sum of independent draws from ``a`` and ``b``."""
    if not _same_step(a.grid, b.grid):
        raise StepMismatch(f"steps differ: {a.grid.step} vs {b.grid.step}")
    step = a.grid.step
    values = signal.convolve(a.values, b.values, method='fft') * step
    m = a.grid.m + b.grid.m - 1
    grid = Grid.from_step(a.grid.lo + b.grid.lo + 0.5 * step, step, m)
    return GridDensity.normalized(grid, values)


def deconvolve(c: GridFunction, a: GridDensity, reg: float = 1e-6) -> SignedGridFn:
    """Signed candidate ``b`` such that ``convolve(a, b)`` reproduces ``c``.

    Division in the frequency domain with Tikhonov damping
    ``conj(A) / (|A|^2 + reg * max|A|^2)``.
    """
    if not _same_step(c.grid, a.grid):
        raise StepMismatch(f"steps differ: {c.grid.step} vs {a.grid.step}")
    if reg < 0:
        raise InvalidConfig(f"reg must be nonnegative, got {reg}")
    step = c.grid.step
    n = c.grid.m + a.grid.m - 1

    spectrum_a = np.fft.rfft(a.values * step, n)
    power = np.abs(spectrum_a) ** 2
    peak = float(np.max(power))
    if not peak > 1e-24:
        raise DegenerateKernel("kernel spectrum is numerically zero")
    denominator = power + reg * peak
    spectrum_c = np.fft.rfft(c.values * step, n)
    ratio = np.zeros_like(spectrum_c)
    nonzero = denominator > 0
    ratio[nonzero] = spectrum_c[nonzero] * np.conj(spectrum_a[nonzero]) / denominator[nonzero]
    masses = np.fft.irfft(ratio, n)

    # place the kernel's center of mass at index zero so negative offsets do not wrap
    shift = int(round(float(np.sum(a.masses * np.arange(a.grid.m)))))
    masses = np.roll(masses, shift)
    grid = Grid.from_step(c.grid.lo - a.grid.lo - 0.5 * step - shift * step, step, n)
    return SignedGridFn(grid, masses / step)


def validity(f: GridFunction, tolerance: float) -> ValidityReport:
    """Certify whether a signed grid function is a density within ``tolerance``."""
    step = f.grid.step
    total = float(np.sum(f.values) * step)
    total_mass_error = abs(total - 1.0)
    if total > 0:
        negative_mass = float(np.sum(np.clip(-f.values / total, 0.0, None)) * step)
    else:
        negative_mass = 1.0
    is_valid = negative_mass <= tolerance and total_mass_error <= tolerance
    return ValidityReport(negative_mass, total_mass_error, bool(is_valid), float(tolerance))


def clip_to_density(f: GridFunction) -> tuple:
    """Clip the negative part, renormalize; returns the density and the clipped mass."""
    total = float(np.sum(f.values) * f.grid.step)
    scale = total if total > 0 else 1.0
    clipped = float(np.sum(np.clip(-f.values / scale, 0.0, None)) * f.grid.step)
    return GridDensity.normalized(f.grid, f.values), clipped


def refine_remainder(d: GridDensity, kernel: GridDensity, start: GridDensity,
                     iterations: int = 500) -> GridDensity:
    """Multiplicative nonnegative refinement of ``start`` so ``start * kernel`` fits ``d``.

    Each step rescales the estimate by the kernel-smoothed ratio of ``d``
    to the current reconvolution. Bins at zero stay at zero and mass
    inconsistent with ``d`` drains away; the estimate lives on ``d``'s grid.
    """
    if not (_same_step(d.grid, kernel.grid) and _same_step(d.grid, start.grid)):
        raise StepMismatch("refinement needs a shared bin width")
    target = d.masses
    weights = kernel.masses
    flipped = weights[::-1]
    estimate = start.regrid(d.grid).masses
    floor = 1e-12 * float(np.max(target))
    for _ in range(int(iterations)):
        blurred = signal.convolve(estimate, weights, mode='same', method='fft')
        ratio = np.divide(target, blurred, out=np.zeros_like(target), where=blurred > floor)
        estimate = np.clip(estimate * signal.convolve(ratio, flipped, mode='same',
                                                      method='fft'), 0.0, None)
        estimate /= np.sum(estimate)
    return GridDensity.normalized(d.grid, estimate)


def max_gaussian_deconvolve(d: GridDensity, tolerance: float, reg: float = 1e-16,
                            resolution: float = 1e-3,
                            iterations: int = 500) -> GaussianDecomposition:
    """Split off the widest zero-mean Gaussian factor of ``d``.

    Bisection on sigma over [0, std(d)]: a width is feasible when the
    Tikhonov deconvolution of ``d`` by N(0, sigma^2), with ``reg`` relative
    to the kernel's peak power, passes ``validity`` at ``tolerance``. Grid
    exact inputs tolerate a tiny ``reg``; densities estimated from samples
    need one at the level of their sampling noise.

    The remainder starts from the clipped deconvolution at the chosen width
    and is refined by ``refine_remainder``, which removes the ringing the
    spectral cutoff leaves behind.
    """
    spread = d.std()
    if spread <= 0.5 * d.step or np.count_nonzero(d.values) <= 1:
        return GaussianDecomposition(0.0, d)

    def attempt(sigma: float) -> SignedGridFn:
        return deconvolve(d, gaussian_kernel(d.step, sigma), reg)

    if validity(attempt(spread), tolerance).is_valid:
        sigma_max = spread
    else:
        lo, hi = 0.0, spread
        while hi - lo > resolution * spread:
            mid = 0.5 * (lo + hi)
            if validity(attempt(mid), tolerance).is_valid:
                lo = mid
            else:
                hi = mid
        sigma_max = lo
    logger.debug(f"Maximal Gaussian width {sigma_max:.6g} (std {spread:.6g}, tol {tolerance:.3g})")

    if sigma_max < 0.5 * d.step:
        return GaussianDecomposition(0.0, d)
    raw = attempt(sigma_max)
    start, clipped = clip_to_density(raw)
    remainder = refine_remainder(d, gaussian_kernel(d.step, sigma_max), start, iterations)
    return GaussianDecomposition(sigma_max, remainder, clipped, validity(raw, tolerance))


def calibrate_tolerance(null_draws: Sequence[float], quantile: float = 0.95,
                        floor: float = 1e-6) -> float:
    """Empirical ``quantile`` of a bootstrap null, never below ``floor``."""
    draws = np.asarray(null_draws, dtype=float)
    draws = draws[np.isfinite(draws)]
    if draws.size == 0:
        return floor
    return max(float(np.quantile(draws, quantile)), floor)
