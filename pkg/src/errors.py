"""Exception hierarchy for causeshift.

Input problems subclass ``ValueError`` so callers that only care about bad
arguments can catch them generically. Model-level failures (a fit that does
not support the requested inference) subclass ``RuntimeError``.
"""


class CauseShiftError(Exception):
    """Root of every error raised by this package."""


# Input errors

class EmptySample(CauseShiftError, ValueError):
    pass


class InvalidGrid(CauseShiftError, ValueError):
    pass


class GridTooNarrow(CauseShiftError, ValueError):
    pass


class StepMismatch(CauseShiftError, ValueError):
    pass


class DegenerateKernel(CauseShiftError, ValueError):
    pass


class LengthMismatch(CauseShiftError, ValueError):
    pass


class TooFewSamples(CauseShiftError, ValueError):
    pass


class DegenerateInput(CauseShiftError, ValueError):
    pass


class TooFewDatasets(CauseShiftError, ValueError):
    pass


class RankDeficient(CauseShiftError, ValueError):
    pass


class DimensionMismatch(CauseShiftError, ValueError):
    pass


class NonInvertiblePsi(CauseShiftError, ValueError):
    pass


class NonInjectivePhi(CauseShiftError, ValueError):
    pass


class TypeMismatch(CauseShiftError, ValueError):
    pass


class ShapeMismatch(CauseShiftError, ValueError):
    pass


class UnknownMechanism(CauseShiftError, ValueError):
    pass


class InvalidConfig(CauseShiftError, ValueError):
    pass


class InvalidScenario(InvalidConfig):
    """A scenario description that violates its own invariants."""


class InvalidDensity(CauseShiftError, ValueError):
    """Grid values that cannot be, or cannot be turned into, a probability density."""


class NonFiniteSample(CauseShiftError, ValueError):
    pass


class MalformedCsv(CauseShiftError, ValueError):
    pass


class MalformedRecord(CauseShiftError, ValueError):
    pass


# Model-level failures

class NonFiniteObjective(CauseShiftError, RuntimeError):
    pass


class InvalidDeconvolution(CauseShiftError, RuntimeError):
    """A deconvolution result is not a probability density within tolerance."""


class AnmMisfit(CauseShiftError, RuntimeError):
    """The training data is not explained by an additive noise model."""


class NonMonotonePhi(CauseShiftError, RuntimeError):
    pass


class UnsupportedScenario(CauseShiftError, RuntimeError):
    pass
