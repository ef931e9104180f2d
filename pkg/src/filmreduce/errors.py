"""Exception types raised by filmreduce."""


class FilmReduceError(Exception):
    """Base class for all library errors."""


class ChartSingular(FilmReduceError):
    """The chart's covariant basis degenerates (|a1 ^ a2| below the bound delta)."""


class ThicknessTooLarge(FilmReduceError):
    """det grad Psi is not positive somewhere on the evaluation grid."""


class UnsupportedChart(FilmReduceError):
    """A chart-specific formula was requested for a chart it does not cover."""


class LineSearchStalled(FilmReduceError):
    """Backtracking reached machine precision without an admissible step."""


class NonFiniteEnergy(FilmReduceError):
    """The functional evaluated to inf or nan."""


class DegenerateFit(FilmReduceError):
    """All residuals are at round-off level; a log-log slope is meaningless."""


class ConfigInvalid(FilmReduceError):
    """A run configuration failed validation. The message names the key."""
