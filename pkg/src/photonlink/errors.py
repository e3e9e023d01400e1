"""Exception types shared across modules."""


class ConfigError(ValueError):
    """Configuration file or override is invalid."""


class NumericsError(RuntimeError):
    """A numeric procedure failed to converge or found no solution."""


class RootBracketError(NumericsError):
    """No sign change found in the search interval."""


class NotSaturatingError(NumericsError):
    """The excitation curve never drops 3 dB within the sweep range."""


class FitConvergenceError(NumericsError):
    """Least-squares iteration hit its cap without converging."""
