"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3, and
every other failure -> 4.
"""


class QPruneError(Exception):
    """Base class for errors raised by this package."""


class CircuitError(QPruneError, ValueError):
    """Malformed gate or circuit: unknown kind, bad arity, target out of range,
    or a state/circuit size mismatch."""


class StateError(QPruneError, ValueError):
    """Invalid quantum state or density matrix (wrong size, trace not 1)."""


class BipartitionError(QPruneError, ValueError):
    """A reduced density matrix was requested for a degenerate bipartition."""


class EncodingError(QPruneError, ValueError):
    """Input cannot be encoded: pixels outside [0, 1], an all-zero amplitude
    vector, a negative prune threshold, or mismatched grid shapes."""


class GradientError(QPruneError, ValueError):
    """The requested gradient is not defined for the given encoder."""


class DataError(QPruneError, ValueError):
    """Dataset problem: bad magic number, truncated file, ragged CSV row,
    out-of-range pixel byte, empty class, or insufficient samples."""


class ConfigError(QPruneError, ValueError):
    """Experiment configuration failed validation."""
