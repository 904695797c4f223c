"""Exception types shared across the library."""


class XnpfError(Exception):
    """Base class for all library-specific errors."""


class AllWeightsZero(XnpfError):
    """Every particle weight is zero (or the sum is non-finite).

    Signals filter divergence: the caller must abort the run or
    reinitialize the cloud. Never silently reset to uniform.
    """


class LengthMismatch(XnpfError):
    """Two series that must have equal length do not."""


class WeightsNotNormalized(XnpfError):
    """An operation requiring normalized weights received weights
    whose sum differs from 1 beyond tolerance."""


class NumericalFailure(XnpfError):
    """A linear-algebra routine failed to converge or produced
    non-finite values."""


class ConfigError(XnpfError):
    """An experiment configuration is malformed: unknown keys,
    missing fields, or values outside their legal range."""


class NoSuccessfulRuns(XnpfError):
    """Every run in an experiment failed; there is nothing to aggregate."""
