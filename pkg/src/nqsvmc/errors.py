"""Exception and warning types shared across the package."""


class NqsVmcError(Exception):
    """Base class for all package errors."""


class OddDimension(NqsVmcError):
    """Lattice dimension is odd, so the checkerboard partition is undefined."""


class DimensionTooSmall(NqsVmcError):
    """Lattice dimension below the supported minimum."""


class NotSquare(NqsVmcError):
    """Operation requires lx == ly."""


class UnsupportedIrrep(NqsVmcError):
    """Requested irreducible representation is not one-dimensional."""


class SectorTooLarge(NqsVmcError):
    """Fixed-magnetization sector exceeds the enumeration cap."""


class ZeroAmplitude(NqsVmcError):
    """Wave function vanishes at a configuration where a finite value is required."""


class ZeroAmplitudeReference(ZeroAmplitude):
    """Local energy requested at a configuration with vanishing amplitude."""


class FactorizationFailure(NqsVmcError):
    """Regularized normal matrix is numerically not positive definite."""


class NoConvergence(NqsVmcError):
    """Iterative eigensolver did not converge within the iteration budget."""


class SingularM(NqsVmcError):
    """Inversion subset yields a non-invertible coefficient matrix."""


class ConfigError(NqsVmcError):
    """Run configuration failed validation; message names the offending key."""


class CheckpointMismatch(NqsVmcError):
    """Checkpoint metadata does not match the requested run configuration."""


class NonErgodicWarning(UserWarning):
    """Batch acceptance collapsed below the ergodicity threshold."""
