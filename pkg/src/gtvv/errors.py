"""Exception types shared across the package."""


class GtvvError(Exception):
    """Base class for pipeline-specific failures."""


class ConfigError(GtvvError):
    """Invalid experiment configuration (CLI exit code 2)."""


class SilentFrameError(GtvvError):
    """Every frequency bin of a frame fell below the reference-output floor."""


class EstimatorDegenerateError(GtvvError):
    """The least-squares system for a bin is rank deficient (stationary source)."""

    def __init__(self, bin_index, message=None):
        self.bin_index = bin_index
        super().__init__(message or f"degenerate estimator system at bin {bin_index}")


class InconsistentSpectrumError(GtvvError):
    """Hermitian-extended spectrum produced a non-negligible imaginary part."""


class ExpansionInvalidError(GtvvError):
    """Geometric-series expansion requested with some |g*beta| >= 1."""
