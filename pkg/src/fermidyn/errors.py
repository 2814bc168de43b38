"""Exception and warning types shared across the package."""


class FermidynError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(FermidynError):
    """A matrix block does not match the expected sector dimensions."""


class LevelError(FermidynError):
    """A sector-decomposition operation was asked below level zero."""


class OpenBoundaryClipError(FermidynError):
    """A translation would push declared support off an open chain."""


class QuadratureNotConverged(FermidynError):
    """Node doubling changed an integral by more than the requested tolerance."""


class TailBoundExceeded(FermidynError):
    """The analytic Dyson tail bound at the requested order exceeds tolerance."""


class KernelMismatch(FermidynError):
    """Kernel-built interaction commutator disagrees with the matrix commutator."""


class OverflowGuardError(FermidynError):
    """beta * spectral spread too large for stable complex-time conjugation."""


class FrequencyCoverageError(FermidynError):
    """A weighted Bohr frequency falls outside the test function's support."""


class ConfigError(FermidynError):
    """Experiment configuration failed validation."""


class BudgetError(FermidynError):
    """Requested sector dimensions exceed the configured memory budget."""


class TruncationWarning(UserWarning):
    """Reported particle-number truncation tail is not negligible."""
