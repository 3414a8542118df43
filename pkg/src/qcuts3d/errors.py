"""Exception hierarchy shared by all qcuts3d modules.

Each class carries a distinct process exit code so the CLI can map
failures onto stable, scriptable statuses.
"""


class QCutsError(Exception):
    """Base class for all qcuts3d errors."""

    exit_code = 1


class ArgumentError(QCutsError):
    """Invalid parameter values or mismatched shapes/dimensions."""

    exit_code = 2


class FormatError(QCutsError):
    """Malformed or inconsistent on-disk data (sidecar, dtype, size)."""

    exit_code = 3


class DataError(QCutsError):
    """Well-formed input whose content is unusable (NaN voxels, single-class truth)."""

    exit_code = 4


class DegenerateInputError(DataError):
    """Input carries no separable signal (e.g. all-identical cluster values)."""


class ConvergenceError(QCutsError):
    """Iterative solver failed to reach its tolerance."""

    exit_code = 5

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class IoError(QCutsError):
    """File could not be read or written."""

    exit_code = 6


class PlacementError(ArgumentError):
    """Phantom sphere placement failed; try fewer grains or smaller radii."""
