"""Exception and warning types shared across the package."""


class GridError(ValueError):
    """Invalid grid parameters or mismatched grids."""


class FrequencyOverflowError(ValueError):
    """A requested frequency support does not fit inside the lattice."""


class MultiplierError(ValueError):
    """A radial symbol could not be evaluated on the lattice radii."""


class QuadratureError(RuntimeError):
    """Numerical quadrature or extrapolation failed to converge."""


class FitError(ValueError):
    """Too few usable points for an exponent fit."""


class PreconditionError(ValueError):
    """Parameters fall outside the hypotheses an operation is defined for."""


class ResolutionWarning(UserWarning):
    """Truncation of a t-window or kernel is visible at the requested tolerance."""
