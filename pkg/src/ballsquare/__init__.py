"""Ball-average square functions on periodic grids."""
from .errors import (FitError, FrequencyOverflowError, GridError, MultiplierError,
                     PreconditionError, QuadratureError, ResolutionWarning)
from .grid_spectral import (Field, Grid, SpectralField, apply_radial_multiplier,
                            inverse_transform, lp_norm, make_grid, sample_bump_j,
                            sample_gaussian, transform)
from .kernels import (KernelFamily, RadialSymbol, WindowPair, build_window_pair,
                      eval_chi_hat, chi_hat_limit_coeff)

__all__ = [
    "FitError", "FrequencyOverflowError", "GridError", "MultiplierError", "PreconditionError",
    "QuadratureError", "ResolutionWarning", "Field", "Grid", "SpectralField",
    "apply_radial_multiplier", "inverse_transform", "lp_norm", "make_grid", "sample_bump_j",
    "sample_gaussian", "transform", "KernelFamily", "RadialSymbol", "WindowPair",
    "build_window_pair", "eval_chi_hat", "chi_hat_limit_coeff",
]
__version__ = "0.1.0"
