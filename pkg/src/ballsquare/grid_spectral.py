"""
Periodic grids, continuum-normalized Fourier transforms and radial multipliers.

Functions on R^n are approximated by their periodization on the box
[-L, L)^n sampled at N points per axis.  The transform is normalized so that

    F(xi_k) ~ integral f(x) exp(-i x . xi_k) dx,     xi_k = pi k / L,

with the inverse carrying (2 pi)^(-n).  With this convention the normalized
ball indicator has transform equal to 1 at the origin.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np
import scipy.fft as sfft

from .errors import FrequencyOverflowError, GridError, MultiplierError

__all__ = [
    "Grid", "Field", "SpectralField", "make_grid", "transform", "inverse_transform",
    "apply_radial_multiplier", "sample_gaussian", "sample_bump_j", "sample_plane_wave",
    "lp_norm", "fractional_laplacian", "riesz_potential", "laplacian",
    "unit_ball_volume",
]


def unit_ball_volume(n):
    """Lebesgue measure of the unit ball in R^n."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True)
class Grid:
    """Periodic sampling lattice on [-L, L)^n.

    Parameters
    ----------
    dim : int
        Ambient dimension n, one of 1, 2, 3.
    samples_per_axis : int
        N, a power of two, at least 8.
    half_width : float
        L > 0.
    """
    dim: int
    samples_per_axis: int
    half_width: float

    def __post_init__(self):
        n, N, L = self.dim, self.samples_per_axis, self.half_width
        if n not in (1, 2, 3):
            raise GridError(f"dim must be 1, 2 or 3, got {n}")
        if N < 8 or N & (N - 1):
            raise GridError(f"samples_per_axis must be a power of two >= 8, got {N}")
        if not L > 0:
            raise GridError(f"half_width must be positive, got {L}")

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.samples_per_axis

    @property
    def cell_volume(self):
        return self.spacing ** self.dim

    @property
    def box_volume(self):
        return (2.0 * self.half_width) ** self.dim

    @property
    def shape(self):
        return (self.samples_per_axis,) * self.dim

    @property
    def size(self):
        return self.samples_per_axis ** self.dim

    @property
    def frequency_step(self):
        return math.pi / self.half_width

    @property
    def nyquist(self):
        """pi / h, one lattice step beyond the largest sampled frequency."""
        return math.pi / self.spacing

    @property
    def max_radius(self):
        """Largest |xi| on the lattice (the corner of the frequency cube)."""
        return math.sqrt(self.dim) * self.nyquist

    @cached_property
    def axis(self):
        """Physical coordinates along one axis, -L + j h."""
        return -self.half_width + self.spacing * np.arange(self.samples_per_axis)

    @cached_property
    def frequency_axis(self):
        """Lattice frequencies pi k / L along one axis, in FFT storage order."""
        return 2 * np.pi * sfft.fftfreq(self.samples_per_axis, d=self.spacing)

    @cached_property
    def sorted_frequency_axis(self):
        """Lattice frequencies in increasing order, k = -N/2 ... N/2 - 1."""
        return np.sort(self.frequency_axis)

    def coordinates(self):
        """Open mesh of the physical coordinates (one array per axis)."""
        return np.meshgrid(*([self.axis] * self.dim), indexing="ij", sparse=True)

    @cached_property
    def position_radius(self):
        """|x| at every sample."""
        r2 = sum(c ** 2 for c in self.coordinates())
        return np.sqrt(r2) * np.ones(self.shape)

    @cached_property
    def _radius_table(self):
        k = np.meshgrid(*([self.frequency_axis] * self.dim), indexing="ij", sparse=True)
        r = np.sqrt(sum(c ** 2 for c in k)) * np.ones(self.shape)
        # radial symbols only need one evaluation per distinct |xi|
        idx = np.rint(sum((c / self.frequency_step) ** 2 for c in k)).astype(np.int64)
        idx = idx * np.ones(self.shape, dtype=np.int64)
        uniq, inverse = np.unique(idx.ravel(), return_inverse=True)
        radii = np.sqrt(uniq.astype(float)) * self.frequency_step
        return r, radii, inverse.reshape(self.shape)

    @property
    def radius(self):
        """|xi| on the lattice, in FFT storage order."""
        return self._radius_table[0]

    @property
    def distinct_radii(self):
        return self._radius_table[1]

    def radial(self, profile, where=None):
        """Evaluate a radial profile r -> m(r) on every lattice frequency.

        The profile is called once on the sorted distinct radii and scattered
        back, which is what makes symbol evaluation cheap in 2-D and 3-D.
        ``where`` (boolean over `distinct_radii`) restricts evaluation; the
        result is 0 at the other radii.
        """
        _, radii, inverse = self._radius_table
        if where is None:
            vals = np.asarray(profile(radii))
            if vals.shape != radii.shape:
                vals = np.broadcast_to(vals, radii.shape)
        else:
            sub = np.asarray(profile(radii[where]))
            vals = np.zeros(radii.shape, dtype=np.result_type(sub, float))
            vals[where] = sub
        return vals[inverse]

    def spectral_support(self, *coeffs):
        """Distinct radii at which any of the coefficient arrays is nonzero."""
        _, radii, inverse = self._radius_table
        hit = np.zeros(radii.shape, dtype=bool)
        for c in coeffs:
            hit[inverse[c != 0]] = True
        return hit


def make_grid(dim, samples_per_axis, half_width):
    """Build a `Grid`; invalid parameters raise `GridError`."""
    return Grid(int(dim), int(samples_per_axis), float(half_width))


def _check_shape(grid, arr, what):
    arr = np.asarray(arr)
    if arr.shape == grid.shape:
        return arr
    if arr.size == grid.size:
        return arr.reshape(grid.shape)
    raise GridError(f"{what} has {arr.size} entries, grid needs {grid.size}")


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a function on a `Grid`, stored with shape (N,)*n."""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _check_shape(self.grid, self.values, "field")
        vals = np.array(vals, copy=True)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def _wrap(self, values):
        return Field(self.grid, values)

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise GridError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __mul__(self, other):
        return self._wrap(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.values / self._other(other))

    def __neg__(self):
        return self._wrap(-self.values)

    def __abs__(self):
        return self._wrap(np.abs(self.values))

    @property
    def real(self):
        return self._wrap(np.real(self.values))

    def is_real(self, rtol=1e-12):
        """True when imaginary parts are below ``rtol`` times the max modulus."""
        v = self.values
        if not np.iscomplexobj(v):
            return True
        scale = np.max(np.abs(v)) if v.size else 0.0
        return bool(np.max(np.abs(v.imag), initial=0.0) <= rtol * max(scale, 1e-300))

    def mean(self):
        return complex(np.mean(self.values)) if np.iscomplexobj(self.values) \
            else float(np.mean(self.values))

    def at(self, point):
        """Sample nearest to a physical point (tuple or scalar)."""
        g = self.grid
        point = np.atleast_1d(point)
        idx = tuple(int(round((p + g.half_width) / g.spacing)) % g.samples_per_axis
                    for p in point)
        return self.values[idx]


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Continuum-normalized Fourier coefficients, in FFT storage order."""
    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(_check_shape(self.grid, self.coeffs, "spectrum"),
                     dtype=complex, copy=True)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def at_frequency(self, k):
        """Coefficient at integer lattice index k (tuple or scalar)."""
        N = self.grid.samples_per_axis
        k = np.atleast_1d(k)
        return self.coeffs[tuple(int(i) % N for i in k)]


def transform(f):
    """Field -> SpectralField with F(xi_k) = h^n sum_j f(x_j) exp(-i x_j . xi_k)."""
    g = f.grid
    # ifftshift puts x = 0 at index 0, so the DFT phase matches the continuum one
    coeffs = sfft.fftn(sfft.ifftshift(f.values)) * g.cell_volume
    return SpectralField(g, coeffs)


def inverse_transform(F, real=False):
    """SpectralField -> Field, the exact inverse of `transform`.

    With ``real=True`` the imaginary part is dropped after checking that it
    is at roundoff level relative to the largest sample.
    """
    g = F.grid
    vals = sfft.fftshift(sfft.ifftn(F.coeffs)) / g.cell_volume
    if real:
        scale = np.max(np.abs(vals))
        if np.max(np.abs(vals.imag)) > 1e-10 * max(scale, 1e-300):
            raise ValueError("inverse transform is not real to roundoff")
        vals = vals.real
    return Field(g, vals)


def _symbol_on_grid(grid, m):
    r_max = getattr(m, "r_max", None)
    if r_max is not None and r_max < grid.max_radius * (1 - 1e-12):
        raise MultiplierError(
            f"symbol {getattr(m, 'name', m)!r} valid up to r={r_max}, lattice reaches "
            f"{grid.max_radius:.6g}")
    try:
        vals = grid.radial(m)
    except (ValueError, ArithmeticError) as exc:
        raise MultiplierError(f"evaluating {getattr(m, 'name', m)!r} failed: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        bad = grid.radius[~np.isfinite(vals)]
        raise MultiplierError(
            f"symbol {getattr(m, 'name', m)!r} is not finite at lattice radius {bad.flat[0]:.6g}")
    return vals


def apply_radial_multiplier(F, m):
    """Multiply coefficients by m(|xi|).

    ``m`` is any vectorized callable of the radius; a ``r_max`` attribute, if
    present, is checked against the largest lattice radius.
    """
    return SpectralField(F.grid, F.coeffs * _symbol_on_grid(F.grid, m))


def convolve_radial(values, grid, multiplier):
    """Apply a radial multiplier to raw samples without continuum bookkeeping.

    ``multiplier`` is either a callable profile or an array already laid out
    on the lattice.  Phases and the h^n factor cancel between the forward and
    inverse transforms, so no shifts are needed.
    """
    if callable(multiplier):
        multiplier = _symbol_on_grid(grid, multiplier)
    return sfft.ifftn(sfft.fftn(values) * multiplier)


def sample_gaussian(grid, width=1.0, center=None):
    """exp(-|x - center|^2 / (2 width^2))."""
    coords = grid.coordinates()
    center = np.zeros(grid.dim) if center is None else np.atleast_1d(center)
    r2 = sum((c - x0) ** 2 for c, x0 in zip(coords, center))
    return Field(grid, np.exp(-r2 / (2.0 * width ** 2)) * np.ones(grid.shape))


def sample_plane_wave(grid, k):
    """exp(i x . xi_k) for integer lattice index k (scalar or per-axis tuple)."""
    k = np.broadcast_to(np.atleast_1d(k), (grid.dim,))
    phase = sum(c * (grid.frequency_step * kk) for c, kk in zip(grid.coordinates(), k))
    return Field(grid, np.exp(1j * phase) * np.ones(grid.shape))


def bump_budget(grid, j):
    """True when the support of psi_hat(2^-j |xi|) fits inside the lattice."""
    return 2.0 ** (j + 2) <= 0.9 * grid.nyquist


def sample_bump_j(grid, j, window):
    """The dilated counterexample bump phi_j with transform psi_hat(2^-j |xi|).

    Raises
    ------
    FrequencyOverflowError
        If 2^(j+2) exceeds 0.9 pi / h; the support is never silently cut.
    """
    if not bump_budget(grid, j):
        raise FrequencyOverflowError(
            f"bump j={j} needs |xi| up to {2.0 ** (j + 2):g}, lattice budget is "
            f"{0.9 * grid.nyquist:.6g}")
    scale = 2.0 ** (-j)
    coeffs = grid.radial(lambda r: window.psi_hat(scale * r))
    return inverse_transform(SpectralField(grid, coeffs), real=True)


def lp_norm(f, p):
    """(sum |f|^p h^n)^(1/p), or the max modulus for p = inf."""
    if not p >= 1:
        raise ValueError(f"lp_norm needs p >= 1, got {p}")
    a = np.abs(f.values if isinstance(f, Field) else f)
    m = float(np.max(a)) if a.size else 0.0
    if np.isinf(p):
        return m
    if m == 0.0:
        return 0.0
    h_n = f.grid.cell_volume
    return m * float(np.sum((a / m) ** p) * h_n) ** (1.0 / p)


def _power_symbol(power):
    def m(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        nz = r > 0
        out[nz] = r[nz] ** power
        return out
    return m


def _radial_op(f, m):
    out = convolve_radial(f.values, f.grid, m)
    return Field(f.grid, out if np.iscomplexobj(f.values) else out.real)


def fractional_laplacian(f, alpha):
    """(-Delta)^(alpha/2) f via the multiplier |xi|^alpha."""
    return _radial_op(f, _power_symbol(alpha))


def riesz_potential(f, alpha):
    """I_alpha f via |xi|^(-alpha); the zero mode is set to 0 (defined modulo constants)."""
    return _radial_op(f, _power_symbol(-alpha))


def laplacian(f):
    return _radial_op(f, lambda r: -np.asarray(r) ** 2)
