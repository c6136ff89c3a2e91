"""
Ball averages and the square functions built from them.

Every square function has the form

    Q(f)(x)^2 = sum_k w_k  P_{t_k}( |F_{t_k}|^2 )(x),

where F_t is a radial multiplier applied to the input(s), and P_t is the
identity (g-functions), the ball average B_t times |B(0,1)| (area
functions), B_t alone (S-tilde) or convolution with the g*_lambda weight.
Because P_t is linear, the per-node contributions are accumulated in
frequency space and transformed back once.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
import warnings

import numpy as np
import scipy.fft as sfft

from .errors import GridError, PreconditionError, ResolutionWarning
from .grid_spectral import Field, convolve_radial, unit_ball_volume
from .kernels import chi_hat_minus_one, eval_chi_hat

__all__ = [
    "TQuadrature", "SquareFunctionSpec", "SecondOrderPair", "SquareResult", "KINDS",
    "ball_average", "ball_average_direct", "difference_field", "second_order_integrand",
    "g_function", "area_function", "gstar_function", "s_tilde", "compute_square_function",
    "gstar_kernel_mass", "default_quadrature",
]

KINDS = ("G_alpha", "S_alpha", "Gstar_alpha_lambda", "G_second", "S_second",
         "Gstar_second", "S_tilde_fractional", "S_tilde_second")
_FRACTIONAL = {"G_alpha", "S_alpha", "Gstar_alpha_lambda", "S_tilde_fractional"}
_GSTAR = {"Gstar_alpha_lambda", "Gstar_second"}
_PAIR = {"G_second", "S_second", "Gstar_second"}

# fraction of the total carried by the outermost octave before we warn
BOUNDARY_TOLERANCE = 0.01


@dataclass(frozen=True)
class TQuadrature:
    """Midpoint rule in u = log t for integrals against dt/t.

    [t_min, t_max] is cut into K = ceil(m log2(t_max/t_min)) equal cells in
    log t; the nodes are the cell midpoints and every weight is the cell
    width, so the weights sum to ln(t_max/t_min) exactly.
    """
    t_min: float
    t_max: float
    nodes_per_octave: int = 8

    def __post_init__(self):
        if not (self.t_min > 0 and self.t_max > self.t_min):
            raise ValueError(f"need 0 < t_min < t_max, got [{self.t_min}, {self.t_max}]")
        if self.nodes_per_octave < 4:
            raise ValueError("nodes_per_octave must be at least 4")

    @property
    def cells(self):
        octaves = math.log2(self.t_max / self.t_min)
        return max(1, math.ceil(self.nodes_per_octave * octaves - 1e-9))

    @property
    def du(self):
        return math.log(self.t_max / self.t_min) / self.cells

    @property
    def nodes(self):
        k = np.arange(self.cells)
        return np.exp(math.log(self.t_min) + (k + 0.5) * self.du)

    @property
    def weights(self):
        return np.full(self.cells, self.du)

    def refined(self):
        return TQuadrature(self.t_min, self.t_max, 2 * self.nodes_per_octave)

    def widened(self, octaves=1):
        f = 2.0 ** octaves
        return TQuadrature(self.t_min / f, self.t_max * f, self.nodes_per_octave)

    def dilated(self, factor):
        """Same rule for the window [factor t_min, factor t_max]."""
        return TQuadrature(self.t_min * factor, self.t_max * factor, self.nodes_per_octave)


def default_quadrature(grid, nodes_per_octave=8):
    """t in [4h, L/2]: below 4h a ball holds too few samples, above L/2 it self-overlaps."""
    return TQuadrature(4 * grid.spacing, grid.half_width / 2, nodes_per_octave)


@dataclass(frozen=True)
class SquareFunctionSpec:
    """Which square function to compute, with its parameters.

    ``wrap=True`` allows t > L/2, where the ball average is taken of the
    periodic extension (the natural operator on the torus).
    """
    kind: str
    quadrature: TQuadrature
    alpha: float | None = None
    lam: float | None = None
    wrap: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown square-function kind {self.kind!r}")
        frac = self.kind in _FRACTIONAL
        if frac != (self.alpha is not None):
            raise ValueError(f"{self.kind}: alpha must be given exactly for fractional kinds")
        if frac and not 0 < self.alpha < 2:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        gstar = self.kind in _GSTAR
        if gstar != (self.lam is not None):
            raise ValueError(f"{self.kind}: lambda must be given exactly for g* kinds")
        if gstar and not self.lam > 1:
            raise ValueError(f"lambda must exceed 1, got {self.lam}")

    @property
    def is_pair(self):
        return self.kind in _PAIR


@dataclass(frozen=True)
class SecondOrderPair:
    f: Field
    g: Field

    def __post_init__(self):
        if self.f.grid != self.g.grid:
            raise GridError("second-order pair needs f and g on the same grid")

    @property
    def grid(self):
        return self.f.grid


@dataclass(frozen=True, eq=False)
class SquareResult:
    """A square-function field with its quadrature diagnostics.

    node_mass[k] is the k-th node's share of the integral of Q(f)^2;
    boundary_fraction is the share of the first and last octave.
    """
    field: Field
    node_mass: np.ndarray
    boundary_fraction: tuple
    kernel_mass_deviation: float = 0.0


def _check_radius(grid, t, wrap):
    if not t > 0:
        raise ValueError(f"ball radius must be positive, got {t}")
    if t > grid.half_width / 2 * (1 + 1e-12) and not wrap:
        raise ValueError(
            f"ball radius {t:g} exceeds L/2 = {grid.half_width / 2:g}; pass wrap=True to "
            "average the periodic extension")


def ball_average(f, t, wrap=False):
    """B_t f via the multiplier chi_hat(t |xi|); exact for band-limited fields."""
    g = f.grid
    _check_radius(g, t, wrap)
    return Field(g, _restore_real(f, convolve_radial(f.values, g, lambda r: eval_chi_hat(g.dim, t * r))))


def _restore_real(f, values):
    return values.real if not np.iscomplexobj(f.values) else values


def ball_average_direct(f, t):
    """Physical-space ball average by a weighted lattice sum.

    Each lattice point y is weighted by the fraction clip(t/h - |y|/h + 1/2,
    0, 1), a first-order estimate of how much of its cell lies in the ball;
    the weights are normalized to sum to one.  Accuracy is O(h^2) for smooth
    f.  Used only to cross-check `ball_average`.
    """
    g = f.grid
    if t < 2 * g.spacing:
        raise ValueError(f"ball radius {t:g} is below 2h = {2 * g.spacing:g}")
    _check_radius(g, t, False)
    h = g.spacing
    w = np.clip(t / h - g.position_radius / h + 0.5, 0.0, 1.0)
    w = w / w.sum()
    # move y = 0 to index 0 so the FFT product is a plain circular convolution
    out = sfft.ifftn(sfft.fftn(f.values) * sfft.fftn(sfft.ifftshift(w)))
    return Field(g, _restore_real(f, out))


def difference_field(f, t, alpha, wrap=False):
    """(B_t f - f)/t^alpha, computed through the cancellation-free chi_hat - 1."""
    if not 0 < alpha <= 2:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    g = f.grid
    _check_radius(g, t, wrap)
    vals = convolve_radial(f.values, g, lambda r: chi_hat_minus_one(g.dim, t * r) / t ** alpha)
    return Field(g, _restore_real(f, vals))


def second_order_integrand(pair, t, wrap=False):
    """(B_t f - f)/t^2 - B_t g."""
    g = pair.grid
    _check_radius(g, t, wrap)
    n = g.dim
    out = (convolve_radial(pair.f.values, g, lambda r: chi_hat_minus_one(n, t * r) / t ** 2)
           - convolve_radial(pair.g.values, g, lambda r: eval_chi_hat(n, t * r)))
    real = not (np.iscomplexobj(pair.f.values) or np.iscomplexobj(pair.g.values))
    return Field(g, out.real if real else out)


def gstar_kernel_mass(n, lam):
    """Integral over R^n of t^-n (1 + |y|/t)^(-lam n), independent of t."""
    sphere = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    return sphere * math.exp(math.lgamma(n) + math.lgamma(lam * n - n) - math.lgamma(lam * n))


def _gstar_kernel_hat(grid, t, lam):
    """FFT of the sampled g* weight, rescaled to the continuum mass.

    Returns the transform and the relative deviation of the raw discrete mass
    from the continuum mass (the part lost to the box and to sampling).
    """
    n = grid.dim
    w = t ** (-n) * (1.0 + grid.position_radius / t) ** (-lam * n)
    discrete = float(w.sum()) * grid.cell_volume
    target = gstar_kernel_mass(n, lam)
    w *= target / discrete
    return sfft.fftn(sfft.ifftshift(w)) * grid.cell_volume, abs(discrete / target - 1.0)


def _inputs(obj, spec):
    if spec.is_pair:
        if not isinstance(obj, SecondOrderPair):
            raise TypeError(f"{spec.kind} needs a SecondOrderPair")
        return obj.grid, [obj.f.values, obj.g.values]
    if isinstance(obj, SecondOrderPair):
        raise TypeError(f"{spec.kind} takes a single Field")
    return obj.grid, [obj.values]


def _profiles(spec, n, family=None):
    """Radial profiles (t, r) -> multiplier for each input of the integrand."""
    kind = spec.kind
    if kind.startswith("S_tilde"):
        return [lambda t, r: family.symbol(t * r)]
    if spec.is_pair:
        return [lambda t, r: chi_hat_minus_one(n, t * r) / t ** 2,
                lambda t, r: -eval_chi_hat(n, t * r)]
    a = spec.alpha
    return [lambda t, r: chi_hat_minus_one(n, t * r) / t ** a]


def _mode(kind):
    if kind in ("G_alpha", "G_second"):
        return "g"
    if kind in _GSTAR:
        return "gstar"
    return "ball"


def map_reduce(items, fn, workers=1):
    """Sum fn(item) over items in their given order.

    Items are evaluated in parallel batches of ``workers`` but always added
    left to right, so the floating-point result does not depend on the
    worker count.
    """
    total = None
    if workers <= 1:
        for it in items:
            part = fn(it)
            total = part if total is None else _add(total, part)
        return total
    with ThreadPoolExecutor(max_workers=workers) as ex:
        for start in range(0, len(items), workers):
            for part in ex.map(fn, items[start:start + workers]):
                total = part if total is None else _add(total, part)
    return total


def _add(a, b):
    if isinstance(a, tuple):
        return tuple(_add(x, y) for x, y in zip(a, b))
    return a + b


def compute_square_function(obj, spec, family=None, workers=1, warn=True):
    """Evaluate any square-function kind and return a `SquareResult`.

    Parameters
    ----------
    obj : Field or SecondOrderPair
        The input; second-order g / S / g* kinds take a pair.
    spec : SquareFunctionSpec
    family : KernelFamily, optional
        Required for the S-tilde kinds.
    workers : int
        Threads used for the per-node work.  Results are bit-identical for
        every value.
    warn : bool
        Emit `ResolutionWarning` when the outer octaves or the g* kernel
        truncation exceed 1 %.
    """
    grid, arrays = _inputs(obj, spec)
    n = grid.dim
    if spec.kind.startswith("S_tilde"):
        if family is None:
            raise ValueError("S-tilde kinds need a KernelFamily")
        if family.dim != n:
            raise PreconditionError("kernel family dimension does not match the grid")
        if (spec.kind == "S_tilde_second") != family.is_second_order:
            raise ValueError(f"{spec.kind} does not match the kernel family")
    q = spec.quadrature
    _check_radius(grid, q.t_max, spec.wrap)
    coeffs = [sfft.fftn(a) for a in arrays]
    # band-limited inputs only need their multipliers on the occupied radii
    support = grid.spectral_support(*coeffs)
    profiles = _profiles(spec, n, family)
    mode = _mode(spec.kind)
    nodes, weights = q.nodes, q.weights
    K = len(nodes)

    def node(k):
        t, w = float(nodes[k]), float(weights[k])
        spec_t = sum(grid.radial(lambda r, p=p: p(t, r), support) * c
                     for p, c in zip(profiles, coeffs))
        Ft = sfft.ifftn(spec_t)
        sq = Ft.real ** 2 + Ft.imag ** 2
        mass = np.zeros(K)
        mass[k] = w * float(sq.sum())
        dev = 0.0
        if mode == "g":
            return w * sq, mass, dev
        sq_hat = sfft.fftn(sq)
        if mode == "ball":
            return w * grid.radial(lambda r: eval_chi_hat(n, t * r)) * sq_hat, mass, dev
        ker_hat, dev = _gstar_kernel_hat(grid, t, spec.lam)
        mass[k] *= gstar_kernel_mass(n, spec.lam)
        dev_arr = np.zeros(K)
        dev_arr[k] = dev
        return w * ker_hat * sq_hat, mass, dev_arr

    acc, mass, dev = map_reduce(list(range(K)), node, workers)
    if mode == "g":
        total = acc
    else:
        # B_t and the g* weight are positive operators, so negative values
        # here are FFT roundoff around zero; clip them before the square root
        total = np.maximum(sfft.ifftn(acc).real, 0.0)
    if spec.kind in ("S_alpha", "S_second"):
        total = total * unit_ball_volume(n)
    kernel_dev = float(np.max(dev)) if mode == "gstar" else 0.0
    m = q.nodes_per_octave
    s = float(mass.sum())
    frac = (float(mass[:m].sum()) / s, float(mass[-m:].sum()) / s) if s > 0 else (0.0, 0.0)
    if warn:
        if max(frac) > BOUNDARY_TOLERANCE:
            warnings.warn(
                f"{spec.kind}: outer octaves of [{q.t_min:g}, {q.t_max:g}] carry "
                f"{frac[0]:.2%} / {frac[1]:.2%} of the total", ResolutionWarning, stacklevel=2)
        if kernel_dev > BOUNDARY_TOLERANCE:
            warnings.warn(
                f"{spec.kind}: g* kernel misses {kernel_dev:.2%} of its mass on the box",
                ResolutionWarning, stacklevel=2)
    return SquareResult(Field(grid, np.sqrt(total)), mass, frac, kernel_dev)


def _require(spec, allowed, name):
    if spec.kind not in allowed:
        raise ValueError(f"{name} cannot compute kind {spec.kind!r}")


def g_function(obj, spec, workers=1):
    """Littlewood-Paley g-function: sqrt(sum_k w_k |F_{t_k}|^2)."""
    _require(spec, ("G_alpha", "G_second"), "g_function")
    return compute_square_function(obj, spec, workers=workers).field


def area_function(obj, spec, workers=1):
    """Lusin area function: sqrt(|B(0,1)| sum_k w_k B_{t_k}|F_{t_k}|^2)."""
    _require(spec, ("S_alpha", "S_second"), "area_function")
    return compute_square_function(obj, spec, workers=workers).field


def gstar_function(obj, spec, workers=1):
    """g*_lambda function: |F_t|^2 convolved with t^-n (1 + |y|/t)^(-lambda n)."""
    _require(spec, _GSTAR, "gstar_function")
    return compute_square_function(obj, spec, workers=workers).field


def s_tilde(f, family, quad, wrap=False, workers=1):
    """sqrt(sum_k w_k B_{t_k} |f * K_{t_k}|^2) with K the family kernel."""
    kind = "S_tilde_second" if family.is_second_order else "S_tilde_fractional"
    spec = SquareFunctionSpec(kind, quad, alpha=family.alpha, wrap=wrap)
    return compute_square_function(f, spec, family=family, workers=workers).field
