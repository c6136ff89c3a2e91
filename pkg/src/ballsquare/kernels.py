"""
Radial symbols: the ball-indicator transform, the fractional and second-order
kernel symbols, the auxiliary function A(s), and a smooth dyadic window pair.

All profiles are vectorized over the radius and return plain floats for
scalar input.
"""
from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import PreconditionError, QuadratureError

__all__ = [
    "RadialSymbol", "KernelFamily", "WindowPair", "eval_chi_hat", "chi_hat_minus_one",
    "chi_hat_decay_check", "eval_K_hat", "eval_K2_hat", "chi_hat_limit_coeff",
    "eval_A", "eval_gamma_n", "build_window_pair", "envelope_sup", "chi_hat_symbol",
]

# below this radius chi_hat and chi_hat - 1 come from the power series;
# the n = 3 closed form loses about r^-2 digits to cancellation
SERIES_RADIUS = 1.0
# J_1 switches from its power series to the Hankel expansion here
BESSEL_SPLIT = 12.0
_SERIES_TERMS = 60


def _check_dim(n):
    if n not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {n}")


def _as_radius(r):
    arr = np.asarray(r, dtype=float)
    return arr, arr.ndim == 0


def _ret(arr, scalar):
    return float(arr) if scalar else arr


def _chi_series(n, r, start):
    """Gamma(n/2+1) sum_{k>=start} (-1)^k (r/2)^(2k-2 start) / (k! Gamma(k+n/2+1)).

    Callers multiply by (r/2)^(2 start); keeping that factor out lets the
    removable singularities of (chi_hat - 1)/r^a be evaluated without 0/0.
    """
    nu = n / 2.0
    x = -(np.asarray(r, dtype=float) / 2.0) ** 2
    # leading coefficient Gamma(nu+1) / (start! Gamma(start+nu+1)) in logs
    c0 = math.exp(math.lgamma(nu + 1) - math.lgamma(start + 1) - math.lgamma(start + nu + 1))
    term = np.full_like(x, (-1.0) ** start * c0)
    total = term.copy()
    for k in range(start + 1, start + _SERIES_TERMS):
        term = term * x / (k * (k + nu))
        total = total + term
    return total


def _hankel_j1(r):
    """J_1 for r > 12 from the Hankel expansion, truncated at the smallest term."""
    K = 40
    a = np.ones(K)
    for k in range(1, K):
        a[k] = a[k - 1] * (4.0 - (2 * k - 1) ** 2) / (8.0 * k)
    r = np.asarray(r, dtype=float)
    terms = a[None, :] / r[:, None] ** np.arange(K)[None, :]
    # asymptotic series: stop just before the terms start growing again
    mags = np.abs(terms)
    first_min = np.argmin(mags, axis=1)
    keep = np.arange(K)[None, :] < first_min[:, None]
    terms = np.where(keep, terms, 0.0)
    sign = np.array([(-1) ** (k // 2) for k in range(K)], dtype=float)
    signed = terms * sign[None, :]
    P = signed[:, 0::2].sum(axis=1)
    Q = signed[:, 1::2].sum(axis=1)
    w = r - 0.75 * math.pi
    return np.sqrt(2.0 / (math.pi * r)) * (P * np.cos(w) - Q * np.sin(w))


def bessel_j1(r):
    """Bessel function J_1 on r >= 0 (power series up to 12, Hankel beyond)."""
    arr, scalar = _as_radius(r)
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    lo = flat <= BESSEL_SPLIT
    # J_1(r) = (r/2) * sum (-1)^k (r/2)^(2k) / (k! (k+1)!), the n = 2 series
    out[lo] = 0.5 * flat[lo] * _chi_series(2, flat[lo], 0)
    if np.any(~lo):
        out[~lo] = _hankel_j1(flat[~lo])
    return _ret(out.reshape(arr.shape), scalar)


def eval_chi_hat(n, r):
    """Fourier transform of the normalized unit-ball indicator at radius r.

    Parameters
    ----------
    n : int
        Dimension, 1, 2 or 3.
    r : float or array_like
        Radius |xi| >= 0.

    Returns
    -------
    float or ndarray
        sin r / r (n = 1), 2 J_1(r)/r (n = 2), 3 (sin r - r cos r)/r^3 (n = 3),
        with value 1 at r = 0.
    """
    _check_dim(n)
    arr, scalar = _as_radius(r)
    flat = np.abs(np.atleast_1d(arr).ravel())
    out = np.empty_like(flat)
    small = flat < SERIES_RADIUS
    out[small] = _chi_series(n, flat[small], 0)
    big = flat[~small]
    if n == 1:
        out[~small] = np.sin(big) / big
    elif n == 2:
        out[~small] = 2.0 * bessel_j1(big) / big
    else:
        out[~small] = 3.0 * (np.sin(big) - big * np.cos(big)) / big ** 3
    return _ret(out.reshape(arr.shape), scalar)


def chi_hat_minus_one(n, r):
    """chi_hat(r) - 1 without cancellation near r = 0."""
    _check_dim(n)
    arr, scalar = _as_radius(r)
    flat = np.abs(np.atleast_1d(arr).ravel())
    out = np.empty_like(flat)
    small = flat < SERIES_RADIUS
    rs = flat[small]
    out[small] = (rs / 2) ** 2 * _chi_series(n, rs, 1)
    out[~small] = eval_chi_hat(n, flat[~small]) - 1.0
    return _ret(out.reshape(arr.shape), scalar)


def chi_hat_decay_check(n, r_max):
    """sup of |chi_hat(r)| (1 + r)^((n+1)/2) over a dense grid of [0, r_max].

    The grid mixes a log grid (small radii) with a uniform grid fine enough to
    resolve every oscillation peak up to r_max.
    """
    if r_max < 10:
        raise ValueError("r_max must be at least 10")
    r = np.concatenate([
        [0.0],
        np.geomspace(1e-4, r_max, 4000),
        np.linspace(0.0, r_max, int(min(40 * r_max, 2_000_000)) + 1),
    ])
    vals = np.abs(eval_chi_hat(n, r)) * (1.0 + r) ** ((n + 1) / 2.0)
    return float(np.max(vals))


@dataclass(frozen=True)
class RadialSymbol:
    """A radial Fourier multiplier r -> m(r).

    ``r_max`` is the largest radius the profile is declared valid on; the
    grid layer refuses to apply a symbol beyond it.
    """
    evaluator: Callable
    name: str = "symbol"
    r_max: float = math.inf
    real: bool = True

    def __call__(self, r):
        return self.evaluator(np.asarray(r, dtype=float))

    def dilate(self, t, name=None):
        """The symbol r -> m(t r)."""
        return RadialSymbol(lambda r: self.evaluator(t * np.asarray(r, dtype=float)),
                            name or f"{self.name}(t={t:g})", self.r_max / t, self.real)

    def __mul__(self, other):
        if not isinstance(other, RadialSymbol):
            c = other
            return RadialSymbol(lambda r: c * self.evaluator(r), self.name, self.r_max,
                                self.real and np.isrealobj(c))
        return RadialSymbol(lambda r: self.evaluator(r) * other.evaluator(r),
                            f"{self.name}*{other.name}", min(self.r_max, other.r_max),
                            self.real and other.real)

    __rmul__ = __mul__


def chi_hat_symbol(n):
    return RadialSymbol(lambda r: eval_chi_hat(n, r), f"chi_hat[n={n}]")


@dataclass(frozen=True)
class KernelFamily:
    """Kernel order and dimension.

    ``alpha`` in (0, 2) selects the fractional kernel with symbol
    (chi_hat - 1)/r^alpha; ``alpha=None`` selects the second-order kernel
    with symbol (chi_hat - 1)/r^2 + chi_hat/(2n+4).
    """
    dim: int
    alpha: float | None = None

    def __post_init__(self):
        _check_dim(self.dim)
        if self.alpha is not None and not 0 < self.alpha < 2:
            raise ValueError(f"fractional order must lie in (0, 2), got {self.alpha}")

    @classmethod
    def fractional(cls, dim, alpha):
        return cls(dim, float(alpha))

    @classmethod
    def second_order(cls, dim):
        return cls(dim, None)

    @property
    def is_second_order(self):
        return self.alpha is None

    @property
    def order(self):
        """Smoothness carried by the Riesz potential: alpha, or 2."""
        return 2.0 if self.alpha is None else self.alpha

    def symbol(self, r):
        if self.is_second_order:
            return eval_K2_hat(self.dim, r)
        return eval_K_hat(self, r)

    def kernel_symbol(self):
        label = "K2_hat" if self.is_second_order else f"K_hat[alpha={self.alpha:g}]"
        return RadialSymbol(self.symbol, f"{label}[n={self.dim}]")

    def riesz_symbol(self):
        """|xi|^(-order), with the zero mode mapped to 0."""
        a = self.order

        def m(r):
            r = np.asarray(r, dtype=float)
            out = np.zeros_like(r)
            nz = r > 0
            out[nz] = r[nz] ** (-a)
            return out
        return RadialSymbol(m, f"riesz[{a:g}]")

    def envelope(self, r):
        """min{r^(2-a), r^(-a)} with a the order."""
        r = np.asarray(r, dtype=float)
        a = self.order
        return np.minimum(r ** (2 - a), r ** (-a))


def eval_K_hat(family, r):
    """(chi_hat(r) - 1)/r^alpha, equal to 0 at r = 0."""
    if family.is_second_order:
        raise ValueError("eval_K_hat needs a fractional family")
    n, a = family.dim, family.alpha
    arr, scalar = _as_radius(r)
    flat = np.abs(np.atleast_1d(arr).ravel())
    out = np.zeros_like(flat)
    nz = flat > 0
    rs = flat[nz]
    small = rs < SERIES_RADIUS
    vals = np.empty_like(rs)
    # (r/2)^2 / r^a kept together so tiny radii do not underflow to 0/0
    vals[small] = 0.25 * rs[small] ** (2 - a) * _chi_series(n, rs[small], 1)
    vals[~small] = chi_hat_minus_one(n, rs[~small]) / rs[~small] ** a
    out[nz] = vals
    return _ret(out.reshape(arr.shape), scalar)


def eval_K2_hat(n, r):
    """(chi_hat(r) - 1)/r^2 + chi_hat(r)/(2n+4), equal to 0 at r = 0."""
    _check_dim(n)
    arr, scalar = _as_radius(r)
    flat = np.abs(np.atleast_1d(arr).ravel())
    out = np.empty_like(flat)
    c = 1.0 / (2 * n + 4)
    small = flat < SERIES_RADIUS
    rs = flat[small]
    # the k = 1 series term of (chi_hat - 1)/r^2 is exactly -1/(2n+4)
    out[small] = rs ** 2 / 16.0 * _chi_series(n, rs, 2) + c * chi_hat_minus_one(n, rs)
    rb = flat[~small]
    out[~small] = chi_hat_minus_one(n, rb) / rb ** 2 + c * eval_chi_hat(n, rb)
    return _ret(out.reshape(arr.shape), scalar)


def envelope_sup(family, r_min=1e-4, r_max=1e4, points=4001):
    """sup of |symbol(r)| / envelope(r) over a log grid.

    The second-order envelope min{r^2, r^-2} is only valid for n >= 3, since
    (chi_hat - 1)/r^2 + chi_hat/(2n+4) decays like r^(-(n+1)/2).
    """
    if family.is_second_order and family.dim < 3:
        raise PreconditionError("second-order envelope needs n >= 3")
    r = np.geomspace(r_min, r_max, points)
    return float(np.max(np.abs(family.symbol(r)) / family.envelope(r)))


def chi_hat_limit_coeff(n, r0=0.5, levels=8, tol=1e-11):
    """lim_{r->0} (chi_hat(r) - 1)/r^2 by Richardson extrapolation.

    D(r) = (chi_hat(r) - 1)/r^2 is even in r, so halving r and eliminating
    r^2, r^4, ... terms with factors 4^m converges geometrically.

    Raises
    ------
    QuadratureError
        If the last two diagonal entries differ by more than ``tol``.
    """
    _check_dim(n)
    r = r0 * 0.5 ** np.arange(levels)
    D = (np.asarray(eval_chi_hat(n, r)) - 1.0) / r ** 2
    table = [D]
    for m in range(1, levels):
        prev = table[-1]
        table.append((4.0 ** m * prev[1:] - prev[:-1]) / (4.0 ** m - 1))
    diag = [row[0] for row in table if len(row)]
    if not all(np.isfinite(diag)):
        raise QuadratureError("Richardson table produced non-finite values")
    # beyond the first few columns roundoff in D dominates, so take the
    # best-agreeing adjacent pair rather than the last entry
    diffs = np.abs(np.diff(diag))
    best = int(np.argmin(diffs))
    if diffs[best] > tol:
        raise QuadratureError(
            f"Richardson extrapolation did not settle (closest pair differs by {diffs[best]:.3g})")
    return float(diag[best + 1])


def eval_gamma_n(n):
    """[int_0^1 (1-u^2)^((n-1)/2) du]^-1, via u = sin(theta)."""
    val, err = integrate.quad(lambda th: math.cos(th) ** n, 0.0, math.pi / 2,
                              epsabs=1e-14, epsrel=1e-13)
    if not np.isfinite(val) or err > 1e-10:
        raise QuadratureError(f"gamma_n quadrature failed (error estimate {err:.3g})")
    return 1.0 / val


def eval_A(n, s):
    """A(s) = -2 gamma_n int_0^1 (1-u^2)^((n-1)/2) sin^2(us/2) du.

    Evaluated in theta = arcsin(u), where the integrand cos^n(theta)
    sin^2(s sin(theta)/2) is smooth on the closed interval.  Agrees with
    chi_hat(s) - 1.
    """
    _check_dim(n)
    gamma = eval_gamma_n(n)
    arr, scalar = _as_radius(s)
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    for i, si in enumerate(flat):
        limit = 200 + int(abs(si))
        val, err = integrate.quad(
            lambda th: math.cos(th) ** n * math.sin(si * math.sin(th) / 2) ** 2,
            0.0, math.pi / 2, epsabs=1e-13, epsrel=1e-12, limit=limit)
        if not np.isfinite(val) or err > 1e-10:
            raise QuadratureError(f"A({si}) quadrature failed (error estimate {err:.3g})")
        out[i] = -2.0 * gamma * val
    return _ret(out.reshape(arr.shape), scalar)


@dataclass(frozen=True)
class WindowPair:
    """Smooth cutoff Theta and the annular windows built from it.

    Theta(r) = h(2-r) / (h(2-r) + h(r-1)) with h(s) = exp(-c/s) for s > 0,
    so Theta = 1 on [0, 1] and 0 on [2, inf).  phi_hat(r) = Theta(r) -
    Theta(2r) is supported in [1/2, 2] and telescopes to 1 over dyadic
    dilations; psi_hat(r) = Theta(r/2)(1 - Theta(4r)) is supported in
    [1/4, 4] and equals 1 on [1/2, 2].
    """
    steepness: float = 1.0

    def theta(self, r):
        arr, scalar = _as_radius(r)
        r = np.abs(np.atleast_1d(arr))
        out = np.where(r <= 1.0, 1.0, 0.0)
        mid = (r > 1.0) & (r < 2.0)
        rm = r[mid]
        c = self.steepness
        # ratio h(2-r)/(h(2-r)+h(r-1)) = 1/(1+exp(x)); tanh form avoids overflow
        x = c / (2.0 - rm) - c / (rm - 1.0)
        out[mid] = 0.5 * (1.0 - np.tanh(0.5 * x))
        return _ret(out.reshape(arr.shape), scalar)

    def phi_hat(self, r):
        r = np.asarray(r, dtype=float)
        return self.theta(r) - self.theta(2.0 * r)

    def psi_hat(self, r):
        r = np.asarray(r, dtype=float)
        return self.theta(0.5 * r) * (1.0 - self.theta(4.0 * r))

    def band_symbol(self, j):
        """RadialSymbol r -> phi_hat(2^-j r)."""
        s = 2.0 ** (-j)
        return RadialSymbol(lambda r: self.phi_hat(s * r), f"phi_hat[j={j}]")

    def bump_symbol(self, j):
        """RadialSymbol r -> psi_hat(2^-j r)."""
        s = 2.0 ** (-j)
        return RadialSymbol(lambda r: self.psi_hat(s * r), f"psi_hat[j={j}]")


def build_window_pair(steepness=1.0):
    """WindowPair with mollifier exp(-c/s), c = ``steepness`` > 0."""
    if not steepness > 0:
        raise ValueError(f"steepness must be positive, got {steepness}")
    return WindowPair(float(steepness))
