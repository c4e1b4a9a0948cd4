"""Fourier-space diagrams: polygons, the triangle, the one-massive-line square,
and the reference infrared integrals with their small-field scaling.

Torus quantities are momentum sums over the full fourier grid of a lattice
spec; the reference integrals are genuine Brillouin-zone integrals evaluated
by radial quadrature over the inscribed ball plus a quasi-Monte-Carlo corner
term (the corner is bounded away from k = 0, where all the physics lives).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.stats import qmc

from .lattice import LatticeSpec, dhat_grid, fourier_grid

MASS_COEFFICIENT = 2.0**1.5  # proxy mass c*sqrt(h); c from the tau-surface fit


@dataclass(frozen=True)
class PropagatorGrid:
    """tau^(k) sampled on the full torus momentum grid, shape (s,)*d."""

    lattice: LatticeSpec
    values: np.ndarray
    source: str

    def __post_init__(self):
        expected = (self.lattice.torus_side,) * self.lattice.dimension
        if self.values.shape != expected:
            raise ValueError(f"grid shape {self.values.shape} != {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("propagator values must be finite")
        if np.any(self.values < 0):
            raise ValueError("propagator values must be nonnegative")

    @property
    def chi(self) -> float:
        """tau^(0), the susceptibility normalization of the grid."""
        return float(self.values.reshape(-1)[0])


def mean_field_proxy(spec: LatticeSpec, p: float, zero_mode: Optional[float] = None) -> PropagatorGrid:
    """Random-walk proxy 1 / (1 - p |Omega| D^(k)).

    Finite for p|Omega| < 1.  At p|Omega| = 1 the zero mode diverges and must
    be assigned explicitly via `zero_mode` (0.0 drops it from momentum sums).
    """
    denom = 1.0 - p * spec.omega * dhat_grid(spec)
    flat = denom.reshape(-1)
    if flat[0] <= 0 and zero_mode is None:
        raise ValueError("zero mode diverges; pass an explicit zero_mode value")
    if np.any(flat[1:] <= 0):
        raise ValueError(f"proxy denominator not positive away from k=0 (p*Omega = {p * spec.omega})")
    vals = np.empty_like(flat)
    vals[1:] = 1.0 / flat[1:]
    vals[0] = 1.0 / flat[0] if flat[0] > 0 else zero_mode
    return PropagatorGrid(spec, vals.reshape(denom.shape), f"mean-field-proxy(p={p})")


def critical_proxy(spec: LatticeSpec, h: float, mass_coefficient: float = MASS_COEFFICIENT) -> PropagatorGrid:
    """Critical-point proxy 1 / ([1 - D^(k)] + c sqrt(h)), the sandwich shape."""
    if h <= 0:
        raise ValueError("the critical proxy needs h > 0")
    denom = 1.0 - dhat_grid(spec) + mass_coefficient * math.sqrt(h)
    return PropagatorGrid(spec, 1.0 / denom, f"critical-proxy(h={h})")


def grid_from_table(spec: LatticeSpec, table, h_index: int) -> PropagatorGrid:
    """Propagator grid from a measured ObservableTable whose k list is the
    full fourier grid of `spec` in grid order."""
    ks = fourier_grid(spec)
    if table.k_list.shape != ks.shape or not np.allclose(table.k_list, ks, atol=1e-12):
        raise ValueError("table k list must be the full fourier grid in grid order")
    vals = np.asarray(table.tau_mean[h_index], dtype=np.float64)
    shape = (spec.torus_side,) * spec.dimension
    return PropagatorGrid(spec, vals.reshape(shape), f"mc(h={table.h_grid[h_index]})")


def full_grid_klist(spec: LatticeSpec) -> tuple[tuple[float, ...], ...]:
    """k list covering the full torus grid, for measurement plans feeding grids."""
    return tuple(tuple(k) for k in fourier_grid(spec))


# -- torus momentum sums -------------------------------------------------------


def position_space(grid: PropagatorGrid, power: int = 1) -> np.ndarray:
    """Inverse transform of tau^(k)^power: the m-fold convolution tau^{*power}(x)."""
    return np.fft.ifftn(grid.values**power).real


@dataclass(frozen=True)
class PolygonResult:
    field: np.ndarray
    sup: float


def polygon(grid: PropagatorGrid, m: int) -> PolygonResult:
    """P^(m)(x) = tau^{*m}(x) - delta_{0,x} tau(0,0)^m and its supremum."""
    if m < 2:
        raise ValueError("polygon needs m >= 2")
    conv = position_space(grid, m)
    tau00 = position_space(grid, 1).reshape(-1)[0]
    field = conv.copy()
    field.reshape(-1)[0] -= tau00**m
    return PolygonResult(field, float(field.max()))


def triangle(grid: PropagatorGrid) -> float:
    """The triangle diagram: tau^{*3}(0) = V^-1 sum_k tau^(k)^3."""
    return float(np.mean(grid.values**3))


def minimal_image_r2(spec: LatticeSpec) -> np.ndarray:
    """|x|^2 with the minimal image per axis, shape (s,)*d."""
    s, d = spec.torus_side, spec.dimension
    axis = np.minimum(np.arange(s), s - np.arange(s)).astype(np.float64) ** 2
    out = np.zeros((s,) * d)
    for ax in range(d):
        shape = [1] * d
        shape[ax] = s
        out = out + axis.reshape(shape)
    return out


def weighted_polygon(grid: PropagatorGrid, m: int) -> float:
    """sup_x of the polygon with one line weighted by |y|^2 (minimal image)."""
    if m < 2:
        raise ValueError("weighted polygon needs m >= 2")
    tau_x = position_space(grid, 1)
    g = minimal_image_r2(grid.lattice) * tau_x
    g_hat = np.fft.fftn(g)
    field = np.fft.ifftn(g_hat * grid.values ** (m - 1)).real
    return float(field.max())


def square_one_massive(grid_h: PropagatorGrid, grid_0: PropagatorGrid) -> float:
    """S_h = V^-1 sum_k tau^_h(k) tau^_0(k)^3 for two grids on one lattice."""
    if grid_h.lattice != grid_0.lattice:
        raise ValueError("grids live on different lattices")
    return float(np.mean(grid_h.values * grid_0.values**3))


# -- reference integrals ---------------------------------------------------------


@dataclass(frozen=True)
class IntegralSpec:
    m: float
    n: float
    d: int
    h: float

    def __post_init__(self):
        if self.m < 0 or self.n < 0 or self.h < 0 or self.d < 1:
            raise ValueError("invalid integral parameters")


@dataclass(frozen=True)
class IntegralResult:
    value: float
    divergent: bool
    radial: float = 0.0
    corner: float = 0.0


def _sphere_area(d: int) -> float:
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def _ball_volume(d: int, radius: float) -> float:
    return math.pi ** (d / 2) * radius**d / math.gamma(d / 2 + 1)


@lru_cache(maxsize=8)
def _corner_points(d: int, n_points: int = 1 << 13) -> np.ndarray:
    """Deterministic Sobol points of the cube corner [0,pi]^d \\ ball(pi)."""
    pts = qmc.Sobol(d, scramble=False).random(n_points) * math.pi
    keep = (pts**2).sum(axis=1) > math.pi**2
    return pts[keep]


def _integrand_radial(r2: np.ndarray, m: float, n: float, mass2: float) -> np.ndarray:
    out = np.ones_like(r2)
    if m:
        out = out / (r2 + mass2) ** m
    if n:
        out = out / r2**n
    return out


def _integral_value(m: float, n: float, d: int, mass2: float) -> IntegralResult:
    """integral over [-pi,pi]^d of (k^2 + mass2)^-m (k^2)^-n."""
    if d <= 2 * n:
        return IntegralResult(math.inf, True)
    if mass2 == 0 and d <= 2 * (m + n):
        return IntegralResult(math.inf, True)

    # radial part over the inscribed ball, r = exp(t)
    def f(t):
        r = math.exp(t)
        r2 = r * r
        val = r ** (d - 2 * n)
        if m:
            val /= (r2 + mass2) ** m
        return val

    t_hi = math.log(math.pi)
    t_lo = t_hi - 60.0 / max(d - 2 * n, 0.5)
    pieces = [t_lo, t_hi]
    if mass2 > 0:
        knee = 0.25 * math.log(mass2) if mass2 < 1 else 0.0
        knee = min(max(knee, t_lo + 1e-9), t_hi - 1e-9)
        pieces = [t_lo, knee, t_hi]
    radial = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        val, _ = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-11, limit=300)
        radial += val
    radial *= _sphere_area(d)

    pts = _corner_points(d)
    corner_vol = (2.0 * math.pi) ** d - _ball_volume(d, math.pi)
    corner = corner_vol * float(np.mean(_integrand_radial((pts**2).sum(axis=1), m, n, mass2)))
    return IntegralResult(radial + corner, False, radial, corner)


def reference_integral(spec: IntegralSpec) -> IntegralResult:
    """I_{m,n}^{(d)}(h): divergent flag for d <= 2n (and for h = 0, d <= 2(m+n)),
    otherwise radial quadrature plus the corner correction."""
    return _integral_value(spec.m, spec.n, spec.d, math.sqrt(spec.h) if spec.h else 0.0)


def scaling_exponent(
    m: float, n: float, d: int, h_lo: float = 1e-10, h_hi: float = 1e-6, points: int = 9
) -> float:
    """Fitted slope of log I_{m,n}^{(d)}(h) vs log h over the window."""
    hs = np.logspace(math.log10(h_lo), math.log10(h_hi), points)
    vals = [reference_integral(IntegralSpec(m, n, d, h)).value for h in hs]
    slope = np.polyfit(np.log(hs), np.log(vals), 1)[0]
    return float(slope)


def log_ratio_spread(
    m: float, n: float, d: int, h_lo: float = 1e-12, h_hi: float = 1e-10, points: int = 7
) -> tuple[float, float]:
    """(mean, relative spread) of I / |log h| over the window; for d = 2(m+n)
    the ratio approaches a constant."""
    hs = np.logspace(math.log10(h_lo), math.log10(h_hi), points)
    ratios = np.array(
        [reference_integral(IntegralSpec(m, n, d, h)).value / abs(math.log(h)) for h in hs]
    )
    mean = float(ratios.mean())
    return mean, float((ratios.max() - ratios.min()) / mean)


# -- the one-massive-line square's field scaling ----------------------------------


def square_scaling_continuum(d: int, h: float, mass_coefficient: float = MASS_COEFFICIENT) -> float:
    """Continuum evaluation of the one-massive square integrand
    (k^2 + c sqrt(h))^-1 (k^2)^-3 over the Brillouin zone.

    Desk-scale tori cannot reach the infrared window that exhibits the h
    scaling in d >= 7, so the scaling checks use this continuum form; the
    torus sum square_one_massive serves measured grids.
    """
    return _integral_value(1.0, 3.0, d, mass_coefficient * math.sqrt(h)).value / (2 * math.pi) ** d


@dataclass(frozen=True)
class DecayRate:
    """Descriptor of an h -> 0 rate h^power |log h|^log_power."""

    power: Fraction
    log_power: int

    def evaluate(self, h: float) -> float:
        return h ** float(self.power) * abs(math.log(h)) ** self.log_power


def delta_exponent(d) -> DecayRate:
    """The decay rate of S_h M_h: h^{(d-6)/4} for 6<d<8, h^{1/2}|log h| at d=8,
    h^{1/2} beyond."""
    if d <= 6:
        raise ValueError("the rate is only defined above six dimensions")
    if d < 8:
        return DecayRate(Fraction(d - 6).limit_denominator(10**6) / 4, 0)
    if d == 8:
        return DecayRate(Fraction(1, 2), 1)
    return DecayRate(Fraction(1, 2), 0)
