"""Exponent extraction and the ISE two-point curve.

Fits are weighted least squares in log space with bootstrap errors over the
Monte Carlo batch means; every fit records its window explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize, stats

from .lattice import LatticeSpec, dhat, sigma2

SQRT8 = 2.0**1.5


# -- ISE two-point function -----------------------------------------------------


def ise_two_point(k: float) -> float:
    """A^(k) = int_0^inf t exp(-t^2/2) exp(-k^2 t / 2) dt by adaptive quadrature."""
    if k < 0:
        raise ValueError("k must be >= 0")
    a = 0.5 * k * k

    def integrand(t):
        return t * math.exp(-0.5 * t * t - a * t)

    val, err = integrate.quad(integrand, 0.0, math.inf, epsabs=1e-13, epsrel=1e-11)
    return val


@dataclass(frozen=True)
class IseCurve:
    k: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if abs(self.values[0] - 1.0) > 1e-9 or self.k[0] != 0.0:
            raise ValueError("curve must start at A^(0) = 1")
        if np.any(np.diff(self.values) >= 0):
            raise ValueError("A^ must be strictly decreasing in |k|")


def ise_curve(ks: Sequence[float]) -> IseCurve:
    ks = np.asarray(sorted(set([0.0] + [float(k) for k in ks])))
    return IseCurve(ks, np.array([ise_two_point(k) for k in ks]))


# -- fit plumbing ----------------------------------------------------------------


@dataclass
class FitResult:
    kind: str
    params: dict
    errors: dict
    residual_norm: float
    window: dict
    model: Optional[np.ndarray] = None  # fitted values on the data points

    def summary(self) -> str:
        pieces = [f"{k} = {v:.6g} +- {self.errors.get(k, float('nan')):.2g}" for k, v in self.params.items()]
        return f"{self.kind}: " + ", ".join(pieces) + f" (residual {self.residual_norm:.3g})"


def _weighted_loglog_slope(x, y, sigma_y):
    """Weighted straight-line fit of log y on log x: returns (slope, intercept, cov)."""
    lx, ly = np.log(x), np.log(y)
    w = (np.asarray(y) / np.asarray(sigma_y)) ** 2  # var(log y) = (sigma/y)^2
    X = np.stack([lx, np.ones_like(lx)], axis=1)
    xtw = X.T * w
    cov = np.linalg.inv(xtw @ X)
    beta = cov @ (xtw @ ly)
    resid = ly - X @ beta
    return beta[0], beta[1], cov, float(np.sqrt(np.mean(resid**2)))


def fit_magnetization(
    table,
    h_window: Optional[tuple[float, float]] = None,
    bootstrap: int = 200,
    seed: int = 0,
) -> FitResult:
    """Power-law fit M_h ~ A h^s; s estimates 1/delta.

    Needs at least 5 field values spanning 1.5 decades inside the window.
    """
    h = np.asarray(table.h_grid, dtype=float)
    keep = h > 0
    if h_window is not None:
        keep &= (h >= h_window[0]) & (h <= h_window[1])
    h = h[keep]
    if len(h) < 5 or math.log10(h.max() / h.min()) < 1.5:
        raise ValueError("need >= 5 field values spanning >= 1.5 decades")
    m = np.asarray(table.m_mean)[keep]
    err = np.maximum(np.asarray(table.m_err)[keep], 1e-12 * np.abs(m))
    slope, intercept, cov, resid = _weighted_loglog_slope(h, m, err)
    # bootstrap over batch means
    rng = np.random.default_rng(seed)
    batches = np.asarray(table.m_batches)[:, keep]
    nb = len(batches)
    slopes = []
    for _ in range(bootstrap):
        sel = rng.integers(0, nb, nb)
        mm = batches[sel].mean(axis=0)
        if np.any(mm <= 0):
            continue
        s, *_ = _weighted_loglog_slope(h, mm, err)
        slopes.append(s)
    boot_err = float(np.std(slopes, ddof=1)) if len(slopes) > 10 else float(np.sqrt(cov[0, 0]))
    return FitResult(
        kind="magnetization-exponent",
        params={"exponent": float(slope), "amplitude": float(math.exp(intercept))},
        errors={"exponent": boot_err},
        residual_norm=resid,
        window={"h_min": float(h.min()), "h_max": float(h.max()), "points": int(len(h))},
        model=np.exp(intercept) * h**slope,
    )


def effective_k2(lattice: LatticeSpec, k_list) -> np.ndarray:
    """The quadratic momentum variable 2d(1 - D^(k)) / sigma^2 per wave vector."""
    s2 = sigma2(lattice)
    return np.array(
        [2 * lattice.dimension * (1.0 - dhat(lattice, k)) / s2 for k in np.atleast_2d(k_list)]
    )


def fit_tau_surface(table, lattice: LatticeSpec, bootstrap: int = 200, seed: int = 0) -> FitResult:
    """Fit tau^(k; h) ~ C / (D^2 q^2 + 2^{3/2} sqrt(h)) with q^2 the
    sigma^2-corrected 2d(1 - D^(k)).

    Linear solve on 1/tau seeds a weighted nonlinear refinement; reports the
    relative residual field and a monotone-trend statistic of |epsilon|
    against the distance to the critical point (k, h) = (0, 0).
    """
    h = np.asarray(table.h_grid, dtype=float)
    q2 = effective_k2(lattice, table.k_list)
    tau = np.asarray(table.tau_mean)  # (nh, nk)
    err = np.maximum(np.asarray(table.tau_err), 1e-12 * np.abs(tau))
    hh = np.repeat(h, len(q2))
    qq = np.tile(q2, len(h))
    t = tau.reshape(-1)
    s = err.reshape(-1)
    good = t > 0
    hh, qq, t, s = hh[good], qq[good], t[good], s[good]
    if len(t) < 4:
        raise ValueError("not enough (k, h) points for the surface fit")
    # linear seed: 1/tau = alpha q^2 + beta sqrt(h)
    X = np.stack([qq, np.sqrt(hh)], axis=1)
    y = 1.0 / t
    w = (t * t / s) ** 2  # var(1/tau) = s^2 / t^4
    xtw = X.T * w
    gram = xtw @ X
    if np.linalg.cond(gram) > 1e12:
        raise ValueError("singular design: need spread in both k and h")
    alpha, beta = np.linalg.solve(gram, xtw @ y)

    def model(params, q2v, hv):
        c, d2 = params
        return c / (d2 * q2v + SQRT8 * np.sqrt(hv))

    def resid(params):
        return (model(params, qq, hh) - t) / s

    c0 = SQRT8 / beta
    start = np.array([c0, alpha * c0])
    sol = optimize.least_squares(resid, start, method="lm", xtol=1e-14)
    c_fit, d2_fit = sol.x
    fitted = model(sol.x, qq, hh)
    eps = fitted / t - 1.0
    distance = d2_fit * qq + SQRT8 * np.sqrt(hh)
    abs_eps = np.abs(eps)
    if len(t) > 3 and np.ptp(abs_eps) > 0 and np.ptp(distance) > 0:
        trend = stats.spearmanr(distance, abs_eps).statistic
    else:
        trend = float("nan")
    # bootstrap over batches
    rng = np.random.default_rng(seed)
    tb = np.asarray(table.tau_batches)  # (nb, nh, nk)
    nb = tb.shape[0]
    cs, d2s = [], []
    for _ in range(bootstrap):
        sel = rng.integers(0, nb, nb)
        tm = tb[sel].mean(axis=0).reshape(-1)[good]
        if np.any(tm <= 0):
            continue
        try:
            r = optimize.least_squares(
                lambda prm: (model(prm, qq, hh) - tm) / s, sol.x, method="lm", xtol=1e-12
            )
        except Exception:
            continue
        cs.append(r.x[0])
        d2s.append(r.x[1])
    err_c = float(np.std(cs, ddof=1)) if len(cs) > 10 else float("nan")
    err_d2 = float(np.std(d2s, ddof=1)) if len(d2s) > 10 else float("nan")
    return FitResult(
        kind="tau-surface",
        params={"C": float(c_fit), "D2": float(d2_fit), "trend_rho": float(trend)},
        errors={"C": err_c, "D2": err_d2},
        residual_norm=float(np.sqrt(np.mean(eps**2))),
        window={
            "h_min": float(hh.min()),
            "h_max": float(hh.max()),
            "q2_min": float(qq.min()),
            "q2_max": float(qq.max()),
            "points": int(len(t)),
        },
        model=fitted,
    )


def sandwich_constants(table, lattice: LatticeSpec) -> tuple[float, float]:
    """(K1, K2): extremal ratios tau^ ([1-D^(k)] + sqrt(1-e^-h)) / e^-h over the
    measured surface; the sandwich holds with these constants by construction,
    and their closeness measures how well the shape fits."""
    h = np.asarray(table.h_grid, dtype=float)
    one_minus_dhat = np.array([1.0 - dhat(lattice, k) for k in table.k_list])
    tau = np.asarray(table.tau_mean)
    ratios = []
    for i, hv in enumerate(h):
        if hv <= 0:
            continue
        shape = one_minus_dhat + math.sqrt(1.0 - math.exp(-hv))
        ratios.extend((tau[i] * shape / math.exp(-hv)).tolist())
    ratios = np.asarray(ratios)
    if not len(ratios) or ratios.min() <= 0:
        raise ValueError("surface contains nonpositive estimates")
    return float(ratios.min()), float(ratios.max())


def fit_cluster_tail(
    sizes: np.ndarray,
    counts: np.ndarray,
    n_sites: int,
    n_samples: int,
    window: tuple[float, float],
    bins_per_decade: int = 4,
) -> FitResult:
    """Tail exponent of P(|C| = n) ~ n^-tau from log-binned cluster counts.

    `window` excludes the torus-limited cutoff region and must be given
    explicitly; the histogram itself must span at least three decades.
    """
    sizes = np.asarray(sizes, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if math.log10(sizes.max() / sizes.min()) < 3.0:
        raise ValueError("histogram must span at least three decades")
    n_lo, n_hi = window
    prob = sizes * counts / (n_sites * n_samples)  # P(|C(0)| = n)
    n_bins = max(4, int(round(bins_per_decade * math.log10(n_hi / n_lo))))
    edges = np.logspace(math.log10(n_lo), math.log10(n_hi), n_bins + 1)
    centers, density, sigma = [], [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (sizes >= a) & (sizes < b)
        raw = counts[sel].sum()
        if raw < 8:
            continue
        mass = prob[sel].sum()
        width = b - a
        centers.append(math.sqrt(a * b))
        density.append(mass / width)
        sigma.append(mass / width / math.sqrt(raw))
    if len(centers) < 4:
        raise ValueError("too few populated bins in the fit window")
    slope, intercept, cov, resid = _weighted_loglog_slope(
        np.array(centers), np.array(density), np.array(sigma)
    )
    return FitResult(
        kind="cluster-tail",
        params={"exponent": float(-slope), "amplitude": float(math.exp(intercept))},
        errors={"exponent": float(np.sqrt(cov[0, 0]))},
        residual_norm=resid,
        window={"n_min": float(n_lo), "n_max": float(n_hi), "bins": len(centers)},
    )


def chi_amplitude_consistency(table, c_fitted: float) -> tuple[np.ndarray, np.ndarray]:
    """chi^_h sqrt(h) per field value and its distance from 2^{-3/2} C in
    combined errors (the susceptibility corollary of the surface fit)."""
    h = np.asarray(table.h_grid, dtype=float)
    keep = h > 0
    amp = np.asarray(table.chi_mean)[keep] * np.sqrt(h[keep])
    err = np.asarray(table.chi_err)[keep] * np.sqrt(h[keep])
    target = c_fitted / SQRT8
    pulls = (amp - target) / np.maximum(err, 1e-300)
    return amp, pulls
