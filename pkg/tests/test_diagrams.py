import math

import numpy as np
import pytest
from scipy import integrate as sint

from lacelab.diagrams import (
    DecayRate,
    IntegralSpec,
    critical_proxy,
    delta_exponent,
    full_grid_klist,
    grid_from_table,
    log_ratio_spread,
    mean_field_proxy,
    minimal_image_r2,
    polygon,
    position_space,
    reference_integral,
    scaling_exponent,
    square_one_massive,
    square_scaling_continuum,
    triangle,
    weighted_polygon,
)
from lacelab.lattice import LatticeSpec
from lacelab.mc import SimulationPlan, measure


def mc_grid(spec, p, h_values, samples=400, seed=13):
    plan = SimulationPlan(
        spec, p, tuple(h_values), full_grid_klist(spec), samples=samples, seed=seed, workers=2
    )
    table = measure(plan)
    return [grid_from_table(spec, table, i) for i in range(len(h_values))]


# -- torus sums -------------------------------------------------------------------


def test_polygon_delta_propagator_vanishes():
    spec = LatticeSpec(2, torus_side=4)
    g = mean_field_proxy(spec, 0.0)  # tau^ = 1: tau(x) = delta
    res = polygon(g, 2)
    assert res.sup == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(res.field, 0.0, atol=1e-14)


def test_triangle_matches_direct_convolution():
    # d=3, s=8 measured grid: FFT vs direct position-space triple convolution
    spec = LatticeSpec(3, torus_side=8)
    (grid,) = mc_grid(spec, 0.12, [0.1], samples=60)
    tau_x = position_space(grid, 1).reshape(-1)
    s = spec.torus_side
    coords = np.indices((s, s, s)).reshape(3, -1)

    def idx(c):
        return (c[0] % s) * s * s + (c[1] % s) * s + (c[2] % s)

    # direct: (tau * tau)(x) then sum_x tau2(x) tau(-x)
    tau2 = np.zeros(s**3)
    for shift in range(s**3):
        cs = coords + coords[:, shift][:, None]
        tau2[shift] = tau_x @ tau_x[idx(cs)]
    neg = idx(-coords)
    direct = float(tau2 @ tau_x[neg])
    assert triangle(grid) == pytest.approx(direct, rel=1e-10)


def test_weighted_polygon_matches_direct_sum():
    spec = LatticeSpec(3, torus_side=8)
    (grid,) = mc_grid(spec, 0.12, [0.05], samples=60)
    tau_x = position_space(grid, 1).reshape(-1)
    r2 = minimal_image_r2(spec).reshape(-1)
    s = spec.torus_side
    coords = np.indices((s, s, s)).reshape(3, -1)

    def idx(c):
        return (c[0] % s) * s * s + (c[1] % s) * s + (c[2] % s)

    g_y = r2 * tau_x
    best = -1.0
    for x in range(s**3):
        cs = coords[:, x][:, None] - coords
        val = g_y @ tau_x[idx(cs)]
        best = max(best, val)
    assert weighted_polygon(grid, 2) == pytest.approx(best, rel=1e-10)


def test_weighted_polygon_delta_vanishes():
    spec = LatticeSpec(2, torus_side=4)
    g = mean_field_proxy(spec, 0.0)
    assert weighted_polygon(g, 3) == pytest.approx(0.0, abs=1e-13)


def test_polygon_sup_monotone_in_h_on_mc_grids():
    spec = LatticeSpec(2, torus_side=6)
    g0, gh = mc_grid(spec, 0.45, [0.0, 0.2], samples=300)
    assert polygon(gh, 3).sup <= polygon(g0, 3).sup + 1e-12
    assert weighted_polygon(gh, 2) <= weighted_polygon(g0, 2) + 1e-12


def test_square_one_massive_basics():
    spec = LatticeSpec(2, torus_side=4)
    g0, gh = mc_grid(spec, 0.0, [0.0, 0.3], samples=5)
    # p = 0: tau^ is constant e^{-h}
    assert np.allclose(gh.values, math.exp(-0.3), atol=1e-14)
    assert square_one_massive(gh, g0) == pytest.approx(math.exp(-0.3), abs=1e-13)
    same = square_one_massive(g0, g0)
    assert same == pytest.approx(float(np.mean(g0.values**4)), abs=1e-13)
    with pytest.raises(ValueError):
        square_one_massive(gh, mean_field_proxy(LatticeSpec(2, torus_side=6), 0.0))


def test_triangle_condition_proxy_high_dimensions():
    # random-walk proxy at p = 1/Omega: open triangle finite, decreasing in d,
    # with Omega * (triangle - 1) bounded across d > 6
    vals = {}
    for d in (7, 8, 9):
        spec = LatticeSpec(d, torus_side=6)
        g = mean_field_proxy(spec, 1.0 / spec.omega, zero_mode=0.0)
        vals[d] = (triangle(g) - 1.0, spec.omega)
    opens = [vals[d][0] for d in (7, 8, 9)]
    assert all(np.isfinite(opens)) and all(v > 0 for v in opens)
    assert opens[0] > opens[1] > opens[2]
    assert all(v * om < 20 for v, om in vals.values())


def test_mean_field_proxy_guards():
    spec = LatticeSpec(3, torus_side=4)
    with pytest.raises(ValueError):
        mean_field_proxy(spec, 1.0 / spec.omega)  # zero mode diverges
    g = mean_field_proxy(spec, 1.0 / spec.omega, zero_mode=0.0)
    assert g.values.reshape(-1)[0] == 0.0
    with pytest.raises(ValueError):
        mean_field_proxy(spec, 2.0 / spec.omega, zero_mode=0.0)  # negative denominators
    with pytest.raises(ValueError):
        critical_proxy(spec, 0.0)


def test_grid_from_table_requires_full_grid():
    spec = LatticeSpec(2, torus_side=3)
    plan = SimulationPlan(spec, 0.3, (0.1,), ((0.0, 0.0),), samples=5, seed=1)
    with pytest.raises(ValueError):
        grid_from_table(spec, measure(plan), 0)


# -- reference integrals ------------------------------------------------------------


@pytest.mark.parametrize("d", [2, 5, 7])
def test_integral_constant_integrand_exact(d):
    res = reference_integral(IntegralSpec(0, 0, d, 0.3))
    assert res.value == pytest.approx((2 * math.pi) ** d, rel=1e-12)


def test_integral_divergence_flags():
    assert reference_integral(IntegralSpec(1.0, 1.5, 3, 0.1)).divergent  # d <= 2n
    assert reference_integral(IntegralSpec(1.0, 3.0, 7, 0.0)).divergent  # h = 0, d <= 2(m+n)
    assert not reference_integral(IntegralSpec(1.0, 3.0, 9, 0.0)).divergent
    assert not reference_integral(IntegralSpec(1.0, 3.0, 7, 1e-6)).divergent


def test_integral_low_d_against_dense_quadrature():
    def dense(m, n, d, h):
        f = lambda *k: (sum(x * x for x in k) + math.sqrt(h)) ** -m
        val, _ = sint.nquad(f, [[-math.pi, math.pi]] * d, opts={"limit": 200})
        return val

    mine = reference_integral(IntegralSpec(1, 0, 2, 0.25)).value
    assert mine == pytest.approx(dense(1, 0, 2, 0.25), rel=2e-4)


def test_scaling_exponents_match_small_h_law():
    assert scaling_exponent(1, 3, 7) == pytest.approx(-0.25, abs=0.02)
    assert scaling_exponent(1, 3, 10) == pytest.approx(0.0, abs=0.02)
    mean, spread = log_ratio_spread(1, 3, 8)
    assert mean > 0 and spread <= 0.05


def test_square_scaling_continuum():
    hs = np.logspace(-10, -7, 7)
    s7 = [square_scaling_continuum(7, h) for h in hs]
    slope = np.polyfit(np.log(hs), np.log(s7), 1)[0]
    assert slope == pytest.approx(-0.25, abs=0.05)
    # S_h M_h -> 0 at the advertised rate, with M_h ~ sqrt(h)
    rate = delta_exponent(7)
    prods = np.array(s7) * np.sqrt(hs)
    bound = np.array([rate.evaluate(h) for h in hs])
    ratio = prods / bound
    assert np.all(np.isfinite(ratio)) and ratio.max() / ratio.min() < 1.6


def test_delta_exponent_table():
    from fractions import Fraction

    assert delta_exponent(7) == DecayRate(Fraction(1, 4), 0)
    assert delta_exponent(8) == DecayRate(Fraction(1, 2), 1)
    assert delta_exponent(10) == DecayRate(Fraction(1, 2), 0)
    with pytest.raises(ValueError):
        delta_exponent(6)
