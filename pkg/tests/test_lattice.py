import math

import numpy as np
import pytest

from lacelab.lattice import (
    LatticeSpec,
    TorusIndexer,
    axis_momenta,
    dhat,
    dhat_grid,
    fourier_grid,
    half_neighbourhood,
    neighbourhood,
    sigma2,
    spec_from_config,
)


def test_neighbourhood_nn_d2():
    omega = neighbourhood(LatticeSpec(dimension=2))
    assert len(omega) == 4
    assert set(omega) == {(1, 0), (-1, 0), (0, 1), (0, -1)}


def test_neighbourhood_spread_counts():
    # (2L+1)^d - 1 by direct enumeration
    omega = neighbourhood(LatticeSpec(2, "spread", torus_side=5, interaction_range=1))
    assert len(omega) == 8
    omega = neighbourhood(LatticeSpec(1, "spread", torus_side=5, interaction_range=2))
    assert set(omega) == {(-2,), (-1,), (1,), (2,)}


@pytest.mark.parametrize(
    "spec",
    [
        LatticeSpec(3),
        LatticeSpec(2, "spread", torus_side=7, interaction_range=2),
        LatticeSpec(7, torus_side=4),
    ],
)
def test_omega_symmetric_and_sized(spec):
    omega = neighbourhood(spec)
    assert len(omega) == spec.omega
    assert set(omega) == {tuple(-c for c in o) for o in omega}
    assert len(half_neighbourhood(spec)) * 2 == len(omega)


def test_dhat_trivial_values():
    assert dhat(LatticeSpec(5), [0.0] * 5) == pytest.approx(1.0)
    assert dhat(LatticeSpec(2), [math.pi, math.pi]) == pytest.approx(-1.0)
    spread = LatticeSpec(1, "spread", torus_side=3, interaction_range=1)
    assert dhat(spread, [math.pi]) == pytest.approx(-1.0)


@pytest.mark.parametrize(
    "spec",
    [LatticeSpec(2), LatticeSpec(4), LatticeSpec(2, "spread", torus_side=9, interaction_range=2)],
)
def test_dhat_bounds_and_small_k(spec):
    rng = np.random.default_rng(7)
    for _ in range(50):
        k = rng.uniform(-math.pi, math.pi, spec.dimension)
        v = dhat(spec, k, check_imag=True)
        assert -1.0 - 1e-12 <= v <= 1.0 + 1e-12
    assert dhat(spec, [0.0] * spec.dimension) == pytest.approx(1.0)
    # 2d (1 - D^) / (sigma^2 k^2) -> 1 as k -> 0
    s2 = sigma2(spec)
    for eps in (1e-2, 1e-3):
        k = np.full(spec.dimension, eps)
        ratio = 2 * spec.dimension * (1 - dhat(spec, k)) / (s2 * float(k @ k))
        assert ratio == pytest.approx(1.0, abs=5 * eps)


def test_fourier_grid_small():
    g = fourier_grid(LatticeSpec(1, torus_side=2))
    assert sorted(g[:, 0]) == pytest.approx([0.0, math.pi])
    g = fourier_grid(LatticeSpec(1, torus_side=4))
    assert sorted(g[:, 0]) == pytest.approx([-math.pi / 2, 0.0, math.pi / 2, math.pi])
    g = fourier_grid(LatticeSpec(2, torus_side=2))
    assert g.shape == (4, 2)
    assert {tuple(np.round(r, 12)) for r in g} == {
        (0.0, 0.0),
        (0.0, round(math.pi, 12)),
        (round(math.pi, 12), 0.0),
        (round(math.pi, 12), round(math.pi, 12)),
    }


def test_dhat_grid_matches_pointwise():
    spec = LatticeSpec(2, "spread", torus_side=7, interaction_range=2)
    grid = dhat_grid(spec).reshape(-1)
    ks = fourier_grid(spec)
    for i in range(0, len(ks), 5):
        assert grid[i] == pytest.approx(dhat(spec, ks[i]), abs=1e-12)


def test_indexer_roundtrip_and_bond_count():
    spec = LatticeSpec(3, torus_side=4)
    ti = TorusIndexer(spec)
    assert ti.n_bonds == spec.volume * spec.omega // 2
    for idx in range(0, ti.n_sites, 7):
        assert ti.site_index(ti.site_coords(idx)) == idx
    for b in range(0, ti.n_bonds, 11):
        site, off = ti.bond_decode(b)
        assert ti.bond_index(site, off) == b
    ends_a, ends_b = ti.bond_arrays()
    for b in range(0, ti.n_bonds, 13):
        assert (ends_a[b], ends_b[b]) == ti.bond_sites(b)
    # every bond's endpoints differ and appear once as an unordered pair
    pairs = {frozenset((int(a), int(b))) for a, b in zip(ends_a, ends_b)}
    assert len(pairs) == ti.n_bonds


def test_indexer_rejects_ambiguous_small_torus():
    with pytest.raises(ValueError):
        TorusIndexer(LatticeSpec(2, torus_side=2))


def test_spec_from_config():
    spec = spec_from_config({"dimension": "7", "kind": "nn", "torus_side": "6"})
    assert spec == LatticeSpec(7, "nn", 6)
    with pytest.raises(ValueError):
        spec_from_config({"dimension": "2", "kind": "spread", "torus_side": "2", "range": "1"})
