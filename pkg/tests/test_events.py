import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lacelab import events as ev
from lacelab.events import (
    BondSiteConfig,
    FiniteGraph,
    backbone,
    bundled_graph,
    cluster,
    cluster_mask,
    connected,
    connected_in,
    connected_through,
    doubly_connected,
    event_F3,
    event_F4,
    event_F5,
    occurs_in,
    occurs_on,
    path_graph,
    cycle_graph,
    pivotal_bonds,
    restricted_cluster,
    sausages,
    site_set,
    torus_graph,
)

P3 = path_graph(3)
C4 = cycle_graph(4)


def bits(*idx):
    return site_set(idx)


# -- clusters ---------------------------------------------------------------


def test_cluster_examples():
    assert cluster(P3, BondSiteConfig(0b00), 0) == bits(0)
    assert cluster(P3, BondSiteConfig(0b11), 0) == bits(0, 1, 2)
    assert cluster(P3, BondSiteConfig(0b10), 0) == bits(0)  # only bond {1,2} occupied


def test_restricted_cluster_examples():
    # bond already vacant: equals the plain cluster of the set
    assert restricted_cluster(P3, BondSiteConfig(0b01), 1, bits(0)) == bits(0, 1)
    # path 0-1-2 both occupied, remove {1,2}, A={0}
    assert restricted_cluster(P3, BondSiteConfig(0b11), 1, bits(0)) == bits(0, 1)
    # triangle, all occupied, remove {0,1}: alternate path survives
    tri = cycle_graph(3)
    assert restricted_cluster(tri, BondSiteConfig(0b111), 0, bits(0)) == bits(0, 1, 2)


# -- double connections ------------------------------------------------------


def test_doubly_connected_examples():
    g = path_graph(2)
    assert doubly_connected(g, BondSiteConfig(0b0), 1, 1)
    assert not doubly_connected(g, BondSiteConfig(0b1), 0, 1)
    assert doubly_connected(C4, BondSiteConfig(0b1111), 0, 2)


def _random_graph(rng, n_sites, n_bonds):
    pairs = list(itertools.combinations(range(n_sites), 2))
    rng.shuffle(pairs)
    return FiniteGraph(n_sites, tuple(pairs[:n_bonds]))


def test_doubly_connected_matches_flow():
    rng = random.Random(3)
    for _ in range(150):
        g = _random_graph(rng, 6, rng.randint(0, 9))
        occ = rng.getrandbits(g.n_bonds)
        x, y = rng.randrange(6), rng.randrange(6)
        expect = x == y or ev._max_flow_two(g, occ, x, [y, y]) >= 2
        assert doubly_connected(g, BondSiteConfig(occ), x, y) == expect


# -- connected in / through --------------------------------------------------


def test_connected_in_examples():
    cfg = BondSiteConfig(0b11)
    assert connected_in(P3, cfg, 0, 0, bits(0))
    assert not connected_in(P3, cfg, 0, 0, bits(1, 2))
    assert not connected_in(P3, cfg, 0, 2, bits(0, 2))
    assert connected_in(P3, cfg, 0, 2, bits(0, 1, 2))


def test_connected_through_examples():
    cfg = BondSiteConfig(0b11)
    assert connected_through(P3, cfg, 0, 2, P3.all_sites)
    assert not connected_through(P3, cfg, 0, 2, 0)
    assert connected_through(P3, cfg, 0, 2, bits(1))
    assert connected(P3, cfg, 0, 2)


@given(st.data())
@settings(max_examples=150, deadline=None)
def test_through_implies_connected(data):
    rng = random.Random(data.draw(st.integers(0, 2**30)))
    g = _random_graph(rng, 6, rng.randint(0, 10))
    occ = rng.getrandbits(g.n_bonds)
    x, y = rng.randrange(6), rng.randrange(6)
    a = rng.getrandbits(6)
    if connected_through(g, BondSiteConfig(occ), x, y, a):
        assert connected(g, BondSiteConfig(occ), x, y)


# -- pivotal bonds and sausages ----------------------------------------------


def test_pivotal_path():
    res = pivotal_bonds(P3, BondSiteConfig(0b11), 0, bits(2))
    assert res.connected and res.bonds == [(0, 1), (1, 2)]


def test_pivotal_cycle_has_none():
    res = pivotal_bonds(C4, BondSiteConfig(0b1111), 0, bits(2))
    assert res.connected and res.bonds == []


def test_pivotal_with_chord():
    # 4-site path 0-1-2-3 plus chord {0,2}: only (2,3) is pivotal for 0 -> 3
    g = FiniteGraph(4, ((0, 1), (1, 2), (2, 3), (0, 2)))
    res = pivotal_bonds(g, BondSiteConfig(0b1111), 0, bits(3))
    assert res.connected and res.bonds == [(2, 3)]


def test_pivotal_disconnected_flag():
    res = pivotal_bonds(P3, BondSiteConfig(0b00), 0, bits(2))
    assert not res.connected and res.bonds == []


def test_sausages_examples():
    g2 = path_graph(2)
    out = sausages(g2, BondSiteConfig(0b1), 0, 1)
    assert [(s.sites, s.left, s.right) for s in out] == [(bits(0), 0, 0), (bits(1), 1, 1)]
    out = sausages(C4, BondSiteConfig(0b1111), 0, 2)
    assert len(out) == 1 and out[0].sites == C4.all_sites
    out = sausages(P3, BondSiteConfig(0b11), 0, 2)
    assert [s.sites for s in out] == [bits(0), bits(1), bits(2)]
    with pytest.raises(ValueError):
        sausages(P3, BondSiteConfig(0b10), 0, 2)


@given(st.data())
@settings(max_examples=100, deadline=None)
def test_pivotal_and_sausage_invariants(data):
    rng = random.Random(data.draw(st.integers(0, 2**30)))
    g = _random_graph(rng, 6, rng.randint(1, 10))
    occ = rng.getrandbits(g.n_bonds)
    x, y = rng.randrange(6), rng.randrange(6)
    cfg = BondSiteConfig(occ)
    if not connected(g, cfg, x, y):
        return
    res = pivotal_bonds(g, cfg, x, bits(y))
    # removing any pivotal bond separates x from y
    for (u, v) in res.bonds:
        for i, (a, b) in enumerate(g.bonds):
            if {a, b} == {u, v}:
                assert not (cluster_mask(g, occ & ~(1 << i), x) >> y) & 1
    if doubly_connected(g, cfg, x, y):
        assert res.bonds == []
    # sausage endpoints are doubly connected within their sausage
    for s in sausages(g, cfg, x, y):
        sub = occ & g.bonds_in(s.sites)
        assert doubly_connected(g, BondSiteConfig(sub), s.left, s.right)
    # first pivotal tail is doubly connected to x in the full configuration
    if res.bonds:
        assert doubly_connected(g, cfg, x, res.bonds[0][0])


# -- backbone -----------------------------------------------------------------


def test_backbone_examples():
    assert backbone(P3, BondSiteConfig(0b11), 0, 2) == bits(0, 1, 2)
    # dangling bond 1-3 is excluded
    g = FiniteGraph(4, ((0, 1), (1, 2), (1, 3)))
    assert backbone(g, BondSiteConfig(0b111), 0, 2) == bits(0, 1, 2)
    assert backbone(P3, BondSiteConfig(0b10), 0, 2) == 0


def test_backbone_subset_of_cluster():
    rng = random.Random(11)
    for _ in range(100):
        g = _random_graph(rng, 6, rng.randint(1, 10))
        occ = rng.getrandbits(g.n_bonds)
        x, y = rng.randrange(6), rng.randrange(6)
        bb = backbone(g, BondSiteConfig(occ), x, y)
        assert bb & ~cluster_mask(g, occ, x) == 0


# -- occurs on / occurs in -----------------------------------------------------


def test_occurs_on_examples():
    cfg = BondSiteConfig(0b11, green=bits(2))
    assert occurs_on(P3, cfg, P3.all_sites) == cfg
    assert occurs_on(P3, cfg, 0) == BondSiteConfig(0, 0)
    # exclusion forces one bond vacant
    assert occurs_on(P3, cfg, P3.all_sites, exclude=0) == BondSiteConfig(0b10, bits(2))
    # touching vs inside: S={1} keeps both bonds under "on", none under "in"
    assert occurs_on(P3, cfg, bits(1)).occupied == 0b11
    assert occurs_in(P3, cfg, bits(1)).occupied == 0


def _random_event(rng, g):
    table = {}

    def event(gg, cfg):
        key = (cfg.occupied, cfg.green)
        if key not in table:
            table[key] = rng.random() < 0.5
        return table[key]

    return event


def _event_set(g, event, restrict=None):
    """The event as an explicit set of (occupied, green) configurations."""
    out = set()
    for occ in range(1 << g.n_bonds):
        for green in range(1 << g.n_sites):
            cfg = BondSiteConfig(occ, green)
            if restrict is not None:
                cfg = restrict(cfg)
            if event(g, cfg):
                out.add((occ, green))
    return out


def test_occurs_algebra_complement_and_union():
    # extensional versions of the complement and union laws for "occurs on"
    rng = random.Random(5)
    g = _random_graph(rng, 4, 4)
    universe = {
        (occ, green)
        for occ in range(1 << g.n_bonds)
        for green in range(1 << g.n_sites)
    }
    for _ in range(10):
        e = _random_event(rng, g)
        f = _random_event(rng, g)
        s = rng.getrandbits(4)
        on_s = lambda cfg: occurs_on(g, cfg, s)
        e_on = _event_set(g, e, on_s)
        not_e_on = _event_set(g, lambda gg, c: not e(gg, c), on_s)
        assert universe - e_on == not_e_on
        union_on = _event_set(g, lambda gg, c: e(gg, c) or f(gg, c), on_s)
        assert union_on == e_on | _event_set(g, f, on_s)


def test_occurs_nesting_in_arbitrary_sets():
    # {E in S} in T == E in (S intersect T) holds for any S, T
    rng = random.Random(6)
    g = _random_graph(rng, 5, 7)
    for _ in range(200):
        s, t = rng.getrandbits(5), rng.getrandbits(5)
        cfg = BondSiteConfig(rng.getrandbits(g.n_bonds), rng.getrandbits(5))
        lhs = occurs_in(g, occurs_in(g, cfg, t), s)
        rhs = occurs_in(g, cfg, s & t)
        assert lhs == rhs


def test_occurs_nesting_on_nested_sets():
    # the "occurs on" nesting law holds when the sets are nested; a bond with
    # one endpoint in S\T and the other in T\S breaks it otherwise
    rng = random.Random(7)
    g = _random_graph(rng, 5, 7)
    for _ in range(200):
        t = rng.getrandbits(5)
        s = t & rng.getrandbits(5)  # s subset of t
        cfg = BondSiteConfig(rng.getrandbits(g.n_bonds), rng.getrandbits(5))
        assert occurs_on(g, occurs_on(g, cfg, t), s) == occurs_on(g, cfg, s & t)
    # the crossing-bond counterexample, kept as documentation of the restriction
    g2 = path_graph(2)
    cfg = BondSiteConfig(0b1, 0)
    composed = occurs_on(g2, occurs_on(g2, cfg, bits(1)), bits(0))
    direct = occurs_on(g2, cfg, 0)
    assert composed.occupied == 0b1 and direct.occupied == 0


# -- F events ------------------------------------------------------------------


def test_f_events_need_green_and_vanish_without():
    cfg = BondSiteConfig(0b11, green=0)
    for f in (event_F3, event_F4, event_F5):
        assert not f(P3, cfg, 0, 2, bits(1))
    with pytest.raises(ValueError):
        event_F3(P3, BondSiteConfig(0b11), 0, 2, bits(1))


def test_torus_graph_collapses_small_sides():
    t22 = torus_graph(2, 2)
    assert t22.n_sites == 4 and t22.n_bonds == 4
    t33 = torus_graph(2, 3)
    assert t33.n_sites == 9 and t33.n_bonds == 18
    t222 = torus_graph(3, 2)
    assert t222.n_sites == 8 and t222.n_bonds == 12


def test_bundled_graph_roundtrip_json():
    g = bundled_graph("k4_minus")
    assert FiniteGraph.from_json(g.to_json()) == g
    with pytest.raises(ValueError):
        bundled_graph("nope")


def test_config_hex_roundtrip():
    cfg = BondSiteConfig(0b1011, green=bits(0, 3))
    assert BondSiteConfig.from_hex(cfg.to_hex()) == cfg
    cfg2 = BondSiteConfig(0)
    assert BondSiteConfig.from_hex(cfg2.to_hex()) == cfg2
