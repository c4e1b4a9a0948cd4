"""Exact enumeration oracle for small bond/site graphs.

Sums over all bond (and green-site) configurations of a finite graph to
evaluate expectations exactly, and verifies the expansion identities and
inequalities pointwise or in expectation.  The heavy per-configuration
structure (clusters, bridges, restricted clusters) is computed once and
aggregated into small tables keyed by occupation count and cluster sizes, so
an identity can be re-evaluated over a whole (p, h) grid at negligible cost.

Conventions: the field enters through z = exp(-h); a site is green with
probability 1 - z.  In exact mode p and z are Fractions and all identity
residuals are exact rationals.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .events import (
    BondSiteConfig,
    FiniteGraph,
    bridges,
    cluster_mask,
    cluster_of_set,
    connected_in,
    connected_through,
    event_F2,
    event_F3,
    event_F4,
    event_F5,
    occurs_in,
    occurs_on,
    sites_of,
)

MAX_TERMS = 1 << 28
MAX_NESTED_TERMS = 1 << 30

Event = Callable[[FiniteGraph, BondSiteConfig], bool]


@dataclass(frozen=True)
class ExactValue:
    value: float
    term_count: int


@dataclass(frozen=True)
class EnumerationSpec:
    """Enumeration parameters: graph, bond density p, field h, green handling.

    green_mode "analytic" integrates the site marginal (valid when the green
    dependence factors through G-free cluster weights z^|C|); "explicit"
    enumerates green subsets and is always valid.  Passing exact Fractions
    for p and z turns every sum into exact rational arithmetic.
    """

    graph: FiniteGraph
    p: float | Fraction
    h: float = 0.0
    green_mode: str = "analytic"
    z: Optional[float | Fraction] = None

    def __post_init__(self):
        if self.green_mode not in ("analytic", "explicit"):
            raise ValueError(f"unknown green mode {self.green_mode!r}")
        if isinstance(self.p, Fraction):
            if not 0 <= self.p <= 1:
                raise ValueError("p out of range")
        elif not 0.0 <= self.p <= 1.0:
            raise ValueError("p out of range")
        if self.h < 0:
            raise ValueError("h must be >= 0")
        terms = 1 << self.graph.n_bonds
        if self.green_mode == "explicit":
            terms <<= self.graph.n_sites
        if terms > MAX_TERMS:
            raise ValueError(
                f"enumeration would need {terms} terms (guard {MAX_TERMS}); "
                "use a smaller graph"
            )

    @property
    def z_value(self):
        if self.z is not None:
            return self.z
        return math.exp(-self.h)

    def exact_pair(self) -> bool:
        return isinstance(self.p, Fraction) and isinstance(self.z_value, Fraction)


def _bond_weights(p, n_bonds: int):
    """weights[o] = p^o (1-p)^(n_bonds-o)."""
    one = Fraction(1) if isinstance(p, Fraction) else 1.0
    q = one - p
    pw = [one]
    qw = [one]
    for _ in range(n_bonds):
        pw.append(pw[-1] * p)
        qw.append(qw[-1] * q)
    return [pw[o] * qw[n_bonds - o] for o in range(n_bonds + 1)]


def _site_weights(z, n_sites: int):
    """w[g] = (1-z)^g z^(n_sites-g): probability of a green pattern with g greens."""
    one = Fraction(1) if isinstance(z, Fraction) else 1.0
    zp = [one]
    gp = [one]
    for _ in range(n_sites):
        zp.append(zp[-1] * z)
        gp.append(gp[-1] * (one - z))
    return [gp[g] * zp[n_sites - g] for g in range(n_sites + 1)]


def _zpow(z, n_sites: int):
    one = Fraction(1) if isinstance(z, Fraction) else 1.0
    out = [one]
    for _ in range(n_sites):
        out.append(out[-1] * z)
    return out


class _Kahan:
    """Compensated accumulator; passes Fractions through exactly."""

    __slots__ = ("total", "comp", "exact")

    def __init__(self, exact: bool = False):
        self.exact = exact
        self.total = Fraction(0) if exact else 0.0
        self.comp = 0.0

    def add(self, x):
        if self.exact:
            self.total += x
            return
        y = x - self.comp
        t = self.total + y
        self.comp = (t - self.total) - y
        self.total = t


class GraphTables:
    """Lazy per-graph caches of configuration structure."""

    def __init__(self, g: FiniteGraph):
        self.g = g
        self._cluster: dict[tuple[int, int], int] = {}
        self._dcc: dict[tuple[int, int], int] = {}

    def cluster(self, occ: int, x: int) -> int:
        key = (occ, x)
        out = self._cluster.get(key)
        if out is None:
            out = cluster_mask(self.g, occ, x)
            self._cluster[key] = out
        return out

    def dcc_mask(self, occ: int, x: int) -> int:
        """Sites doubly connected to x (the 2-edge-connected component of x)."""
        key = (occ, x)
        out = self._dcc.get(key)
        if out is None:
            out = cluster_mask(self.g, occ & ~bridges(self.g, occ), x)
            self._dcc[key] = out
        return out


# ---------------------------------------------------------------------------
# Basic expectations
# ---------------------------------------------------------------------------


def expectation(spec: EnumerationSpec, event: Event) -> ExactValue:
    """< I[event] > by full enumeration.

    In analytic mode the event must not read greens (pass bond events);
    events needing the green field require green_mode="explicit".
    """
    g = spec.graph
    wb = _bond_weights(spec.p, g.n_bonds)
    exact = spec.exact_pair()
    acc = _Kahan(exact)
    terms = 0
    if spec.green_mode == "explicit":
        n = g.n_sites
        ws = _site_weights(spec.z_value, n)
        for occ in range(1 << g.n_bonds):
            wo = wb[occ.bit_count()]
            for green in range(1 << n):
                if event(g, BondSiteConfig(occ, green)):
                    acc.add(wo * ws[green.bit_count()])
                terms += 1
    else:
        for occ in range(1 << g.n_bonds):
            if event(g, BondSiteConfig(occ, None)):
                acc.add(wb[occ.bit_count()])
            terms += 1
    return ExactValue(acc.total, terms)


def expectation_weighted(spec: EnumerationSpec, payload) -> ExactValue:
    """Analytic-green expectation of an event with factorable green weight.

    `payload(g, occ)` returns an iterable of (coefficient, site_mask) pairs;
    the summand is w(occ) * sum coef * z^popcount(mask).  This covers G-free
    factors (+1, C) and connected-to-green factors (+1, 0), (-1, C).
    """
    g = spec.graph
    wb = _bond_weights(spec.p, g.n_bonds)
    zp = _zpow(spec.z_value, g.n_sites)
    acc = _Kahan(spec.exact_pair())
    terms = 0
    for occ in range(1 << g.n_bonds):
        wo = wb[occ.bit_count()]
        for coef, mask in payload(g, occ):
            if coef:
                acc.add(coef * wo * zp[mask.bit_count()])
        terms += 1
    return ExactValue(acc.total, terms)


def two_point(spec: EnumerationSpec, x: int, y: int) -> ExactValue:
    """tau(x, y) = < I[x <-> y] z^|C(x)| > exactly."""
    g = spec.graph

    def payload(gg, occ):
        c = cluster_mask(gg, occ, x)
        if (c >> y) & 1:
            yield (1, c)

    return expectation_weighted(spec, payload)


def two_point_vector(spec: EnumerationSpec, x: int):
    """tau(v, x) for every site v, in one enumeration pass."""
    g = spec.graph
    wb = _bond_weights(spec.p, g.n_bonds)
    zp = _zpow(spec.z_value, g.n_sites)
    exact = spec.exact_pair()
    acc = [_Kahan(exact) for _ in range(g.n_sites)]
    for occ in range(1 << g.n_bonds):
        c = cluster_mask(g, occ, x)
        w = wb[occ.bit_count()] * zp[c.bit_count()]
        for v in sites_of(c):
            acc[v].add(w)
    return [a.total for a in acc]


def magnetization_susceptibility(spec: EnumerationSpec, origin: int = 0):
    """(M, chi) with M = 1 - E z^|C|, chi = E |C| z^|C|.

    Cross-checks chi against the summed two-point function to 1e-12.
    """
    g = spec.graph
    wb = _bond_weights(spec.p, g.n_bonds)
    zp = _zpow(spec.z_value, g.n_sites)
    exact = spec.exact_pair()
    acc_z = _Kahan(exact)
    acc_chi = _Kahan(exact)
    for occ in range(1 << g.n_bonds):
        c = cluster_mask(g, occ, origin).bit_count()
        w = wb[occ.bit_count()]
        acc_z.add(w * zp[c])
        acc_chi.add(w * c * zp[c])
    tau_sum = sum(two_point_vector(spec, origin))
    if not exact:
        assert abs(acc_chi.total - tau_sum) <= 1e-12 * max(1.0, abs(tau_sum))
    else:
        assert acc_chi.total == tau_sum
    n_terms = 1 << g.n_bonds
    return ExactValue(1 - acc_z.total, n_terms), ExactValue(acc_chi.total, n_terms)


def expected_cluster_count(spec: EnumerationSpec) -> ExactValue:
    """E[number of clusters], counting isolated sites (h plays no role)."""
    from .events import components

    g = spec.graph
    wb = _bond_weights(spec.p, g.n_bonds)
    acc = _Kahan(spec.exact_pair())
    for occ in range(1 << g.n_bonds):
        acc.add(wb[occ.bit_count()] * len(components(g, occ)))
    return ExactValue(acc.total, 1 << g.n_bonds)


def tau_hat(spec: EnumerationSpec, origin: int, phases: Sequence[float]) -> float:
    """Fourier sum sum_x tau(origin, x) cos(k.x) given per-site phase angles."""
    taus = two_point_vector(spec, origin)
    return float(sum(t * math.cos(ph) for t, ph in zip(taus, phases)))


# ---------------------------------------------------------------------------
# Aggregated tables for the nested expansion identities
# ---------------------------------------------------------------------------
#
# The inner expectations of the expansion identities have analytically
# integrable green dependence:
#   tau^A(v, x): enumerate bonds inside the complement of A;
#                weight z^|C'(v)|, indicator x in C'(v).
#   <F1(v, x; A)>: I[v <->x through A] z^|C(v)|.
#   <F2(v, x; A)>: I[v <-> x inside complement] z^|R'| (1 - z^|R \ R'|),
#                  with R = C(v) and R' its sub-cluster avoiding bonds
#                  touching A.
# Each table maps structural keys to integer counts; evaluation at (p, z)
# multiplies by bond weights and z powers.


def _submask_configs(mask: int):
    """All submasks of `mask`, including 0 and mask itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


class _InnerTauA:
    """Table for tau^A(v, x): keys (occupied count on free bonds, |C'(v)|)."""

    def __init__(self, g: FiniteGraph, a_mask: int, v: int, x: int):
        comp = g.all_sites & ~a_mask
        free = g.bonds_in(comp)
        self.n_free = free.bit_count()
        self.counts: dict[tuple[int, int], int] = {}
        self.inner_terms = 1 << self.n_free
        if not ((comp >> v) & 1 and (comp >> x) & 1):
            return  # endpoint inside A: tau^A vanishes identically
        for occ in _submask_configs(free):
            c = cluster_mask(g, occ, v)
            if (c >> x) & 1:
                key = (occ.bit_count(), c.bit_count())
                self.counts[key] = self.counts.get(key, 0) + 1

    def value(self, wb_free, zp):
        return sum(n * wb_free[o] * zp[c] for (o, c), n in self.counts.items())


class _InnerF1F2:
    """Joint table for <F1(v,x;A)> and <F2(v,x;A)> over a full enumeration."""

    def __init__(self, g: FiniteGraph, a_mask: int, v: int, x: int):
        comp = g.all_sites & ~a_mask
        avoiding_bonds = ~g.bonds_touching(a_mask)
        inside_bonds = g.bonds_in(comp)
        self.f1: dict[tuple[int, int], int] = {}
        self.f2: dict[tuple[int, int, int], int] = {}
        self.inner_terms = 1 << g.n_bonds
        v_in_comp = (comp >> v) & 1
        for occ in range(1 << g.n_bonds):
            o = occ.bit_count()
            r = cluster_mask(g, occ, v)
            # F1: v <-> x through A (and G-free: weight z^|R|)
            if x == v:
                through = (a_mask >> v) & 1
            elif (r >> x) & 1:
                through = not (cluster_mask(g, occ & avoiding_bonds, v) >> x) & 1
            else:
                through = False
            if through:
                key = (o, r.bit_count())
                self.f1[key] = self.f1.get(key, 0) + 1
            # F2: v <-> x inside complement, v <-> G through A
            if v_in_comp:
                if x == v:
                    conn = True
                else:
                    conn = (comp >> x) & 1 and (
                        cluster_mask(g, occ & inside_bonds, v) >> x
                    ) & 1
                if conn:
                    rp = cluster_mask(g, occ & avoiding_bonds, v)
                    key2 = (o, rp.bit_count(), (r & ~rp).bit_count())
                    self.f2[key2] = self.f2.get(key2, 0) + 1

    def f1_value(self, wb, zp):
        return sum(n * wb[o] * zp[c] for (o, c), n in self.f1.items())

    def f2_value(self, wb, zp):
        return sum(
            n * wb[o] * zp[rp] * (1 - zp[rm]) for (o, rp, rm), n in self.f2.items()
        )


class ExpansionTables:
    """(p, z)-independent structure for Eq. expan0 and the four-term identity.

    The outer pass enumerates bond configurations and directed bonds (u0, v0),
    recording the occupation count, the restricted cluster of the origin with
    that bond off, and whether the origin is doubly connected to u0 there.
    Inner tables are memoized per distinct (cluster, v0).
    """

    def __init__(self, g: FiniteGraph, x: int, origin: int = 0):
        n_bonds = g.n_bonds
        outer = 1 << n_bonds
        if outer * 2 * n_bonds > MAX_NESTED_TERMS >> 4:
            raise ValueError("outer enumeration too large for the nested budget")
        self.g = g
        self.x = x
        self.origin = origin
        tables = GraphTables(g)
        # term 1: <I[origin <=> x, G-free]> keyed (o, |C(origin)|)
        self.term1: dict[tuple[int, int], int] = {}
        # tau(origin, x) keyed the same way (for the left side)
        self.lhs: dict[tuple[int, int], int] = {}
        # outer E0'' structure: keys (o, |ctil|, inner_id, v0)
        self.outer: dict[tuple[int, int, int, int], int] = {}
        self.inner_keys: dict[tuple[int, int], int] = {}  # (ctil, v0) -> id
        self._inner_args: list[tuple[int, int]] = []
        directed = [(a, b) for a, b in g.bonds] + [(b, a) for a, b in g.bonds]
        bond_bit = {}
        for i, (a, b) in enumerate(g.bonds):
            bond_bit[(a, b)] = 1 << i
            bond_bit[(b, a)] = 1 << i
        for occ in range(outer):
            o = occ.bit_count()
            c0 = cluster_mask(g, occ, origin)
            if (c0 >> x) & 1:
                key = (o, c0.bit_count())
                self.lhs[key] = self.lhs.get(key, 0) + 1
            dcc_full = tables.dcc_mask(occ, origin)
            if (dcc_full >> x) & 1:
                key = (o, c0.bit_count())
                self.term1[key] = self.term1.get(key, 0) + 1
            for (u0, v0) in directed:
                occ_m = occ & ~bond_bit[(u0, v0)]
                dcc = tables.dcc_mask(occ_m, origin)
                if not (dcc >> u0) & 1:
                    continue
                ctil = tables.cluster(occ_m, origin)
                ik = self.inner_keys.get((ctil, v0))
                if ik is None:
                    ik = len(self._inner_args)
                    self.inner_keys[(ctil, v0)] = ik
                    self._inner_args.append((ctil, v0))
                okey = (o, ctil.bit_count(), ik, v0)
                self.outer[okey] = self.outer.get(okey, 0) + 1
        # build inner tables once; the memoized nested work is the real cost
        nested = len(self._inner_args) * outer
        if nested > MAX_NESTED_TERMS:
            raise ValueError(
                f"nested enumeration budget exceeded ({nested} > {MAX_NESTED_TERMS})"
            )
        self.inner_tau = [_InnerTauA(g, a, v, x) for a, v in self._inner_args]
        self.inner_f12 = [_InnerF1F2(g, a, v, x) for a, v in self._inner_args]
        self.term_count = outer * (1 + 2 * n_bonds) + nested

    def evaluate(self, p, z) -> dict:
        """Residuals of both identities at (p, z)."""
        g = self.g
        wb = _bond_weights(p, g.n_bonds)
        zp = _zpow(z, g.n_sites)
        exact = isinstance(p, Fraction) and isinstance(z, Fraction)

        def table_value(tab):
            acc = _Kahan(exact)
            for (o, c), n in tab.items():
                acc.add(n * wb[o] * zp[c])
            return acc.total

        tau_0x = table_value(self.lhs)
        term1 = table_value(self.term1)
        # per-site tau(v, x) for the convolution term
        spec = EnumerationSpec(g, p, z=z, green_mode="analytic")
        tau_vx = two_point_vector(spec, self.x)
        inner_tau_vals = []
        for t in self.inner_tau:
            wb_free = _bond_weights(p, t.n_free)
            inner_tau_vals.append(t.value(wb_free, zp))
        inner_f1_vals = [t.f1_value(wb, zp) for t in self.inner_f12]
        inner_f2_vals = [t.f2_value(wb, zp) for t in self.inner_f12]

        acc_expan0 = _Kahan(exact)
        acc_conv = _Kahan(exact)
        acc_f1 = _Kahan(exact)
        acc_f2 = _Kahan(exact)
        for (o, csize, ik, v0), n in self.outer.items():
            w = n * wb[o] * zp[csize]
            acc_expan0.add(w * inner_tau_vals[ik])
            acc_conv.add(w * tau_vx[v0])
            acc_f1.add(w * inner_f1_vals[ik])
            acc_f2.add(w * inner_f2_vals[ik])
        rhs_expan0 = term1 + p * acc_expan0.total
        rhs_taueq14 = term1 + p * (acc_conv.total - acc_f1.total + acc_f2.total)
        return {
            "tau": tau_0x,
            "expan0": rhs_expan0,
            "taueq14": rhs_taueq14,
            "residual_expan0": abs(tau_0x - rhs_expan0),
            "residual_taueq14": abs(tau_0x - rhs_taueq14),
        }


def verify_expansion_n0(spec: EnumerationSpec, x: int, origin: int = 0) -> dict:
    """Verify tau(0,x) against Eq. expan0 and the four-term identity at (p, h)."""
    tables = ExpansionTables(spec.graph, x, origin)
    out = tables.evaluate(spec.p, spec.z_value)
    residual = max(out["residual_expan0"], out["residual_taueq14"])
    return {
        "identity": "expan0+taueq14",
        "residual_or_slack": float(residual),
        "terms": tables.term_count,
        "pass": bool(residual <= 1e-12),
        "detail": {k: float(v) for k, v in out.items()},
    }


def verify_taf12(spec: EnumerationSpec, v: int, x: int, a_mask: int) -> dict:
    """Verify tau(v,x) - tau^A(v,x) = <F1> - <F2> for a deterministic set A."""
    g = spec.graph
    p, z = spec.p, spec.z_value
    wb = _bond_weights(p, g.n_bonds)
    zp = _zpow(z, g.n_sites)
    tau = two_point(spec, v, x).value
    t_taua = _InnerTauA(g, a_mask, v, x)
    taua = t_taua.value(_bond_weights(p, t_taua.n_free), zp)
    t = _InnerF1F2(g, a_mask, v, x)
    lhs = tau - taua
    rhs = t.f1_value(wb, zp) - t.f2_value(wb, zp)
    residual = abs(lhs - rhs)
    return {
        "identity": "taf12",
        "residual_or_slack": float(residual),
        "terms": (1 << g.n_bonds) * 2 + t_taua.inner_terms,
        "pass": bool(residual <= 1e-12),
    }


# ---------------------------------------------------------------------------
# Factorization lemma (conditioning on the restricted cluster)
# ---------------------------------------------------------------------------


def verify_factorization(
    spec: EnumerationSpec,
    bond: int,
    a_mask: int,
    event_e: Event,
    event_f: Event,
) -> dict:
    """Verify the factorization of < I[E on C~(A), F in comp, bond occupied] >.

    E is evaluated on the occurs-on restriction to C~(A) (bond excluded); F on
    the occurs-in restriction to the complement (bond excluded).  The inner
    expectation of the right side is a fresh enumeration memoized by the
    realized cluster.  Both the stated identity and its analogue without the
    occupancy factor are checked; explicit green enumeration throughout.
    """
    g = spec.graph
    p, z = spec.p, spec.z_value
    wb = _bond_weights(p, g.n_bonds)
    ws = _site_weights(z, g.n_sites)
    exact = spec.exact_pair()
    bond_bit = 1 << bond
    n = g.n_sites

    inner_cache: dict[int, object] = {}

    def inner_value(ctil: int):
        out = inner_cache.get(ctil)
        if out is None:
            comp = g.all_sites & ~ctil
            acc = _Kahan(exact)
            for occ2 in range(1 << g.n_bonds):
                w2 = wb[occ2.bit_count()]
                for green2 in range(1 << n):
                    cfg2 = occurs_in(g, BondSiteConfig(occ2, green2), comp, exclude=bond)
                    if event_f(g, cfg2):
                        acc.add(w2 * ws[green2.bit_count()])
            out = acc.total
            inner_cache[ctil] = out
        return out

    lhs_occ = _Kahan(exact)
    lhs_free = _Kahan(exact)
    rhs_free = _Kahan(exact)
    for occ in range(1 << g.n_bonds):
        wo = wb[occ.bit_count()]
        ctil = cluster_of_set(g, occ & ~bond_bit, a_mask)
        comp = g.all_sites & ~ctil
        occupied_bond = (occ >> bond) & 1
        for green in range(1 << n):
            w = wo * ws[green.bit_count()]
            cfg = BondSiteConfig(occ, green)
            if not event_e(g, occurs_on(g, cfg, ctil, exclude=bond)):
                continue
            if event_f(g, occurs_in(g, cfg, comp, exclude=bond)):
                lhs_free.add(w)
                if occupied_bond:
                    lhs_occ.add(w)
            rhs_free.add(w * inner_value(ctil))
    residual_occ = abs(lhs_occ.total - p * rhs_free.total)
    residual_free = abs(lhs_free.total - rhs_free.total)
    residual = max(residual_occ, residual_free)
    terms = (1 << g.n_bonds) * (1 << n)
    return {
        "identity": "cond0",
        "residual_or_slack": float(residual),
        "terms": terms * 2,
        "pass": bool(residual <= 1e-12),
        "detail": {
            "with_occupancy": float(residual_occ),
            "without_occupancy": float(residual_free),
        },
    }


# ---------------------------------------------------------------------------
# Pivotal-bond event equality (pointwise, bond variables only)
# ---------------------------------------------------------------------------


def verify_pivotal_equality(g: FiniteGraph, a_prime: int, a: int, a_mask: int, y: int) -> dict:
    """Pointwise equality of {(a', a) pivotal for y -> A} with its occurs-on /
    occurs-in factorized form, over every bond configuration."""
    if (a_mask >> y) & 1:
        raise ValueError("the lemma requires y outside A")
    bond = None
    for i, (s, t) in enumerate(g.bonds):
        if (s, t) in ((a_prime, a), (a, a_prime)):
            bond = i
            break
    if bond is None:
        raise ValueError(f"({a_prime},{a}) is not a bond of the graph")
    bit = 1 << bond
    mismatches = 0
    for occ in range(1 << g.n_bonds):
        occ_m = occ & ~bit
        ctil_aprime = cluster_mask(g, occ_m, a_prime)
        ctil_a = cluster_mask(g, occ_m, a)
        ctil_y = cluster_mask(g, occ_m, y)
        lhs = (
            (ctil_aprime >> y) & 1
            and ctil_a & a_mask != 0
            and ctil_y & a_mask == 0
        )
        ctil_A = cluster_of_set(g, occ_m, a_mask)
        comp = g.all_sites & ~ctil_A
        rhs = (ctil_A >> a) & 1 and connected_in(
            g, BondSiteConfig(occ & g.bonds_in(comp) & ~bit), y, a_prime, comp
        )
        if bool(lhs) != bool(rhs):
            mismatches += 1
    return {
        "identity": "pivotal",
        "residual_or_slack": float(mismatches),
        "terms": 1 << g.n_bonds,
        "pass": mismatches == 0,
    }


# ---------------------------------------------------------------------------
# F2 = (F3 u F4) \ F5 (pointwise over bond and green configurations)
# ---------------------------------------------------------------------------


class _F2345Structure:
    """Per-bond-configuration structure from which all four F events follow
    by pure green-mask arithmetic."""

    __slots__ = ("connected", "r", "rp", "conn_in", "thru_x", "sausage_sites", "right_ok", "v_in_a")

    def __init__(self, g: FiniteGraph, occ: int, v: int, x: int, a_mask: int):
        from .events import sausages

        comp = g.all_sites & ~a_mask
        self.v_in_a = (a_mask >> v) & 1 == 1
        self.r = cluster_mask(g, occ, v)
        self.connected = v == x or (self.r >> x) & 1 == 1
        self.rp = cluster_mask(g, occ & ~g.bonds_touching(a_mask), v)
        cfg = BondSiteConfig(occ)
        self.conn_in = connected_in(g, cfg, v, x, comp)
        self.thru_x = connected_through(g, cfg, v, x, a_mask)
        if self.connected:
            slist = sausages(g, cfg, v, x)
            self.sausage_sites = [s.sites for s in slist]
            self.right_ok = [connected_in(g, cfg, s.right, v, comp) for s in slist]
        else:
            self.sausage_sites = []
            self.right_ok = []

    def events(self, green: int, v: int) -> tuple[bool, bool, bool, bool]:
        through = ((green & self.r) != 0 and (green & self.rp) == 0) or (
            self.v_in_a and (green >> v) & 1 == 1
        )
        if not through or not self.connected:
            return False, False, False, False
        f2 = self.conn_in
        n_green = 0
        rights_ok = True
        for sites, ok in zip(self.sausage_sites, self.right_ok):
            if green & sites:
                n_green += 1
                if not ok:
                    rights_ok = False
        f3 = n_green == 1 and rights_ok
        f4 = n_green >= 2 and rights_ok
        f5 = self.thru_x and rights_ok
        return f2, f3, f4, f5


def verify_f2_decomposition(
    g: FiniteGraph,
    v: int,
    x: int,
    a_mask: int,
    sample: Optional[int] = None,
    seed: int = 0,
    cross_check: int = 200,
) -> dict:
    """Pointwise check of the disjoint decomposition of F2, including the
    disjointness claims.  Exhaustive when `sample` is None; otherwise checks
    `sample` uniformly chosen (bond, green) configurations.

    A structural fast path handles the green loop; it is cross-checked against
    the reference event implementations on `cross_check` seeded configurations.
    """
    n_bonds, n_sites = g.n_bonds, g.n_sites
    if sample is None and (1 << (n_bonds + n_sites)) > MAX_TERMS:
        raise ValueError("exhaustive check too large; pass a sample size")
    mismatches = 0
    checked = 0

    def consistent(f2, f3, f4, f5) -> bool:
        return (
            f2 == ((f3 or f4) and not f5)
            and not (f3 and f4)
            and not (f2 and f5)
            and (f2 or f5) == (f3 or f4)
        )

    if sample is None:
        for occ in range(1 << n_bonds):
            s = _F2345Structure(g, occ, v, x, a_mask)
            for green in range(1 << n_sites):
                if not consistent(*s.events(green, v)):
                    mismatches += 1
                checked += 1
    else:
        rng = random.Random(seed)
        for _ in range(sample):
            occ = rng.getrandbits(n_bonds)
            green = rng.getrandbits(n_sites)
            s = _F2345Structure(g, occ, v, x, a_mask)
            if not consistent(*s.events(green, v)):
                mismatches += 1
            checked += 1

    # dual-route spot check: structural path vs reference evaluators
    rng = random.Random(seed + 1)
    for _ in range(cross_check):
        occ = rng.getrandbits(n_bonds)
        green = rng.getrandbits(n_sites)
        cfg = BondSiteConfig(occ, green)
        ref = (
            event_F2(g, cfg, v, x, a_mask),
            event_F3(g, cfg, v, x, a_mask),
            event_F4(g, cfg, v, x, a_mask),
            event_F5(g, cfg, v, x, a_mask),
        )
        fast = _F2345Structure(g, occ, v, x, a_mask).events(green, v)
        if tuple(fast) != ref:
            mismatches += 1
        checked += 1
    return {
        "identity": "f2decomp",
        "residual_or_slack": float(mismatches),
        "terms": checked,
        "pass": mismatches == 0,
    }


# ---------------------------------------------------------------------------
# Cut-the-tail inequality
# ---------------------------------------------------------------------------


def check_increasing(g: FiniteGraph, event: Event, trials: int = 200, seed: int = 1) -> bool:
    """Spot-check monotonicity of a bond event on random ordered pairs."""
    rng = random.Random(seed)
    for _ in range(trials):
        occ = rng.getrandbits(g.n_bonds)
        sup = occ | rng.getrandbits(g.n_bonds)
        if event(g, BondSiteConfig(occ)) and not event(g, BondSiteConfig(sup)):
            return False
    return True


def verify_cut_the_tail(
    spec: EnumerationSpec, bond: int, a_mask: int, event_e: Event, x: int
) -> dict:
    """Check  <I[E on C~(A)] tau^{C~(A)}(v,x)>  <=  P(E) tau(v,x) / (1 - p M)
    for an increasing bond event E, where (u, v) is the given bond with u in A."""
    g = spec.graph
    u, v = g.bonds[bond]
    if not (a_mask >> u) & 1:
        if (a_mask >> v) & 1:
            u, v = v, u
        else:
            raise ValueError("cut-the-tail needs one bond endpoint inside A")
    if not check_increasing(g, event_e):
        raise ValueError("event E failed the monotonicity spot-check")
    p, z = spec.p, spec.z_value
    wb = _bond_weights(p, g.n_bonds)
    zp = _zpow(z, g.n_sites)
    exact = spec.exact_pair()
    bit = 1 << bond

    inner_cache: dict[int, object] = {}

    def tau_a(ctil):
        out = inner_cache.get(ctil)
        if out is None:
            t = _InnerTauA(g, ctil, v, x)
            out = t.value(_bond_weights(p, t.n_free), zp)
            inner_cache[ctil] = out
        return out

    lhs = _Kahan(exact)
    pe = _Kahan(exact)
    for occ in range(1 << g.n_bonds):
        w = wb[occ.bit_count()]
        if event_e(g, BondSiteConfig(occ)):
            pe.add(w)
        ctil = cluster_of_set(g, occ & ~bit, a_mask)
        if event_e(g, occurs_on(g, BondSiteConfig(occ), ctil, exclude=bond)):
            lhs.add(w * tau_a(ctil))
    # On a non-transitive finite graph the magnetization is site dependent;
    # the proof bounds a restricted connection-to-green probability, so the
    # site maximum is the honest constant.
    m_star = max(
        magnetization_susceptibility(spec, origin=w0)[0].value
        for w0 in range(g.n_sites)
    )
    tau = two_point(spec, v, x).value
    rhs = pe.total * tau / (1 - p * m_star)
    slack = rhs - lhs.total
    return {
        "identity": "cutthetail",
        "residual_or_slack": float(slack),
        "terms": (1 << g.n_bonds) * 2,
        "pass": bool(slack >= -1e-12),
        "detail": {"lhs": float(lhs.total), "rhs": float(rhs)},
    }


# ---------------------------------------------------------------------------
# G-free BK inequality
# ---------------------------------------------------------------------------


def connection_event_holds(g: FiniteGraph, occ: int, pairs) -> bool:
    for (a, b) in pairs:
        if a != b and not (cluster_mask(g, occ, a) >> b) & 1:
            return False
    return True


def disjoint_occurrence(g: FiniteGraph, occ: int, pairs1, pairs2) -> bool:
    """Exists a split of the occupied bonds supporting pairs1 and pairs2 on
    disjoint bond sets (exact, by submask enumeration)."""
    if not connection_event_holds(g, occ, pairs1) or not connection_event_holds(
        g, occ, pairs2
    ):
        return False
    for sub in _submask_configs(occ):
        if connection_event_holds(g, sub, pairs1) and connection_event_holds(
            g, occ & ~sub, pairs2
        ):
            return True
    return False


def gfree_mask(g: FiniteGraph, occ: int, pairs) -> int:
    mask = 0
    for (a, b) in pairs:
        mask |= cluster_mask(g, occ, a)
        mask |= cluster_mask(g, occ, b)
    return mask


def verify_gfree_bk(spec: EnumerationSpec, pairs1, pairs2) -> dict:
    """Check P((E1 o E2) occurs and is G-free) <= P(E1 occurs and is G-free) P(E2)
    for connection-specification events given as lists of site pairs."""
    g = spec.graph
    p, z = spec.p, spec.z_value
    wb = _bond_weights(p, g.n_bonds)
    zp = _zpow(z, g.n_sites)
    exact = spec.exact_pair()
    lhs = _Kahan(exact)
    rhs1 = _Kahan(exact)
    rhs2 = _Kahan(exact)
    both = list(pairs1) + list(pairs2)
    for occ in range(1 << g.n_bonds):
        w = wb[occ.bit_count()]
        if connection_event_holds(g, occ, pairs1):
            rhs1.add(w * zp[gfree_mask(g, occ, pairs1).bit_count()])
        if connection_event_holds(g, occ, pairs2):
            rhs2.add(w)
        if disjoint_occurrence(g, occ, pairs1, pairs2):
            lhs.add(w * zp[gfree_mask(g, occ, both).bit_count()])
    violation = lhs.total - rhs1.total * rhs2.total
    return {
        "identity": "gfreebk",
        "residual_or_slack": float(violation),
        "terms": (1 << g.n_bonds) * 3,
        "pass": bool(violation <= 1e-12),
        "detail": {"lhs": float(lhs.total), "rhs": float(rhs1.total * rhs2.total)},
    }
