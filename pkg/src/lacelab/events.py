"""Connectivity events on finite bond/site configurations.

Implements clusters, double connections, through-a-set connections, pivotal
bonds with their natural ordering, sausage decompositions, backbones, the
occurs-on / occurs-in restriction operators, and the F-family of expansion
events.  Site sets are plain int bitmasks; bond configurations are int
bitmasks over the graph's bond list.  All functions are pure.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional


@dataclass(frozen=True)
class FiniteGraph:
    """A simple finite graph: dense site indices, unordered distinct bonds."""

    n_sites: int
    bonds: tuple[tuple[int, int], ...]
    # adjacency[x] = ((bond_index, neighbour), ...)
    adjacency: tuple[tuple[tuple[int, int], ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        seen = set()
        for a, b in self.bonds:
            if a == b:
                raise ValueError(f"self-pair bond ({a},{b}) not allowed")
            if not (0 <= a < self.n_sites and 0 <= b < self.n_sites):
                raise ValueError(f"bond ({a},{b}) out of range")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate bond {key}")
            seen.add(key)
        adj = [[] for _ in range(self.n_sites)]
        for i, (a, b) in enumerate(self.bonds):
            adj[a].append((i, b))
            adj[b].append((i, a))
        object.__setattr__(self, "adjacency", tuple(tuple(x) for x in adj))

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @property
    def all_sites(self) -> int:
        return (1 << self.n_sites) - 1

    def bonds_touching(self, sites: int) -> int:
        """Bond mask of bonds with at least one endpoint in `sites`."""
        mask = 0
        for i, (a, b) in enumerate(self.bonds):
            if (sites >> a | sites >> b) & 1:
                mask |= 1 << i
        return mask

    def bonds_in(self, sites: int) -> int:
        """Bond mask of bonds with both endpoints in `sites`."""
        mask = 0
        for i, (a, b) in enumerate(self.bonds):
            if (sites >> a) & (sites >> b) & 1:
                mask |= 1 << i
        return mask

    def to_json(self) -> str:
        return json.dumps({"sites": self.n_sites, "bonds": [list(b) for b in self.bonds]})

    @staticmethod
    def from_json(text: str) -> "FiniteGraph":
        data = json.loads(text)
        return FiniteGraph(int(data["sites"]), tuple((int(a), int(b)) for a, b in data["bonds"]))


@dataclass(frozen=True)
class BondSiteConfig:
    """Occupancy bitmask over bonds plus an optional green bitmask over sites."""

    occupied: int
    green: Optional[int] = None

    def require_green(self) -> int:
        if self.green is None:
            raise ValueError("this event needs a green-site configuration")
        return self.green

    def to_hex(self) -> str:
        g = "-" if self.green is None else format(self.green, "x")
        return f"{self.occupied:x}/{g}"

    @staticmethod
    def from_hex(text: str) -> "BondSiteConfig":
        occ, _, green = text.partition("/")
        return BondSiteConfig(int(occ, 16), None if green in ("", "-") else int(green, 16))


def site_set(sites: Iterable[int]) -> int:
    mask = 0
    for x in sites:
        mask |= 1 << x
    return mask


def sites_of(mask: int) -> list[int]:
    out = []
    x = 0
    while mask:
        if mask & 1:
            out.append(x)
        mask >>= 1
        x += 1
    return out


# ---------------------------------------------------------------------------
# Clusters and plain connectivity
# ---------------------------------------------------------------------------


def cluster_mask(g: FiniteGraph, occupied: int, x: int) -> int:
    """Sites reachable from x through occupied bonds (always contains x)."""
    seen = 1 << x
    stack = [x]
    adj = g.adjacency
    while stack:
        u = stack.pop()
        for bond, v in adj[u]:
            if (occupied >> bond) & 1 and not (seen >> v) & 1:
                seen |= 1 << v
                stack.append(v)
    return seen


def cluster(g: FiniteGraph, cfg: BondSiteConfig, x: int) -> int:
    return cluster_mask(g, cfg.occupied, x)


def cluster_of_set(g: FiniteGraph, occupied: int, sites: int) -> int:
    """Union of clusters of all sites in the mask `sites`."""
    out = 0
    for x in sites_of(sites):
        if not (out >> x) & 1:
            out |= cluster_mask(g, occupied, x)
    return out


def components(g: FiniteGraph, occupied: int) -> list[int]:
    """All connected components (isolated sites are singleton components)."""
    seen = 0
    comps = []
    for x in range(g.n_sites):
        if not (seen >> x) & 1:
            c = cluster_mask(g, occupied, x)
            comps.append(c)
            seen |= c
    return comps


def connected(g: FiniteGraph, cfg: BondSiteConfig, x: int, y: int) -> bool:
    if x == y:
        return True
    return (cluster_mask(g, cfg.occupied, x) >> y) & 1 == 1


def restricted_cluster(g: FiniteGraph, cfg: BondSiteConfig, bond: int, sites: int) -> int:
    """Cluster of the site set with the given bond forced vacant (C-tilde)."""
    return cluster_of_set(g, cfg.occupied & ~(1 << bond), sites)


# ---------------------------------------------------------------------------
# Double connections (bond-disjoint paths)
# ---------------------------------------------------------------------------


def bridges(g: FiniteGraph, occupied: int) -> int:
    """Bond mask of bridges of the occupied subgraph (iterative Tarjan)."""
    n = g.n_sites
    disc = [-1] * n
    low = [0] * n
    out = 0
    timer = 0
    adj = g.adjacency
    for root in range(n):
        if disc[root] != -1:
            continue
        stack = [(root, -1, iter(adj[root]))]
        disc[root] = low[root] = timer
        timer += 1
        while stack:
            u, pbond, it = stack[-1]
            advanced = False
            for bond, v in it:
                if not (occupied >> bond) & 1 or bond == pbond:
                    continue
                if disc[v] == -1:
                    disc[v] = low[v] = timer
                    timer += 1
                    stack.append((v, bond, iter(adj[v])))
                    advanced = True
                    break
                low[u] = min(low[u], disc[v])
            if not advanced:
                stack.pop()
                if stack:
                    p = stack[-1][0]
                    low[p] = min(low[p], low[u])
                    if low[u] > disc[p]:
                        out |= 1 << pbond
        # fallthrough: next root
    return out


def doubly_connected(g: FiniteGraph, cfg: BondSiteConfig, x: int, y: int) -> bool:
    """Two bond-disjoint occupied paths between x and y, or x == y.

    Decided by 2-edge-connectivity of the occupied subgraph: x <=> y iff they
    lie in the same component and no bridge separates them, i.e. they share a
    2-edge-connected component.
    """
    if x == y:
        return True
    occ = cfg.occupied
    cx = cluster_mask(g, occ, x)
    if not (cx >> y) & 1:
        return False
    rest = occ & ~bridges(g, occ)
    return (cluster_mask(g, rest, x) >> y) & 1 == 1


# ---------------------------------------------------------------------------
# Connections in / through a site set
# ---------------------------------------------------------------------------


def connected_in(g: FiniteGraph, cfg: BondSiteConfig, x: int, y: int, sites: int) -> bool:
    """Occupied path from x to y with every site of the path in `sites`."""
    if x == y:
        return (sites >> x) & 1 == 1
    if not ((sites >> x) & 1 and (sites >> y) & 1):
        return False
    inside = cfg.occupied & g.bonds_in(sites)
    return (cluster_mask(g, inside, x) >> y) & 1 == 1


def connected_through(g: FiniteGraph, cfg: BondSiteConfig, x: int, y: int, sites: int) -> bool:
    """x and y connected such that every occupied x-y path has a bond with an
    endpoint in `sites`; or x == y in `sites`."""
    if x == y:
        return (sites >> x) & 1 == 1
    occ = cfg.occupied
    if not (cluster_mask(g, occ, x) >> y) & 1:
        return False
    avoiding = occ & ~g.bonds_touching(sites)
    return not (cluster_mask(g, avoiding, x) >> y) & 1


def connected_to_green(g: FiniteGraph, cfg: BondSiteConfig, x: int) -> bool:
    """x is connected to a green site (x itself green counts)."""
    green = cfg.require_green()
    return cluster_mask(g, cfg.occupied, x) & green != 0


def through_to_green(g: FiniteGraph, cfg: BondSiteConfig, v: int, sites: int) -> bool:
    """Every occupied path from v to a green site passes `sites`, or v green in `sites`.

    Requires v to be connected to a green site at all; the degenerate clause
    is v itself green and in `sites`.
    """
    green = cfg.require_green()
    if (green >> v) & 1 and (sites >> v) & 1:
        return True
    occ = cfg.occupied
    if not cluster_mask(g, occ, v) & green:
        return False
    avoiding = occ & ~g.bonds_touching(sites)
    return cluster_mask(g, avoiding, v) & green == 0


# ---------------------------------------------------------------------------
# Pivotal bonds, sausages, backbone
# ---------------------------------------------------------------------------


class PivotalResult(NamedTuple):
    connected: bool
    bonds: list[tuple[int, int]]  # directed (u, v) pairs, in natural order


def pivotal_bonds(g: FiniteGraph, cfg: BondSiteConfig, x: int, targets: int) -> PivotalResult:
    """Occupied pivotal bonds for the connection x -> targets, directed and
    ordered from x outward (the first has its tail doubly connected to x)."""
    occ = cfg.occupied
    cx = cluster_mask(g, occ, x)
    if cx & targets == 0:
        return PivotalResult(False, [])
    pivots = []
    for i, (a, b) in enumerate(g.bonds):
        bit = 1 << i
        if not occ & bit:
            continue
        if not ((cx >> a) & 1 and (cx >> b) & 1):
            continue
        if cluster_mask(g, occ & ~bit, x) & targets == 0:
            pivots.append(i)
    if not pivots:
        return PivotalResult(True, [])
    stripped = occ
    for i in pivots:
        stripped &= ~(1 << i)
    ordered = []
    remaining = set(pivots)
    current = cluster_mask(g, stripped, x)
    while remaining:
        step = None
        for i in remaining:
            a, b = g.bonds[i]
            ina, inb = (current >> a) & 1, (current >> b) & 1
            if ina != inb:
                assert step is None, "pivotal order must be unambiguous"
                step = (i, (a, b) if ina else (b, a))
        assert step is not None, "pivotal chain broke"
        i, (u, v) = step
        ordered.append((u, v))
        remaining.remove(i)
        current = cluster_mask(g, stripped, v)
    return PivotalResult(True, ordered)


class Sausage(NamedTuple):
    sites: int
    left: int
    right: int


def sausages(g: FiniteGraph, cfg: BondSiteConfig, x: int, y: int) -> list[Sausage]:
    """The string of sausages of the connection x -> y.

    Components of C(x) after removing the occupied pivotal bonds for x -> y,
    ordered along the pivotal chain; the j-th sausage is doubly connected
    between its left endpoint v_{j-1} and right endpoint u_j.
    """
    if not connected(g, cfg, x, y):
        raise ValueError(f"sites {x} and {y} are not connected")
    res = pivotal_bonds(g, cfg, x, 1 << y)
    stripped = cfg.occupied
    for u, v in res.bonds:
        # recover the bond index from the endpoint pair
        for i, (a, b) in enumerate(g.bonds):
            if (a, b) in ((u, v), (v, u)):
                stripped &= ~(1 << i)
                break
    lefts = [x] + [v for _, v in res.bonds]
    rights = [u for u, _ in res.bonds] + [y]
    return [
        Sausage(cluster_mask(g, stripped, left), left, right)
        for left, right in zip(lefts, rights)
    ]


def _max_flow_two(g: FiniteGraph, occupied: int, source: int, sink_arcs: list[int]) -> int:
    """Max flow (capped at 2) from source to a virtual sink fed by unit arcs
    from the listed sites, over occupied bonds with unit capacity per direction."""
    # residual capacities: bond arcs keyed by (bond, dir), sink arcs by site pos
    cap = {}
    for i, (a, b) in enumerate(g.bonds):
        if (occupied >> i) & 1:
            cap[(a, b)] = 1
            cap[(b, a)] = 1
    sink = g.n_sites
    adj = {}
    for (u, v) in cap:
        adj.setdefault(u, []).append(v)
    for s in sink_arcs:
        cap[(s, sink)] = cap.get((s, sink), 0) + 1
        adj.setdefault(s, []).append(sink)
    flow = 0
    while flow < 2:
        prev = {source: None}
        q = deque([source])
        while q and sink not in prev:
            u = q.popleft()
            for v in adj.get(u, ()):
                if v not in prev and cap.get((u, v), 0) > 0:
                    prev[v] = u
                    q.append(v)
        if sink not in prev:
            break
        v = sink
        while prev[v] is not None:
            u = prev[v]
            cap[(u, v)] -= 1
            cap[(v, u)] = cap.get((v, u), 0) + 1
            adj.setdefault(v, []).append(u)
            v = u
        flow += 1
    return flow


def backbone(g: FiniteGraph, cfg: BondSiteConfig, x: int, y: int) -> int:
    """Sites with bond-disjoint occupied connections to both x and y.

    The connections between x and y with dangling ends removed; empty when
    x and y are not connected.
    """
    occ = cfg.occupied
    cx = cluster_mask(g, occ, x)
    if not (cx >> y) & 1:
        return 0
    out = 0
    for u in sites_of(cx):
        if _max_flow_two(g, occ, u, [x, y]) >= 2:
            out |= 1 << u
    return out


# ---------------------------------------------------------------------------
# occurs-on / occurs-in restriction operators
# ---------------------------------------------------------------------------


def occurs_on(
    g: FiniteGraph, cfg: BondSiteConfig, sites: int, exclude: Optional[int] = None
) -> BondSiteConfig:
    """Restriction to bonds/sites touching `sites`; everything else vacant and
    non-green.  `exclude` forces one bond vacant (the C-tilde convention)."""
    occ = cfg.occupied & g.bonds_touching(sites)
    if exclude is not None:
        occ &= ~(1 << exclude)
    green = None if cfg.green is None else cfg.green & sites
    return BondSiteConfig(occ, green)


def occurs_in(
    g: FiniteGraph, cfg: BondSiteConfig, sites: int, exclude: Optional[int] = None
) -> BondSiteConfig:
    """As occurs_on but keeping only bonds with both endpoints in `sites`."""
    occ = cfg.occupied & g.bonds_in(sites)
    if exclude is not None:
        occ &= ~(1 << exclude)
    green = None if cfg.green is None else cfg.green & sites
    return BondSiteConfig(occ, green)


# ---------------------------------------------------------------------------
# Expansion events F1..F5
# ---------------------------------------------------------------------------


def event_F1(g: FiniteGraph, cfg: BondSiteConfig, v: int, x: int, sites: int) -> bool:
    """v connected to x through the set, and v not connected to green."""
    cfg.require_green()
    return connected_through(g, cfg, v, x, sites) and not connected_to_green(g, cfg, v)


def event_F2(g: FiniteGraph, cfg: BondSiteConfig, v: int, x: int, sites: int) -> bool:
    """v connected to x inside the complement, and v connected to green through the set."""
    cfg.require_green()
    comp = g.all_sites & ~sites
    return connected_in(g, cfg, v, x, comp) and through_to_green(g, cfg, v, sites)


def _green_sausage_data(
    g: FiniteGraph, cfg: BondSiteConfig, v: int, x: int, sites: int
) -> tuple[int, bool]:
    """(number of sausages meeting green, all their right endpoints reach v in
    the complement of `sites`)."""
    green = cfg.require_green()
    comp = g.all_sites & ~sites
    n_green = 0
    all_right_ok = True
    for s in sausages(g, cfg, v, x):
        if s.sites & green:
            n_green += 1
            if not connected_in(g, cfg, s.right, v, comp):
                all_right_ok = False
    return n_green, all_right_ok


def event_F3(g: FiniteGraph, cfg: BondSiteConfig, v: int, x: int, sites: int) -> bool:
    """Exactly one sausage of v -> x meets green, that sausage's right endpoint
    reaches v in the complement, and v is connected to green through the set."""
    if not connected(g, cfg, v, x):
        return False
    if not through_to_green(g, cfg, v, sites):
        return False
    n_green, right_ok = _green_sausage_data(g, cfg, v, x, sites)
    return n_green == 1 and right_ok


def event_F4(g: FiniteGraph, cfg: BondSiteConfig, v: int, x: int, sites: int) -> bool:
    """Two or more sausages meet green and all their right endpoints reach v
    in the complement; v connected to green through the set."""
    if not connected(g, cfg, v, x):
        return False
    if not through_to_green(g, cfg, v, sites):
        return False
    n_green, right_ok = _green_sausage_data(g, cfg, v, x, sites)
    return n_green >= 2 and right_ok


def event_F5(g: FiniteGraph, cfg: BondSiteConfig, v: int, x: int, sites: int) -> bool:
    """v connected to x through the set, v connected to green through the set,
    and the right endpoints of all green sausages reach v in the complement."""
    if not connected_through(g, cfg, v, x, sites):
        return False
    if not through_to_green(g, cfg, v, sites):
        return False
    _, right_ok = _green_sausage_data(g, cfg, v, x, sites)
    return right_ok


# ---------------------------------------------------------------------------
# Graph constructors
# ---------------------------------------------------------------------------


def path_graph(n: int) -> FiniteGraph:
    return FiniteGraph(n, tuple((i, i + 1) for i in range(n - 1)))


def cycle_graph(n: int) -> FiniteGraph:
    return FiniteGraph(n, tuple((i, (i + 1) % n) for i in range(n)))


def complete_graph_minus_edge(n: int) -> FiniteGraph:
    bonds = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return FiniteGraph(n, tuple(bonds[:-1]))


def torus_graph(dimension: int, side: int) -> FiniteGraph:
    """Nearest-neighbour torus as a simple graph.

    For side < 3 the +e and -e steps reach the same neighbour; duplicate
    unordered pairs are collapsed (so the 2x2 torus is a 4-cycle).
    """
    n = side**dimension

    def coords(i):
        out = []
        for _ in range(dimension):
            out.append(i % side)
            i //= side
        return tuple(reversed(out))

    def index(c):
        i = 0
        for v in c:
            i = i * side + (v % side)
        return i

    bonds = set()
    for i in range(n):
        c = coords(i)
        for axis in range(dimension):
            shifted = list(c)
            shifted[axis] += 1
            j = index(tuple(shifted))
            if i != j:
                bonds.add((min(i, j), max(i, j)))
    return FiniteGraph(n, tuple(sorted(bonds)))


BUNDLED_GRAPHS = {
    "path3": lambda: path_graph(3),
    "path4": lambda: path_graph(4),
    "path5": lambda: path_graph(5),
    "cycle4": lambda: cycle_graph(4),
    "torus_2x2": lambda: torus_graph(2, 2),
    "torus_3x3": lambda: torus_graph(2, 3),
    "torus_2x2x2": lambda: torus_graph(3, 2),
    "k4_minus": lambda: complete_graph_minus_edge(4),
}


def bundled_graph(name: str) -> FiniteGraph:
    try:
        return BUNDLED_GRAPHS[name]()
    except KeyError:
        raise ValueError(f"unknown bundled graph {name!r}; choices: {sorted(BUNDLED_GRAPHS)}")
