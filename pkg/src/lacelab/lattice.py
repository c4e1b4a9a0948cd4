"""Bond-percolation lattice geometry.

Defines the two percolation models (nearest-neighbour and spread-out), their
step sets Omega, the structure function D^(k), and torus indexing shared by
the Monte Carlo and diagram modules.  Everything here is immutable after
construction and safe to share across workers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NEAREST_NEIGHBOUR = "nn"
SPREAD_OUT = "spread"

Offset = tuple[int, ...]
WaveVector = tuple[float, ...]


@dataclass(frozen=True)
class LatticeSpec:
    """A percolation model on a d-dimensional torus.

    Parameters
    ----------
    dimension : int
        Spatial dimension d >= 1.
    kind : str
        ``"nn"`` (steps of unit 1-norm) or ``"spread"`` (steps of sup-norm
        at most ``interaction_range``).
    torus_side : int
        Side length s of the periodic box; the simulation volume is s**d.
    interaction_range : int
        The range L of the spread-out model.  Ignored for ``"nn"``.
    """

    dimension: int
    kind: str = NEAREST_NEIGHBOUR
    torus_side: int = 4
    interaction_range: int = 1

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if self.kind not in (NEAREST_NEIGHBOUR, SPREAD_OUT):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.interaction_range < 1:
            raise ValueError("interaction range must be >= 1")
        if self.torus_side < 2:
            raise ValueError("torus side must be >= 2")
        if self.kind == SPREAD_OUT and self.torus_side < 2 * self.interaction_range + 1:
            raise ValueError(
                "spread-out model needs torus_side >= 2*range+1 "
                f"(got side {self.torus_side}, range {self.interaction_range})"
            )

    @property
    def volume(self) -> int:
        return self.torus_side**self.dimension

    @property
    def omega(self) -> int:
        """|Omega|: 2d for nearest-neighbour, (2L+1)^d - 1 for spread-out."""
        if self.kind == NEAREST_NEIGHBOUR:
            return 2 * self.dimension
        return (2 * self.interaction_range + 1) ** self.dimension - 1


def neighbourhood(spec: LatticeSpec) -> list[Offset]:
    """The step set Omega as a canonically sorted list of offset vectors.

    Nearest-neighbour: the 2d unit vectors.  Spread-out: all x with
    0 < ||x||_inf <= L.  Omega is symmetric under negation.
    """
    d = spec.dimension
    if spec.kind == NEAREST_NEIGHBOUR:
        offsets = []
        for axis in range(d):
            for sign in (-1, 1):
                v = [0] * d
                v[axis] = sign
                offsets.append(tuple(v))
    else:
        L = spec.interaction_range
        offsets = [
            v
            for v in itertools.product(range(-L, L + 1), repeat=d)
            if any(c != 0 for c in v)
        ]
    return sorted(offsets)


def half_neighbourhood(spec: LatticeSpec) -> list[Offset]:
    """One offset per +/- pair: the lexicographically smaller representative."""
    return [o for o in neighbourhood(spec) if o < tuple(-c for c in o)]


def sigma2(spec: LatticeSpec) -> float:
    """Second moment |Omega|^-1 sum_{x in Omega} |x|^2 of the uniform step.

    This is the Omega-dependent constant in 1 - D^(k) ~ sigma^2 k^2 / (2d).
    """
    omega = neighbourhood(spec)
    return sum(sum(c * c for c in o) for o in omega) / len(omega)


def validate_wavevector(spec: LatticeSpec, k: Sequence[float]) -> WaveVector:
    k = tuple(float(c) for c in k)
    if len(k) != spec.dimension:
        raise ValueError(f"wave vector has {len(k)} components, expected {spec.dimension}")
    if any(c < -math.pi - 1e-12 or c > math.pi + 1e-12 for c in k):
        raise ValueError(f"wave vector components must lie in [-pi, pi]: {k}")
    return k


def dhat(spec: LatticeSpec, k: Sequence[float], check_imag: bool = False) -> float:
    """Structure function D^(k) = |Omega|^-1 sum_{x in Omega} exp(i k.x).

    Real by the symmetry of Omega; for the nearest-neighbour model this is
    d^-1 sum_j cos k_j.
    """
    k = validate_wavevector(spec, k)
    if spec.kind == NEAREST_NEIGHBOUR:
        return sum(math.cos(c) for c in k) / spec.dimension
    omega = neighbourhood(spec)
    total = sum(math.cos(sum(c * x for c, x in zip(k, o))) for o in omega)
    if check_imag:
        imag = sum(math.sin(sum(c * x for c, x in zip(k, o))) for o in omega)
        assert abs(imag) < 1e-12 * max(1, len(omega)), imag
    return total / len(omega)


def dhat_grid(spec: LatticeSpec) -> np.ndarray:
    """D^ evaluated on the full torus momentum grid, shape (s,)*d.

    Built axis-by-axis so the memory cost is one full grid, not |Omega| grids.
    """
    d, s = spec.dimension, spec.torus_side
    axis_k = axis_momenta(spec)
    if spec.kind == NEAREST_NEIGHBOUR:
        out = np.zeros((s,) * d)
        for axis in range(d):
            shape = [1] * d
            shape[axis] = s
            out = out + np.cos(axis_k).reshape(shape)
        return out / d
    out = np.zeros((s,) * d)
    for o in neighbourhood(spec):
        phase = np.zeros((s,) * d)
        for axis, c in enumerate(o):
            if c:
                shape = [1] * d
                shape[axis] = s
                phase = phase + (c * axis_k).reshape(shape)
        out = out + np.cos(phase)
    return out / spec.omega


def axis_momenta(spec: LatticeSpec) -> np.ndarray:
    """Per-axis momenta 2*pi*m/s folded into (-pi, pi], in m order."""
    s = spec.torus_side
    k = 2.0 * np.pi * np.arange(s) / s
    k[k > np.pi + 1e-12] -= 2.0 * np.pi
    return k


def fourier_grid(spec: LatticeSpec) -> np.ndarray:
    """All s^d torus momenta as an (s^d, d) array, row-major in the site order."""
    d, s = spec.dimension, spec.torus_side
    axis_k = axis_momenta(spec)
    grids = np.meshgrid(*([axis_k] * d), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


@dataclass(frozen=True)
class TorusIndexer:
    """Flat site and bond indexing on the periodic box.

    Sites are indexed row-major over coordinates (axis 0 slowest).  A bond is
    (site, half-offset index): each unordered pair appears once because only
    the lexicographically smaller representative of each +/- offset pair is
    used.  Distinct unordered pairs require s >= 2*range+1; below that the
    torus identifies +o and -o steps, which this indexer refuses.
    """

    spec: LatticeSpec
    half_offsets: tuple[Offset, ...] = field(init=False)

    def __post_init__(self):
        reach = 1 if self.spec.kind == NEAREST_NEIGHBOUR else self.spec.interaction_range
        if self.spec.torus_side < 2 * reach + 1:
            raise ValueError(
                "torus_side must be >= 2*range+1 for unambiguous bonds "
                f"(got {self.spec.torus_side})"
            )
        object.__setattr__(self, "half_offsets", tuple(half_neighbourhood(self.spec)))

    @property
    def n_sites(self) -> int:
        return self.spec.volume

    @property
    def n_bonds(self) -> int:
        # s^d * |Omega| / 2
        return self.n_sites * len(self.half_offsets)

    def site_index(self, coords: Sequence[int]) -> int:
        s = self.spec.torus_side
        idx = 0
        for c in coords:
            idx = idx * s + (c % s)
        return idx

    def site_coords(self, index: int) -> Offset:
        s = self.spec.torus_side
        coords = []
        for _ in range(self.spec.dimension):
            coords.append(index % s)
            index //= s
        return tuple(reversed(coords))

    def bond_index(self, site: int, offset: Offset) -> int:
        pos = self.half_offsets.index(offset)
        return pos * self.n_sites + site

    def bond_decode(self, bond: int) -> tuple[int, Offset]:
        pos, site = divmod(bond, self.n_sites)
        return site, self.half_offsets[pos]

    def bond_sites(self, bond: int) -> tuple[int, int]:
        site, offset = self.bond_decode(bond)
        coords = self.site_coords(site)
        other = tuple(c + o for c, o in zip(coords, offset))
        return site, self.site_index(other)

    def coordinate_arrays(self) -> np.ndarray:
        """Site coordinates as an (n_sites, d) int array in flat-index order."""
        d, s = self.spec.dimension, self.spec.torus_side
        idx = np.arange(self.n_sites)
        coords = np.empty((self.n_sites, d), dtype=np.int64)
        for axis in range(d - 1, -1, -1):
            coords[:, axis] = idx % s
            idx //= s
        return coords

    def bond_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoint arrays (ends_a, ends_b) for all bonds, in bond-index order."""
        d, s = self.spec.dimension, self.spec.torus_side
        coords = self.coordinate_arrays()
        n = self.n_sites
        ends_a = np.empty(self.n_bonds, dtype=np.int64)
        ends_b = np.empty(self.n_bonds, dtype=np.int64)
        strides = np.array([s ** (d - 1 - axis) for axis in range(d)], dtype=np.int64)
        for pos, offset in enumerate(self.half_offsets):
            shifted = (coords + np.asarray(offset, dtype=np.int64)) % s
            ends_a[pos * n : (pos + 1) * n] = np.arange(n)
            ends_b[pos * n : (pos + 1) * n] = shifted @ strides
        return ends_a, ends_b


def spec_from_config(model: dict) -> LatticeSpec:
    """Build a LatticeSpec from the flat config keys of the [model] section."""
    kind = model.get("kind", NEAREST_NEIGHBOUR)
    return LatticeSpec(
        dimension=int(model["dimension"]),
        kind=kind,
        torus_side=int(model.get("torus_side", 4)),
        interaction_range=int(model.get("range", 1)),
    )
