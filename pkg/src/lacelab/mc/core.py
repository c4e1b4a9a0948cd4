"""Monte Carlo for bond percolation on tori with the green field integrated out.

The per-sample kernel (union-find cluster labelling plus per-cluster Fourier
accumulation) runs in the compiled extension when available and falls back to
numpy/scipy otherwise; set LACE_LAB_KERNEL=python or =cython to force one.
Every sample draws its bonds from a counter-based Philox stream keyed by
(seed, stream, sample index), so results are independent of worker count and
scheduling.  All h values are evaluated on the same bond samples.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from multiprocessing import get_context
from typing import Optional, Sequence

import numpy as np

from ..lattice import LatticeSpec, TorusIndexer, half_neighbourhood, validate_wavevector
from . import _fallback

try:  # compiled kernel, optional
    from . import _cluster_core
except ImportError:  # pragma: no cover - exercised when the ext is not built
    _cluster_core = None

_FORCED = os.environ.get("LACE_LAB_KERNEL", "").strip().lower()
if _FORCED == "python":
    _KERNEL = _fallback
elif _FORCED == "cython":
    if _cluster_core is None:
        raise ImportError("LACE_LAB_KERNEL=cython but the extension is not built")
    _KERNEL = _cluster_core
else:
    _KERNEL = _cluster_core if _cluster_core is not None else _fallback


def active_kernel() -> str:
    """Which cluster kernel is in use: "cython" or "python"."""
    return "cython" if _KERNEL is _cluster_core and _cluster_core is not None else "python"


def kernel_module(name: Optional[str] = None):
    if name in (None, ""):
        return _KERNEL
    if name == "python":
        return _fallback
    if name == "cython":
        if _cluster_core is None:
            raise ValueError("compiled kernel not available")
        return _cluster_core
    raise ValueError(f"unknown kernel {name!r}")


# RNG stream tags
_STREAM_MEASURE = 0
_STREAM_WRAP = 1


def sample_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Counter-based generator for one sample: Philox keyed by the triple."""
    key = np.random.SeedSequence((seed, stream, index)).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SimulationPlan:
    """Everything needed to reproduce one measurement run."""

    lattice: LatticeSpec
    p: float
    h_grid: tuple[float, ...]
    k_list: tuple[tuple[float, ...], ...] = ()
    samples: int = 1000
    seed: int = 0
    workers: int = 1
    batch_count: int = 32

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p out of range")
        if self.samples < 1:
            raise ValueError("need at least one sample")
        hs = tuple(float(h) for h in self.h_grid)
        if any(h < 0 for h in hs):
            raise ValueError("fields must be >= 0")
        if sorted(set(hs)) != list(hs):
            raise ValueError("h grid must be strictly increasing and distinct")
        object.__setattr__(self, "h_grid", hs)
        object.__setattr__(
            self, "k_list", tuple(validate_wavevector(self.lattice, k) for k in self.k_list)
        )
        if self.workers < 1 or self.batch_count < 1:
            raise ValueError("workers and batch_count must be >= 1")


@dataclass
class ClusterDecomposition:
    """Per-site labels plus per-cluster size and Fourier sums for one sample."""

    labels: np.ndarray  # (n_sites,) int32
    sizes: np.ndarray  # (n_clusters,) int64
    fourier: np.ndarray  # (n_clusters, n_k) complex128

    def __post_init__(self):
        assert self.sizes.sum() == len(self.labels)
        assert np.array_equal(np.bincount(self.labels), self.sizes)


@dataclass
class ObservableTable:
    """Estimates of M_h, chi_h and tau^_h(k) with batch-mean errors."""

    p: float
    h_grid: np.ndarray
    k_list: np.ndarray  # (n_k, d)
    n_samples: int
    n_sites: int
    m_mean: np.ndarray
    m_err: np.ndarray
    chi_mean: np.ndarray
    chi_err: np.ndarray
    tau_mean: np.ndarray  # (n_h, n_k)
    tau_err: np.ndarray
    m_batches: np.ndarray  # (n_batches, n_h)
    chi_batches: np.ndarray
    tau_batches: np.ndarray  # (n_batches, n_h, n_k)
    hist_sizes: np.ndarray  # cluster sizes with nonzero counts
    hist_counts: np.ndarray  # total cluster counts over all samples

    def validate(self):
        assert np.all((self.m_mean >= 0) & (self.m_mean <= 1))
        assert np.all(self.chi_mean >= 0)
        assert np.all(self.tau_mean >= -1e-15)

    def cluster_size_probability(self) -> tuple[np.ndarray, np.ndarray]:
        """P(|C(origin)| = n) estimates: (n values, probabilities)."""
        probs = self.hist_sizes * self.hist_counts / (self.n_sites * self.n_samples)
        return self.hist_sizes, probs


def _phase_tables(lattice: LatticeSpec, k_list) -> tuple[np.ndarray, np.ndarray]:
    ti = TorusIndexer(lattice)
    coords = ti.coordinate_arrays().astype(np.float64)
    n_k = len(k_list)
    if n_k == 0:
        z = np.zeros((lattice.volume, 0))
        return z, z.copy()
    angles = coords @ np.asarray(k_list, dtype=np.float64).T  # (V, n_k)
    return np.ascontiguousarray(np.cos(angles)), np.ascontiguousarray(np.sin(angles))


def sample_clusters(
    lattice: LatticeSpec,
    p: float,
    rng: np.random.Generator,
    k_list: Sequence[Sequence[float]] = (),
    kernel: Optional[str] = None,
) -> ClusterDecomposition:
    """One independent-bond sample decomposed into clusters."""
    ti = TorusIndexer(lattice)
    ends_a, ends_b = ti.bond_arrays()
    occupied = rng.random(ti.n_bonds) < p
    pre, pim = _phase_tables(lattice, tuple(k_list))
    mod = kernel_module(kernel)
    labels, sizes, fre, fim = mod.cluster_stats(
        ends_a, ends_b, occupied.view(np.uint8), ti.n_sites, pre, pim
    )
    return ClusterDecomposition(labels, sizes, fre + 1j * fim)


# -- measurement --------------------------------------------------------------

_WORKER: dict = {}


def _init_measure_worker(lattice, p, h_grid, k_list, seed, kernel_name):
    ti = TorusIndexer(lattice)
    ends_a, ends_b = ti.bond_arrays()
    pre, pim = _phase_tables(lattice, k_list)
    _WORKER.update(
        ends_a=ends_a,
        ends_b=ends_b,
        pre=pre,
        pim=pim,
        n_sites=ti.n_sites,
        p=p,
        h_grid=np.asarray(h_grid),
        seed=seed,
        kernel=kernel_module(kernel_name),
    )


def _measure_chunk(index_range):
    lo, hi = index_range
    w = _WORKER
    n_sites = w["n_sites"]
    h_grid = w["h_grid"]
    n_h = len(h_grid)
    n_k = w["pre"].shape[1]
    m_rows = np.empty((hi - lo, n_h))
    chi_rows = np.empty((hi - lo, n_h))
    tau_rows = np.empty((hi - lo, n_h, n_k))
    hist: dict[int, int] = {}
    for idx in range(lo, hi):
        rng = sample_rng(w["seed"], _STREAM_MEASURE, idx)
        occupied = rng.random(len(w["ends_a"])) < w["p"]
        _, sizes, fre, fim = w["kernel"].cluster_stats(
            w["ends_a"], w["ends_b"], occupied.view(np.uint8), n_sites, w["pre"], w["pim"]
        )
        f2 = fre * fre + fim * fim  # (nc, nk)
        counts = np.bincount(sizes)
        ns = np.nonzero(counts)[0]
        cn = counts[ns].astype(np.float64)
        nsf = ns.astype(np.float64)
        # one fused product so that chi and tau at k=0 share an accumulator
        cols = np.empty((len(ns), 2 + n_k))
        cols[:, 0] = cn * nsf
        cols[:, 1] = cn * nsf * nsf
        for k in range(n_k):
            cols[:, 2 + k] = np.bincount(sizes, weights=f2[:, k])[ns]
        weights = np.exp(-np.outer(h_grid, nsf))  # (nh, m)
        out = (weights @ cols) / n_sites
        m_rows[idx - lo] = 1.0 - out[:, 0]
        chi_rows[idx - lo] = out[:, 1]
        tau_rows[idx - lo] = out[:, 2:]
        for n, c in zip(ns.tolist(), counts[ns].tolist()):
            hist[n] = hist.get(n, 0) + c
    return lo, m_rows, chi_rows, tau_rows, hist


def _chunks(n: int, size: int):
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _run_chunks(fn, init, initargs, chunks, workers: int):
    if workers <= 1:
        init(*initargs)
        return [fn(c) for c in chunks]
    ctx = get_context("fork")
    with ctx.Pool(workers, initializer=init, initargs=initargs) as pool:
        return pool.map(fn, chunks)


def measure(plan: SimulationPlan, kernel: Optional[str] = None) -> ObservableTable:
    """Run the plan and return the observable table.

    Deterministic for fixed (plan, kernel): per-sample streams are keyed by
    sample index and the reduction is done in index order.
    """
    n = plan.samples
    chunk_size = max(64, math.ceil(n / (plan.workers * 8))) if plan.workers > 1 else n
    chunks = _chunks(n, chunk_size)
    initargs = (plan.lattice, plan.p, plan.h_grid, plan.k_list, plan.seed, kernel)
    results = _run_chunks(_measure_chunk, _init_measure_worker, initargs, chunks, plan.workers)

    n_h, n_k = len(plan.h_grid), len(plan.k_list)
    m = np.empty((n, n_h))
    chi = np.empty((n, n_h))
    tau = np.empty((n, n_h, n_k))
    hist: dict[int, int] = {}
    for lo, m_rows, chi_rows, tau_rows, h in sorted(results, key=lambda r: r[0]):
        m[lo : lo + len(m_rows)] = m_rows
        chi[lo : lo + len(chi_rows)] = chi_rows
        tau[lo : lo + len(tau_rows)] = tau_rows
        for size, c in sorted(h.items()):
            hist[size] = hist.get(size, 0) + c

    batches = min(plan.batch_count, n)
    edges = np.linspace(0, n, batches + 1).astype(int)
    m_b = np.stack([m[a:b].mean(axis=0) for a, b in zip(edges[:-1], edges[1:])])
    chi_b = np.stack([chi[a:b].mean(axis=0) for a, b in zip(edges[:-1], edges[1:])])
    tau_b = np.stack([tau[a:b].mean(axis=0) for a, b in zip(edges[:-1], edges[1:])])

    def err(batch_means):
        if batches < 2:
            return np.zeros(batch_means.shape[1:])
        return batch_means.std(axis=0, ddof=1) / math.sqrt(batches)

    sizes_sorted = np.array(sorted(hist), dtype=np.int64)
    counts_sorted = np.array([hist[s] for s in sizes_sorted], dtype=np.int64)
    table = ObservableTable(
        p=plan.p,
        h_grid=np.asarray(plan.h_grid),
        k_list=(np.asarray(plan.k_list, dtype=np.float64)
                if n_k else np.zeros((0, plan.lattice.dimension))),
        n_samples=n,
        n_sites=plan.lattice.volume,
        m_mean=m.mean(axis=0),
        m_err=err(m_b),
        chi_mean=chi.mean(axis=0),
        chi_err=err(chi_b),
        tau_mean=tau.mean(axis=0),
        tau_err=err(tau_b),
        m_batches=m_b,
        chi_batches=chi_b,
        tau_batches=tau_b,
        hist_sizes=sizes_sorted,
        hist_counts=counts_sorted,
    )
    table.validate()
    return table


# -- wrapping probability and the critical point -------------------------------


def _init_wrap_worker(lattice, seed, kernel_name):
    ti = TorusIndexer(lattice)
    ends_a, ends_b = ti.bond_arrays()
    steps = np.asarray(half_neighbourhood(lattice), dtype=np.int32)
    _WORKER.update(
        ends_a=ends_a,
        ends_b=ends_b,
        steps=steps,
        n_sites=ti.n_sites,
        seed=seed,
        kernel=kernel_module(kernel_name),
    )


def _wrap_chunk(args):
    lo, hi, p, stream = args
    w = _WORKER
    hits = 0
    for idx in range(lo, hi):
        rng = sample_rng(w["seed"], stream, idx)
        occupied = rng.random(len(w["ends_a"])) < p
        if w["kernel"].wrapping_axes(
            w["ends_a"], w["ends_b"], occupied.view(np.uint8), w["n_sites"], w["steps"]
        ):
            hits += 1
    return lo, hits


def wrapping_probability(
    lattice: LatticeSpec,
    p: float,
    samples: int,
    seed: int,
    workers: int = 1,
    stream: int = _STREAM_WRAP,
    kernel: Optional[str] = None,
) -> tuple[float, float]:
    """Probability that some cluster winds the torus, with binomial error."""
    chunk_size = max(32, math.ceil(samples / (workers * 4))) if workers > 1 else samples
    chunks = [(lo, hi, p, stream) for lo, hi in _chunks(samples, chunk_size)]
    results = _run_chunks(
        _wrap_chunk, _init_wrap_worker, (lattice, seed, kernel), chunks, workers
    )
    hits = sum(h for _, h in results)
    r = hits / samples
    return r, math.sqrt(max(r * (1 - r), 1.0 / samples) / samples)


def estimate_pc(
    lattice: LatticeSpec,
    tolerance: float = 1e-3,
    samples_per_iter: int = 384,
    seed: int = 0,
    workers: int = 1,
    second_side: Optional[int] = None,
    threshold: float = 0.5,
    kernel: Optional[str] = None,
) -> float:
    """Estimate p_c from torus wrapping.

    Bisection on p targets wrapping probability `threshold` at the full torus
    side, then the estimate is refined by locating the crossing of the
    wrapping curves at two sides (the crossing point is asymptotically
    size independent).  For d >= 7 the known envelope 1 <= p_c |Omega| is
    checked and violations are warned about, not raised.
    """
    d = lattice.dimension
    if d < 2:
        raise ValueError("no percolation transition below two dimensions")
    reach = 1 if lattice.kind == "nn" else lattice.interaction_range
    if second_side is None:
        second_side = max(2 * reach + 1, lattice.torus_side // 2)
    small = LatticeSpec(d, lattice.kind, second_side, lattice.interaction_range)

    stream = _STREAM_WRAP
    eval_count = 0

    def rate(spec, p):
        nonlocal eval_count
        eval_count += 1
        return wrapping_probability(
            spec, p, samples_per_iter, seed, workers, stream=stream + eval_count, kernel=kernel
        )[0]

    # bracket
    lo, r_lo = 0.0, 0.0
    hi = min(1.0, 2.2 / lattice.omega)
    max_expand = 40
    while rate(lattice, hi) < threshold:
        lo = hi
        hi = min(1.0, hi * 1.5)
        max_expand -= 1
        if hi >= 1.0 or max_expand == 0:
            break
    # bisection
    for _ in range(60):
        if hi - lo <= 2 * tolerance:
            break
        mid = 0.5 * (lo + hi)
        if rate(lattice, mid) < threshold:
            lo = mid
        else:
            hi = mid
    else:
        raise RuntimeError("p_c bisection did not converge")
    p_hat = 0.5 * (lo + hi)

    # two-size crossing refinement with simple linear fits
    delta = max(4 * tolerance, 0.02 * p_hat)
    ps = (p_hat - delta, p_hat + delta)
    r_big = [rate(lattice, p) for p in ps]
    r_small = [rate(small, p) for p in ps]
    slope_big = (r_big[1] - r_big[0]) / (2 * delta)
    slope_small = (r_small[1] - r_small[0]) / (2 * delta)
    if abs(slope_big - slope_small) > 1e-9:
        mid_big = 0.5 * (r_big[0] + r_big[1])
        mid_small = 0.5 * (r_small[0] + r_small[1])
        crossing = p_hat + (mid_small - mid_big) / (slope_big - slope_small)
        if abs(crossing - p_hat) <= 3 * delta:
            p_hat = crossing

    if d >= 7:
        omega = lattice.omega
        if not (1.0 - 0.05 <= p_hat * omega <= 1.3):
            warnings.warn(
                f"estimated p_c*Omega = {p_hat * omega:.3f} outside the "
                "high-dimensional envelope [1, 1.3]",
                stacklevel=2,
            )
    return float(p_hat)
