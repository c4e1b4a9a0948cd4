"""Pure numpy/scipy implementations of the cluster kernels.

Used when the compiled extension is unavailable (or forced via
LACE_LAB_KERNEL=python).  Same contracts as _cluster_core; clusters are
labelled by scipy's connected_components and the winding check walks a
multi-source BFS forest shell by shell.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra


def _adjacency(ends_a, ends_b, occupied, n_sites):
    a = ends_a[occupied]
    b = ends_b[occupied]
    data = np.ones(len(a), dtype=np.int8)
    return coo_matrix((data, (a, b)), shape=(n_sites, n_sites)).tocsr()


def cluster_stats(ends_a, ends_b, occupied, n_sites, phases_re, phases_im):
    occupied = occupied.astype(bool)
    adj = _adjacency(ends_a, ends_b, occupied, n_sites)
    n_clusters, labels = connected_components(adj, directed=False)
    labels = labels.astype(np.int32)
    sizes = np.bincount(labels, minlength=n_clusters).astype(np.int64)
    n_k = phases_re.shape[1] if phases_re.ndim == 2 else 0
    fre = np.empty((n_clusters, n_k))
    fim = np.empty((n_clusters, n_k))
    for k in range(n_k):
        fre[:, k] = np.bincount(labels, weights=phases_re[:, k], minlength=n_clusters)
        fim[:, k] = np.bincount(labels, weights=phases_im[:, k], minlength=n_clusters)
    return labels, sizes, fre, fim


def wrapping_axes(ends_a, ends_b, occupied, n_sites, steps_by_pos):
    """Axis mask of torus windings; see the compiled kernel for the contract.

    Builds a multi-source shortest-path forest, resolves each site's
    displacement in the universal cover shell by shell, then checks every
    occupied bond for a displacement mismatch.
    """
    occupied = occupied.astype(bool)
    if not occupied.any():
        return 0
    adj = _adjacency(ends_a, ends_b, occupied, n_sites)
    _, labels = connected_components(adj, directed=False)
    _, roots = np.unique(labels, return_index=True)
    dist, pred = dijkstra(
        adj, directed=False, indices=roots, min_only=True, return_predecessors=True
    )[:2]

    steps = np.asarray(steps_by_pos, dtype=np.int64)
    d = steps.shape[1]
    bond_pos = np.arange(len(ends_a)) // n_sites

    # directed (src, dst) -> geometric step lookup over occupied bonds
    a = ends_a[occupied]
    b = ends_b[occupied]
    st = steps[bond_pos[occupied]]
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    est = np.concatenate([st, -st])
    key = src * n_sites + dst
    order = np.argsort(key, kind="stable")
    key_sorted = key[order]
    est_sorted = est[order]

    def edge_steps(s_from, s_to):
        q = s_from * n_sites + s_to
        pos = np.searchsorted(key_sorted, q)
        assert np.all(key_sorted[pos] == q), "tree edge is not an occupied bond"
        return est_sorted[pos]

    disp = np.zeros((n_sites, d), dtype=np.int64)
    site_order = np.argsort(dist, kind="stable")
    site_order = site_order[np.isfinite(dist[site_order])]
    shells = dist[site_order]
    start, n = 0, len(site_order)
    while start < n:
        stop = start
        d0 = shells[start]
        while stop < n and shells[stop] == d0:
            stop += 1
        sites = site_order[start:stop]
        sites = sites[pred[sites] >= 0]
        if len(sites):
            disp[sites] = disp[pred[sites]] + edge_steps(pred[sites], sites)
        start = stop

    mismatch = disp[b] - disp[a] - st
    wrapped = 0
    for axis in range(d):
        if (mismatch[:, axis] != 0).any():
            wrapped |= 1 << axis
    return wrapped
