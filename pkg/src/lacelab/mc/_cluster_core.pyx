# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled union-find kernels for bond-percolation cluster sampling.

Two entry points: `cluster_stats` labels the clusters of an occupancy vector
and accumulates per-cluster sizes and Fourier sums; `wrapping_axes` runs a
displacement-carrying union-find and reports torus winding.  Both are
deterministic functions of their inputs.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int32_t i32
ctypedef cnp.int64_t i64
ctypedef cnp.uint8_t u8
ctypedef cnp.float64_t f64


cdef inline i32 _find(i32* parent, i32 x) noexcept nogil:
    cdef i32 root = x
    cdef i32 nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def cluster_stats(i64[::1] ends_a, i64[::1] ends_b, u8[::1] occupied,
                  Py_ssize_t n_sites, f64[:, ::1] phases_re, f64[:, ::1] phases_im):
    """Label clusters and accumulate per-cluster observables.

    phases_re/phases_im have shape (n_sites, n_k) (n_k may be 0).  Returns
    (labels int32[n_sites], sizes int64[n_clusters],
     fourier_re float64[n_clusters, n_k], fourier_im float64[n_clusters, n_k]).
    """
    cdef Py_ssize_t n_bonds = ends_a.shape[0]
    cdef Py_ssize_t n_k = phases_re.shape[1]
    if phases_re.shape[0] != n_sites and n_k > 0:
        raise ValueError("phase table must have one row per site")

    parent_arr = np.arange(n_sites, dtype=np.int32)
    size_arr = np.ones(n_sites, dtype=np.int32)
    cdef i32[::1] parent = parent_arr
    cdef i32[::1] sz = size_arr
    cdef i32* par = &parent[0]
    cdef Py_ssize_t i
    cdef i32 ra, rb

    with nogil:
        for i in range(n_bonds):
            if occupied[i]:
                ra = _find(par, <i32> ends_a[i])
                rb = _find(par, <i32> ends_b[i])
                if ra != rb:
                    if sz[ra] < sz[rb]:
                        ra, rb = rb, ra
                    par[rb] = ra
                    sz[ra] += sz[rb]

    labels_arr = np.empty(n_sites, dtype=np.int32)
    cdef i32[::1] labels = labels_arr
    root_id_arr = np.full(n_sites, -1, dtype=np.int32)
    cdef i32[::1] root_id = root_id_arr
    cdef i32 nc = 0
    cdef i32 r
    with nogil:
        for i in range(n_sites):
            r = _find(par, <i32> i)
            if root_id[r] < 0:
                root_id[r] = nc
                nc += 1
            labels[i] = root_id[r]

    sizes_arr = np.zeros(nc, dtype=np.int64)
    re_arr = np.zeros((nc, n_k), dtype=np.float64)
    im_arr = np.zeros((nc, n_k), dtype=np.float64)
    cdef i64[::1] sizes = sizes_arr
    cdef f64[:, ::1] fre = re_arr
    cdef f64[:, ::1] fim = im_arr
    cdef Py_ssize_t k
    cdef i32 lab
    with nogil:
        for i in range(n_sites):
            lab = labels[i]
            sizes[lab] += 1
            for k in range(n_k):
                fre[lab, k] += phases_re[i, k]
                fim[lab, k] += phases_im[i, k]
    return labels_arr, sizes_arr, re_arr, im_arr


def wrapping_axes(i64[::1] ends_a, i64[::1] ends_b, u8[::1] occupied,
                  Py_ssize_t n_sites, i32[:, ::1] steps_by_pos):
    """Axis mask of torus windings in the occupied bond configuration.

    Bond i joins ends_a[i] -> ends_b[i] with geometric step
    steps_by_pos[i // n_sites]; a cycle whose steps do not cancel wraps the
    torus.  Returns an int whose bit `axis` is set if some cluster winds
    along that axis.
    """
    cdef Py_ssize_t n_bonds = ends_a.shape[0]
    cdef int d = steps_by_pos.shape[1]
    if d > 62:
        raise ValueError("too many axes")

    parent_arr = np.arange(n_sites, dtype=np.int32)
    size_arr = np.ones(n_sites, dtype=np.int32)
    off_arr = np.zeros((n_sites, d), dtype=np.int32)
    chain_arr = np.empty(n_sites, dtype=np.int32)
    cdef i32[::1] parent = parent_arr
    cdef i32[::1] sz = size_arr
    cdef i32[:, ::1] off = off_arr
    cdef i32[::1] chain = chain_arr

    cdef Py_ssize_t i, m, j
    cdef int ax
    cdef i32 a, b, ra, rb, x, p, y
    cdef i64 wrapped = 0
    cdef Py_ssize_t pos

    for i in range(n_bonds):
        if not occupied[i]:
            continue
        a = <i32> ends_a[i]
        b = <i32> ends_b[i]
        pos = i // n_sites
        # find with offset-carrying path compression, both endpoints
        for j in range(2):
            x = a if j == 0 else b
            m = 0
            while parent[x] != x:
                chain[m] = x
                m += 1
                x = parent[x]
            while m > 0:
                m -= 1
                y = chain[m]
                p = parent[y]
                if p != x:
                    for ax in range(d):
                        off[y, ax] += off[p, ax]
                    parent[y] = x
            if j == 0:
                ra = x
            else:
                rb = x
        if ra == rb:
            for ax in range(d):
                if off[a, ax] + steps_by_pos[pos, ax] != off[b, ax]:
                    wrapped |= (<i64> 1) << ax
        else:
            if sz[ra] < sz[rb]:
                # attach ra under rb: off[ra] = off[b] - step - off[a]
                parent[ra] = rb
                sz[rb] += sz[ra]
                for ax in range(d):
                    off[ra, ax] = off[b, ax] - steps_by_pos[pos, ax] - off[a, ax]
            else:
                parent[rb] = ra
                sz[ra] += sz[rb]
                for ax in range(d):
                    off[rb, ax] = off[a, ax] + steps_by_pos[pos, ax] - off[b, ax]
    return int(wrapped)
