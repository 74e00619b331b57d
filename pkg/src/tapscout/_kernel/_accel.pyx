# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled trial kernel: per-step probe sums, per-edge CUSUM updates and the
threshold test, fused over a chunk of pre-drawn standard normals.

Keep the loop structure in lockstep with ``_reference.py``.
"""

import numpy as np


def run_steps(
    double[::1] stats,
    double[:, ::1] z,
    long t_start,
    long nu,
    double h,
    double[::1] base_pre,
    double[::1] scale_pre,
    double[::1] base_post,
    double[::1] scale_post,
    long n_block,
    long[::1] indptr,
    long[::1] pidx,
    double[::1] ca,
    double[::1] cb,
    double[::1] cd,
    trace=None,
):
    cdef Py_ssize_t rows = z.shape[0]
    cdef Py_ssize_t n_edges = stats.shape[0]
    cdef Py_ssize_t n_probes = base_pre.shape[0]
    cdef Py_ssize_t r, p, e, k, off, lam
    cdef long i, t
    cdef bint post, has_trace
    cdef double acc, llr, v, s, best

    cdef double[::1] sums = np.empty(n_probes, dtype=np.float64)
    cdef double[:, ::1] trace_view
    has_trace = trace is not None
    if has_trace:
        trace_view = trace

    for r in range(rows):
        t = t_start + r
        post = t >= nu
        for p in range(n_probes):
            acc = 0.0
            off = p * n_block
            for k in range(n_block):
                acc += z[r, off + k]
            if post:
                sums[p] = base_post[p] + scale_post[p] * acc
            else:
                sums[p] = base_pre[p] + scale_pre[p] * acc
        best = -1.0
        lam = -1
        for e in range(n_edges):
            llr = 0.0
            for i in range(indptr[e], indptr[e + 1]):
                s = sums[pidx[i]]
                llr += ca[i] + cb[i] * s + cd[i] * s * s
            v = stats[e] + llr
            if v < 0.0:
                v = 0.0
            stats[e] = v
            if has_trace:
                trace_view[r, e] = v
            if v > best:
                best = v
                lam = e
        if best >= h:
            return True, r + 1, t, lam
    return False, rows, 0, -1
