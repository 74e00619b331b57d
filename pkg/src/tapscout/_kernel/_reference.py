"""Pure-Python twin of the compiled trial kernel.

Same loop structure and operation order as ``_accel.pyx`` so both backends
produce numerically matching trajectories; this one is the fallback when the
extension is not built, and the baseline for the backend benchmark.
"""

from __future__ import annotations


def run_steps(
    stats,        # (E,) float64, updated in place
    z,            # (rows, P*n) float64 standard normals
    t_start,      # 1-based step index of z row 0
    nu,           # first post-change step (> horizon means never)
    h,            # stopping threshold
    base_pre, scale_pre,    # (P,) per-probe S = base + scale * sum(z block)
    base_post, scale_post,
    n_block,
    indptr, pidx, ca, cb, cd,   # CSR over edges of (a, b, d) LLR terms
    trace=None,   # optional (rows, E) float64, per-step statistics
):
    """Advance the per-edge CUSUM bank over a chunk of pre-drawn normals.

    Returns (stopped, rows_used, tau, lam_index); lam_index is the smallest
    argmax edge at the crossing step.
    """
    rows = z.shape[0]
    n_edges = stats.shape[0]
    n_probes = base_pre.shape[0]
    sums = [0.0] * n_probes

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
            if trace is not None:
                trace[r, e] = v
            if v > best:
                best = v
                lam = e
        if best >= h:
            return True, r + 1, t, lam
    return False, rows, 0, -1
