# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled replica kernels.

Mirrors ``beautycontest._kernels_py`` operation-for-operation and
draw-for-draw: every float expression and every Philox draw happens in the
same order, so both backends produce bit-identical trajectories for the
same (seed, replica) pair.  Keep the two files in sync; the parity tests
will catch drift.
"""

from libc.math cimport ceil, log1p, sqrt
from libc.stdint cimport uint64_t
from libc.stdlib cimport free, malloc

import numpy as np

cdef extern from *:
    ctypedef unsigned long long uint128_t "unsigned __int128"

REPLACE_UNIFORM = 0
REPLACE_ADAPTIVE = 1

DEF MAX_DIM = 32

cdef uint64_t PHILOX_M0 = 0xD2E7470EE14C6C93ULL
cdef uint64_t PHILOX_M1 = 0xCA5A826395121157ULL
cdef uint64_t PHILOX_W0 = 0x9E3779B97F4A7C15ULL
cdef uint64_t PHILOX_W1 = 0xBB67AE8584CAA73BULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef struct Philox:
    uint64_t ctr[4]
    uint64_t key[2]
    uint64_t buf[4]
    int pos


cdef inline void _philox_init(Philox *s, uint64_t seed, uint64_t stream) noexcept nogil:
    s.ctr[0] = 0
    s.ctr[1] = 0
    s.ctr[2] = 0
    s.ctr[3] = 0
    s.key[0] = seed
    s.key[1] = stream
    s.pos = 4


cdef inline double _next_double(Philox *s) noexcept nogil:
    cdef uint64_t w, c0, c1, c2, c3, k0, k1
    cdef uint128_t p0, p1
    cdef int r
    if s.pos < 4:
        w = s.buf[s.pos]
        s.pos += 1
        return <double> (w >> 11) * INV_2_53
    # numpy's Philox increments the 256-bit block counter before generating
    s.ctr[0] += 1
    if s.ctr[0] == 0:
        s.ctr[1] += 1
        if s.ctr[1] == 0:
            s.ctr[2] += 1
            if s.ctr[2] == 0:
                s.ctr[3] += 1
    c0 = s.ctr[0]
    c1 = s.ctr[1]
    c2 = s.ctr[2]
    c3 = s.ctr[3]
    k0 = s.key[0]
    k1 = s.key[1]
    for r in range(10):
        p0 = (<uint128_t> PHILOX_M0) * c0
        p1 = (<uint128_t> PHILOX_M1) * c2
        c0 = (<uint64_t> (p1 >> 64)) ^ c1 ^ k0
        c1 = <uint64_t> p1
        c2 = (<uint64_t> (p0 >> 64)) ^ c3 ^ k1
        c3 = <uint64_t> p0
        k0 = k0 + PHILOX_W0
        k1 = k1 + PHILOX_W1
    s.buf[0] = c0
    s.buf[1] = c1
    s.buf[2] = c2
    s.buf[3] = c3
    s.pos = 1
    return <double> (c0 >> 11) * INV_2_53


cdef int _analyze(double *x, int n, int d, Philox *rng, double *mu) noexcept nogil:
    cdef int i, j, e, k
    cdef double best, d2, diff
    for j in range(d):
        mu[j] = 0.0
    for i in range(n):
        for j in range(d):
            mu[j] += x[i * d + j]
    for j in range(d):
        mu[j] /= n
    best = -1.0
    e = -1
    k = 0
    for i in range(n):
        d2 = 0.0
        for j in range(d):
            diff = x[i * d + j] - mu[j]
            d2 += diff * diff
        if d2 > best:
            best = d2
            e = i
            k = 1
        elif d2 == best:
            k += 1
            if _next_double(rng) * k < 1.0:
                e = i
    return e


cdef void _core_stats(double *x, int n, int d, int e,
                      double *mc, double *d_out, double *f_out) noexcept nogil:
    cdef int i, i2, j, m
    cdef double f, best, d2, diff
    m = n - 1
    for j in range(d):
        mc[j] = 0.0
    for i in range(n):
        if i == e:
            continue
        for j in range(d):
            mc[j] += x[i * d + j]
    for j in range(d):
        mc[j] /= m
    f = 0.0
    for i in range(n):
        if i == e:
            continue
        for j in range(d):
            diff = x[i * d + j] - mc[j]
            f += diff * diff
    best = 0.0
    for i in range(n):
        if i == e:
            continue
        for i2 in range(i + 1, n):
            if i2 == e:
                continue
            d2 = 0.0
            for j in range(d):
                diff = x[i * d + j] - x[i2 * d + j]
                d2 += diff * diff
            if d2 > best:
                best = d2
    d_out[0] = sqrt(best)
    f_out[0] = f


cdef void _core_minmax(double *x, int n, int e, double *lo_out, double *hi_out) noexcept nogil:
    cdef int i
    cdef double lo = 1e308
    cdef double hi = -1e308
    cdef double v
    for i in range(n):
        if i == e:
            continue
        v = x[i]
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    lo_out[0] = lo
    hi_out[0] = hi


cdef inline double _geometric(double u, double p) noexcept nogil:
    cdef double k
    if p >= 1.0:
        return 1.0
    k = ceil(log1p(-u) / log1p(-p))
    if k < 1.0:
        return 1.0
    return k


cdef bint _run_one(double *x, int n, int d, Philox *rng,
                   int replacement, bint diam_stop, double tol,
                   long long max_steps, bint event_skip, bint track_pi,
                   double skip_cap,
                   long long *steps_out, long long *n_a_out,
                   long long *n_ap_out, long long *n_fd_out,
                   long long *pi_left_out, double *mc) noexcept nogil:
    cdef long long steps = 0, n_a = 0, n_ap = 0, n_fd = 0, pi_left = 0, kk
    cdef bint absorbed = 0, a, ap, hit
    cdef int j, e, e_new
    cdef double dcur, f, d2cur, f2, dist2, diff, q, r3, lo, hi, k, a0, b0, clo, chi
    cdef double mu[MAX_DIM]
    cdef double mc2[MAX_DIM]
    cdef double u_buf[MAX_DIM]
    cdef double box_lo[MAX_DIM]
    cdef double box_hi[MAX_DIM]

    e = _analyze(x, n, d, rng, mu)
    _core_stats(x, n, d, e, mc, &dcur, &f)

    while True:
        if diam_stop and dcur < tol:
            break
        if steps >= max_steps:
            break

        if event_skip:
            if dcur <= 0.0:
                absorbed = 1
                break
            r3 = 3.0 * dcur
            q = 1.0
            for j in range(d):
                lo = mc[j] - r3
                if lo < 0.0:
                    lo = 0.0
                hi = mc[j] + r3
                if hi > 1.0:
                    hi = 1.0
                box_lo[j] = lo
                box_hi[j] = hi
                q *= hi - lo
            if q <= 0.0:
                absorbed = 1
                break
            dist2 = 0.0
            hit = 0
            while True:
                k = _geometric(_next_double(rng), q)
                if k > skip_cap:
                    absorbed = 1
                    break
                kk = <long long> k
                if steps + kk > max_steps:
                    steps = max_steps
                    break
                steps += kk
                dist2 = 0.0
                for j in range(d):
                    u_buf[j] = box_lo[j] + _next_double(rng) * (box_hi[j] - box_lo[j])
                    diff = u_buf[j] - mc[j]
                    dist2 += diff * diff
                if dist2 <= 9.0 * dcur * dcur:
                    hit = 1
                    break
            if not hit:  # absorbed, or the step budget ran out mid-skip
                break
            a = 1
            ap = 16.0 * dist2 <= dcur * dcur
        else:
            steps += 1
            if track_pi and x[e] < mu[0]:
                pi_left += 1
            if replacement == 0:
                for j in range(d):
                    u_buf[j] = _next_double(rng)
            else:
                _core_minmax(x, n, e, &clo, &chi)
                a0 = clo - dcur
                b0 = chi + dcur
                u_buf[0] = a0 + _next_double(rng) * (b0 - a0)
            dist2 = 0.0
            for j in range(d):
                diff = u_buf[j] - mc[j]
                dist2 += diff * diff
            a = dist2 <= 9.0 * dcur * dcur
            ap = 16.0 * dist2 <= dcur * dcur

        if a:
            n_a += 1
        if ap:
            n_ap += 1

        for j in range(d):
            x[e * d + j] = u_buf[j]
        e_new = _analyze(x, n, d, rng, mu)
        if e_new != e:
            _core_stats(x, n, d, e_new, mc2, &d2cur, &f2)
            if f2 < f:
                n_fd += 1
            for j in range(d):
                mc[j] = mc2[j]
            dcur = d2cur
            f = f2
        e = e_new

    steps_out[0] = steps
    n_a_out[0] = n_a
    n_ap_out[0] = n_ap
    n_fd_out[0] = n_fd
    pi_left_out[0] = pi_left
    return absorbed


def run_replicas_kernel(seed, long long rep_lo, long long rep_hi,
                        int n_points, int dim, init, int replacement,
                        bint diam_stop, double tol, long long max_steps,
                        bint event_skip, bint track_pi, double skip_cap):
    """Run replicas ``rep_lo..rep_hi-1``; returns a dict of result arrays."""
    if dim > MAX_DIM:
        raise ValueError(f"dim > {MAX_DIM} not supported by the compiled kernel")
    cdef uint64_t seed64 = <uint64_t> (int(seed) & ((1 << 64) - 1))
    cdef Py_ssize_t n_rep = rep_hi - rep_lo
    xi = np.empty((n_rep, dim))
    steps = np.empty(n_rep, dtype=np.int64)
    n_a = np.empty(n_rep, dtype=np.int64)
    n_ap = np.empty(n_rep, dtype=np.int64)
    n_fd = np.empty(n_rep, dtype=np.int64)
    pi_left = np.empty(n_rep, dtype=np.int64)
    absorbed = np.empty(n_rep, dtype=bool)
    final = np.empty((n_rep, n_points, dim))

    cdef double[:, ::1] xi_v = xi
    cdef long long[::1] steps_v = steps
    cdef long long[::1] n_a_v = n_a
    cdef long long[::1] n_ap_v = n_ap
    cdef long long[::1] n_fd_v = n_fd
    cdef long long[::1] pi_v = pi_left
    cdef unsigned char[::1] ab_v = absorbed.view(np.uint8)
    cdef double[:, :, ::1] final_v = final

    cdef double[::1] init_v
    cdef double *init_ptr = NULL
    if init is not None:
        init_arr = np.ascontiguousarray(np.asarray(init, dtype=np.float64).ravel())
        if init_arr.shape[0] != n_points * dim:
            raise ValueError("init must have n_points * dim coordinates")
        init_v = init_arr
        init_ptr = &init_v[0]

    cdef double *x = <double *> malloc(n_points * dim * sizeof(double))
    if x == NULL:
        raise MemoryError

    cdef Philox rng
    cdef Py_ssize_t r
    cdef int i
    try:
        with nogil:
            for r in range(n_rep):
                _philox_init(&rng, seed64, <uint64_t> (rep_lo + r))
                if init_ptr == NULL:
                    for i in range(n_points * dim):
                        x[i] = _next_double(&rng)
                else:
                    for i in range(n_points * dim):
                        x[i] = init_ptr[i]
                ab_v[r] = _run_one(
                    x, n_points, dim, &rng, replacement, diam_stop, tol,
                    max_steps, event_skip, track_pi, skip_cap,
                    &steps_v[r], &n_a_v[r], &n_ap_v[r], &n_fd_v[r],
                    &pi_v[r], &xi_v[r, 0])
                for i in range(n_points * dim):
                    final_v[r, i // dim, i % dim] = x[i]
    finally:
        free(x)

    return {
        "xi": xi,
        "steps": steps,
        "n_a": n_a,
        "n_aprime": n_ap,
        "n_fdrop": n_fd,
        "pi_left": pi_left,
        "absorbed": absorbed,
        "final_points": final,
    }


def run_instrumented_kernel(seed, long long rep_lo, long long rep_hi,
                            int n_points, int dim, long long steps_per_rep):
    """Per-step statistics of naive unit-cube steps from iid-uniform starts."""
    if dim > MAX_DIM:
        raise ValueError(f"dim > {MAX_DIM} not supported by the compiled kernel")
    cdef uint64_t seed64 = <uint64_t> (int(seed) & ((1 << 64) - 1))
    cdef Py_ssize_t n_rep = rep_hi - rep_lo
    cdef Py_ssize_t total = n_rep * steps_per_rep
    f_before = np.empty(total)
    f_after = np.empty(total)
    d_before = np.empty(total)
    d_after = np.empty(total)
    event_a = np.empty(total, dtype=bool)
    event_ap = np.empty(total, dtype=bool)
    removed_left = np.empty(total, dtype=bool)

    cdef double[::1] fb_v = f_before
    cdef double[::1] fa_v = f_after
    cdef double[::1] db_v = d_before
    cdef double[::1] da_v = d_after
    cdef unsigned char[::1] a_v = event_a.view(np.uint8)
    cdef unsigned char[::1] ap_v = event_ap.view(np.uint8)
    cdef unsigned char[::1] rl_v = removed_left.view(np.uint8)

    cdef double *x = <double *> malloc(n_points * dim * sizeof(double))
    if x == NULL:
        raise MemoryError

    cdef double mu[MAX_DIM]
    cdef double mc[MAX_DIM]
    cdef double u_buf[MAX_DIM]
    cdef Philox rng
    cdef Py_ssize_t r, idx = 0
    cdef long long t
    cdef int i, j, e, e_new
    cdef double dcur, f, dist2, diff
    try:
        with nogil:
            for r in range(n_rep):
                _philox_init(&rng, seed64, <uint64_t> (rep_lo + r))
                for i in range(n_points * dim):
                    x[i] = _next_double(&rng)
                e = _analyze(x, n_points, dim, &rng, mu)
                _core_stats(x, n_points, dim, e, mc, &dcur, &f)
                for t in range(steps_per_rep):
                    fb_v[idx] = f
                    db_v[idx] = dcur
                    rl_v[idx] = dim == 1 and x[e] < mu[0]
                    for j in range(dim):
                        u_buf[j] = _next_double(&rng)
                    dist2 = 0.0
                    for j in range(dim):
                        diff = u_buf[j] - mc[j]
                        dist2 += diff * diff
                    a_v[idx] = dist2 <= 9.0 * dcur * dcur
                    ap_v[idx] = 16.0 * dist2 <= dcur * dcur
                    for j in range(dim):
                        x[e * dim + j] = u_buf[j]
                    e_new = _analyze(x, n_points, dim, &rng, mu)
                    if e_new != e:
                        _core_stats(x, n_points, dim, e_new, mc, &dcur, &f)
                    e = e_new
                    fa_v[idx] = f
                    da_v[idx] = dcur
                    idx += 1
    finally:
        free(x)

    return {
        "f_before": f_before,
        "f_after": f_after,
        "d_before": d_before,
        "d_after": d_after,
        "event_a": event_a,
        "event_aprime": event_ap,
        "removed_left": removed_left,
    }
