"""Pure-Python replica kernels (reference backend).

This module pins down the exact arithmetic of the replacement dynamics,
one float operation at a time.  The compiled backend
(``beautycontest._kernels``) mirrors it operation-for-operation and
draw-for-draw, so both backends produce bit-identical trajectories for the
same (seed, replica) pair; the test suite asserts this.

Conventions shared by both backends:

- replica ``k`` of a batch seeded with ``seed`` draws from a Philox4x64-10
  counter-based stream with key ``(seed, k)``; the streams are independent
  by construction and reproducible with numpy via
  ``Generator(Philox(key=[seed, k]))``;
- a configuration is a flat row-major buffer ``x[i*d + j]`` of n points;
- the extreme point is found by an incremental argmax over squared
  distances to the barycentre, with exact ties resolved by reservoir
  sampling (one uniform per tie encountered, uniform over the tied set);
- when the inserted point becomes the new extreme, the core is unchanged
  as a set and its cached statistics are carried over verbatim, so the
  Lyapunov value is *exactly* constant on such steps.
"""

from __future__ import annotations

from math import ceil, log1p, sqrt

import numpy as np

REPLACE_UNIFORM = 0
REPLACE_ADAPTIVE = 1

_M64 = (1 << 64) - 1
_PHILOX_M0 = 0xD2E7470EE14C6C93
_PHILOX_M1 = 0xCA5A826395121157
_PHILOX_W0 = 0x9E3779B97F4A7C15
_PHILOX_W1 = 0xBB67AE8584CAA73B
_INV_2_53 = 1.0 / 9007199254740992.0


class PhiloxStream:
    """Philox4x64-10 double stream, bit-identical to numpy's Philox.

    Matches ``Generator(Philox(key=[seed, stream])).random()`` draw for
    draw (numpy increments the 256-bit block counter before generating, so
    the first block uses counter 1).
    """

    __slots__ = ("key0", "key1", "ctr", "buf", "pos")

    def __init__(self, seed: int, stream: int):
        self.key0 = seed & _M64
        self.key1 = stream & _M64
        self.ctr = 0
        self.buf = (0, 0, 0, 0)
        self.pos = 4

    def next_double(self) -> float:
        pos = self.pos
        if pos < 4:
            self.pos = pos + 1
            return (self.buf[pos] >> 11) * _INV_2_53
        self.ctr += 1
        c = self.ctr
        c0 = c & _M64
        c1 = (c >> 64) & _M64
        c2 = (c >> 128) & _M64
        c3 = (c >> 192) & _M64
        k0 = self.key0
        k1 = self.key1
        for _ in range(10):
            p0 = _PHILOX_M0 * c0
            p1 = _PHILOX_M1 * c2
            c0 = ((p1 >> 64) ^ c1 ^ k0) & _M64
            c1 = p1 & _M64
            c2 = ((p0 >> 64) ^ c3 ^ k1) & _M64
            c3 = p0 & _M64
            k0 = (k0 + _PHILOX_W0) & _M64
            k1 = (k1 + _PHILOX_W1) & _M64
        self.buf = (c0, c1, c2, c3)
        self.pos = 1
        return (c0 >> 11) * _INV_2_53


def _analyze(x, n, d, nextd):
    """Full-configuration mean and extreme index (tie-broken via ``nextd``)."""
    mu = [0.0] * d
    for i in range(n):
        base = i * d
        for j in range(d):
            mu[j] += x[base + j]
    for j in range(d):
        mu[j] /= n
    best = -1.0
    e = -1
    k = 0
    for i in range(n):
        base = i * d
        d2 = 0.0
        for j in range(d):
            diff = x[base + j] - mu[j]
            d2 += diff * diff
        if d2 > best:
            best = d2
            e = i
            k = 1
        elif d2 == best:
            k += 1
            if nextd() * k < 1.0:
                e = i
    return mu, e


def _core_stats(x, n, d, e):
    """Mean, diameter and G of the core (all points except index ``e``)."""
    m = n - 1
    mc = [0.0] * d
    for i in range(n):
        if i == e:
            continue
        base = i * d
        for j in range(d):
            mc[j] += x[base + j]
    for j in range(d):
        mc[j] /= m
    f = 0.0
    for i in range(n):
        if i == e:
            continue
        base = i * d
        for j in range(d):
            diff = x[base + j] - mc[j]
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
    return mc, sqrt(best), f


def _core_minmax(x, n, e):
    """Min and max coordinate of the core; d == 1 only."""
    lo = np.inf
    hi = -np.inf
    for i in range(n):
        if i == e:
            continue
        v = x[i]
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    return lo, hi


def _geometric(u, p):
    """Trials-until-first-success count via inverse CDF; >= 1."""
    if p >= 1.0:
        return 1
    k = ceil(log1p(-u) / log1p(-p))
    if k < 1:
        return 1
    return k


def _run_one(
    x,
    n,
    d,
    nextd,
    replacement,
    diam_stop,
    tol,
    max_steps,
    event_skip,
    track_pi,
    skip_cap,
    recorder=None,
):
    """Run one replica in place; returns the terminal statistics.

    ``recorder(steps, f, dcur, mc, pi_left)`` is called after every realized
    step when supplied (it must not draw from the stream).
    """
    steps = 0
    n_a = 0
    n_ap = 0
    n_fd = 0
    pi_left = 0
    absorbed = False
    u_buf = [0.0] * d

    mu, e = _analyze(x, n, d, nextd)
    mc, dcur, f = _core_stats(x, n, d, e)

    while True:
        if diam_stop and dcur < tol:
            break
        if steps >= max_steps:
            break

        if event_skip:
            if dcur <= 0.0:
                absorbed = True
                break
            # bounding box of the 3D-ball around the core mean, clipped to the cube
            r3 = 3.0 * dcur
            q = 1.0
            box_lo = [0.0] * d
            box_hi = [0.0] * d
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
                absorbed = True
                break
            # geometric skips until the box is hit; reject box hits outside the
            # ball (those raw steps provably leave the core unchanged too)
            dist2 = 0.0
            hit = False
            while True:
                k = _geometric(nextd(), q)
                if k > skip_cap:
                    absorbed = True
                    break
                if steps + k > max_steps:
                    steps = max_steps
                    break
                steps += k
                dist2 = 0.0
                for j in range(d):
                    u_buf[j] = box_lo[j] + nextd() * (box_hi[j] - box_lo[j])
                    diff = u_buf[j] - mc[j]
                    dist2 += diff * diff
                if dist2 <= 9.0 * dcur * dcur:
                    hit = True
                    break
            if not hit:  # absorbed, or the step budget ran out mid-skip
                break
            a = True
            ap = 16.0 * dist2 <= dcur * dcur
        else:
            steps += 1
            if track_pi and x[e] < mu[0]:
                pi_left += 1
            if replacement == REPLACE_UNIFORM:
                for j in range(d):
                    u_buf[j] = nextd()
            else:
                clo, chi = _core_minmax(x, n, e)
                a0 = clo - dcur
                b0 = chi + dcur
                u_buf[0] = a0 + nextd() * (b0 - a0)
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

        base = e * d
        for j in range(d):
            x[base + j] = u_buf[j]
        mu, e_new = _analyze(x, n, d, nextd)
        if e_new != e:
            mc2, d2cur, f2 = _core_stats(x, n, d, e_new)
            if f2 < f:
                n_fd += 1
            mc, dcur, f = mc2, d2cur, f2
        e = e_new
        if recorder is not None:
            recorder(steps, f, dcur, mc, pi_left)

    return steps, n_a, n_ap, n_fd, pi_left, absorbed, mc, e


def run_replicas_kernel(
    seed,
    rep_lo,
    rep_hi,
    n_points,
    dim,
    init,
    replacement,
    diam_stop,
    tol,
    max_steps,
    event_skip,
    track_pi,
    skip_cap,
):
    """Run replicas ``rep_lo..rep_hi-1``; returns a dict of result arrays."""
    n_rep = rep_hi - rep_lo
    xi = np.empty((n_rep, dim))
    steps = np.empty(n_rep, dtype=np.int64)
    n_a = np.empty(n_rep, dtype=np.int64)
    n_ap = np.empty(n_rep, dtype=np.int64)
    n_fd = np.empty(n_rep, dtype=np.int64)
    pi_left = np.empty(n_rep, dtype=np.int64)
    absorbed = np.empty(n_rep, dtype=bool)
    final = np.empty((n_rep, n_points, dim))
    init_flat = None if init is None else [float(v) for v in np.asarray(init).ravel()]

    for r in range(n_rep):
        nextd = PhiloxStream(seed, rep_lo + r).next_double
        if init_flat is None:
            x = [nextd() for _ in range(n_points * dim)]
        else:
            x = list(init_flat)
        st, na, nap, nfd, pl, ab, mc, _ = _run_one(
            x, n_points, dim, nextd, replacement, diam_stop, tol, max_steps,
            event_skip, track_pi, skip_cap,
        )
        steps[r] = st
        n_a[r] = na
        n_ap[r] = nap
        n_fd[r] = nfd
        pi_left[r] = pl
        absorbed[r] = ab
        xi[r] = mc
        final[r] = np.asarray(x).reshape(n_points, dim)

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


def run_trace_kernel(
    seed,
    replica,
    n_points,
    dim,
    init,
    replacement,
    diam_stop,
    tol,
    max_steps,
    event_skip,
    track_pi,
    skip_cap,
    trace_stride,
    include_initial,
):
    """Single-replica run with decimated trace rows and F-drop times.

    Trace rows are recorded after the first realized step at or past each
    multiple of ``trace_stride`` (plus an initial row when requested).  Only
    this backend implements tracing; trajectories are cold paths.
    """
    nextd = PhiloxStream(seed, replica).next_double
    if init is None:
        x = [nextd() for _ in range(n_points * dim)]
    else:
        x = [float(v) for v in np.asarray(init).ravel()]

    rows_t, rows_f, rows_d, rows_mu, rows_pi = [], [], [], [], []
    tau_times = []

    # Peek at the initial core stats with a throwaway tie-break stream so the
    # replica's own stream is untouched (ties are measure zero anyway; on a
    # crafted tie the initial row may reflect either resolution).
    _, e0 = _analyze(list(x), n_points, dim, PhiloxStream(7, 7).next_double)
    mc0, d0, f0 = _core_stats(x, n_points, dim, e0)
    state = {"mark": trace_stride, "f": f0}

    def recorder(steps, f, dcur, mc, pl):
        if f < state["f"]:
            tau_times.append(steps)
        state["f"] = f
        if trace_stride > 0 and steps >= state["mark"]:
            rows_t.append(steps)
            rows_f.append(f)
            rows_d.append(dcur)
            rows_mu.append(list(mc))
            rows_pi.append(pl / steps if steps > 0 else np.nan)
            state["mark"] = (steps // trace_stride + 1) * trace_stride

    if include_initial and trace_stride > 0:
        rows_t.append(0)
        rows_f.append(f0)
        rows_d.append(d0)
        rows_mu.append(list(mc0))
        rows_pi.append(np.nan)

    st, na, nap, nfd, pl, ab, mc, _ = _run_one(
        x, n_points, dim, nextd, replacement, diam_stop, tol, max_steps,
        event_skip, track_pi, skip_cap, recorder=recorder,
    )
    return {
        "xi": np.asarray(mc),
        "steps": st,
        "n_a": na,
        "n_aprime": nap,
        "n_fdrop": nfd,
        "pi_left": pl,
        "absorbed": ab,
        "final_points": np.asarray(x).reshape(n_points, dim),
        "tau_times": np.asarray(tau_times, dtype=np.int64),
        "trace_t": np.asarray(rows_t, dtype=np.int64),
        "trace_f": np.asarray(rows_f),
        "trace_d": np.asarray(rows_d),
        "trace_mu": np.asarray(rows_mu).reshape(len(rows_t), dim),
        "trace_pi": np.asarray(rows_pi),
    }


def run_instrumented_kernel(seed, rep_lo, rep_hi, n_points, dim, steps_per_rep):
    """Per-step statistics of naive unit-cube steps from iid-uniform starts.

    Returns flat arrays of length ``(rep_hi - rep_lo) * steps_per_rep``.
    """
    n_rep = rep_hi - rep_lo
    total = n_rep * steps_per_rep
    f_before = np.empty(total)
    f_after = np.empty(total)
    d_before = np.empty(total)
    d_after = np.empty(total)
    event_a = np.empty(total, dtype=bool)
    event_ap = np.empty(total, dtype=bool)
    removed_left = np.empty(total, dtype=bool)

    idx = 0
    for r in range(n_rep):
        nextd = PhiloxStream(seed, rep_lo + r).next_double
        x = [nextd() for _ in range(n_points * dim)]
        mu, e = _analyze(x, n_points, dim, nextd)
        mc, dcur, f = _core_stats(x, n_points, dim, e)
        u_buf = [0.0] * dim
        for _ in range(steps_per_rep):
            f_before[idx] = f
            d_before[idx] = dcur
            removed_left[idx] = dim == 1 and x[e] < mu[0]
            for j in range(dim):
                u_buf[j] = nextd()
            dist2 = 0.0
            for j in range(dim):
                diff = u_buf[j] - mc[j]
                dist2 += diff * diff
            event_a[idx] = dist2 <= 9.0 * dcur * dcur
            event_ap[idx] = 16.0 * dist2 <= dcur * dcur
            base = e * dim
            for j in range(dim):
                x[base + j] = u_buf[j]
            mu, e_new = _analyze(x, n_points, dim, nextd)
            if e_new != e:
                mc, dcur, f = _core_stats(x, n_points, dim, e_new)
            e = e_new
            f_after[idx] = f
            d_after[idx] = dcur
            idx += 1

    return {
        "f_before": f_before,
        "f_after": f_after,
        "d_before": d_before,
        "d_after": d_after,
        "event_a": event_a,
        "event_aprime": event_ap,
        "removed_left": removed_left,
    }


def run_instrumented_capture(seed, replica, n_points, dim, steps_per_rep):
    """Like one replica of ``run_instrumented_kernel`` but also captures the
    configuration before each step and the inserted point.

    Used to extract witness configurations after a fast scan has flagged a
    step of interest; only this backend provides it.
    """
    nextd = PhiloxStream(seed, replica).next_double
    x = [nextd() for _ in range(n_points * dim)]
    mu, e = _analyze(x, n_points, dim, nextd)
    mc, dcur, f = _core_stats(x, n_points, dim, e)
    u_buf = [0.0] * dim
    configs = np.empty((steps_per_rep, n_points, dim))
    inserted = np.empty((steps_per_rep, dim))
    d_before = np.empty(steps_per_rep)
    d_after = np.empty(steps_per_rep)
    for t in range(steps_per_rep):
        configs[t] = np.asarray(x).reshape(n_points, dim)
        d_before[t] = dcur
        for j in range(dim):
            u_buf[j] = nextd()
        inserted[t] = u_buf
        base = e * dim
        for j in range(dim):
            x[base + j] = u_buf[j]
        mu, e_new = _analyze(x, n_points, dim, nextd)
        if e_new != e:
            mc, dcur, f = _core_stats(x, n_points, dim, e_new)
        e = e_new
        d_after[t] = dcur
    return {
        "configs": configs,
        "inserted": inserted,
        "d_before": d_before,
        "d_after": d_after,
    }
