# cython: language_level=3, boundscheck=False, wraparound=False
# cython: initializedcheck=False, cdivision=True
"""Compiled event-loop kernel.

Line-by-line port of `_kernel_py`; see that module for the calling
convention.  Both kernels must apply identical floating-point operations in
identical order so trajectories are bit-reproducible across them.  The
extension is compiled with -ffp-contract=off for that reason: fused
multiply-adds would change results.
"""

from libc.math cimport fabs, sqrt, pow
from libc.stdint cimport int64_t

import numpy as np

KERNEL_NAME = "c"


cdef inline double _dist(const double* a, const double* b, Py_ssize_t d,
                         int code, double p) noexcept nogil:
    # coordinate order is the bit-reproducibility contract
    cdef double acc = 0.0
    cdef double x
    cdef Py_ssize_t k
    if code == 1:
        for k in range(d):
            acc += fabs(a[k] - b[k])
        return acc
    if code == 2:
        for k in range(d):
            x = a[k] - b[k]
            acc += x * x
        return sqrt(acc)
    if code == 3:
        for k in range(d):
            x = fabs(a[k] - b[k])
            if x > acc:
                acc = x
        return acc
    for k in range(d):
        acc += pow(fabs(a[k] - b[k]), p)
    return pow(acc, 1.0 / p)


cdef inline bint _outside_space(const double* row, Py_ssize_t d, int code,
                                double p, int shape_code, const double* sa,
                                const double* sb, double shape_r,
                                double tol) noexcept nogil:
    cdef Py_ssize_t k
    if shape_code == 1:
        return _dist(row, sa, d, code, p) >= shape_r + tol
    for k in range(d):
        if row[k] < sa[k] - tol or row[k] > sb[k] + tol:
            return True
    return False


def init_state(const double[:, ::1] opinions, const int64_t[::1] edges_u,
               const int64_t[::1] edges_v, int norm_code, double norm_p,
               double tau, double eps_stop, double[::1] edge_dist,
               unsigned char[::1] is_active, unsigned char[::1] is_mid):
    """Fill the per-edge distance cache and flags; return (active, mid) counts."""
    cdef Py_ssize_t d = opinions.shape[1]
    cdef Py_ssize_t n_edges = edges_u.shape[0]
    cdef double half_tau = 0.5 * tau
    cdef int64_t active = 0
    cdef int64_t mid = 0
    cdef Py_ssize_t e
    cdef double dval
    with nogil:
        for e in range(n_edges):
            dval = _dist(&opinions[edges_u[e], 0], &opinions[edges_v[e], 0],
                         d, norm_code, norm_p)
            edge_dist[e] = dval
            if eps_stop <= dval <= tau:
                is_active[e] = 1
                active += 1
            else:
                is_active[e] = 0
            if half_tau <= dval <= tau:
                is_mid[e] = 1
                mid += 1
            else:
                is_mid[e] = 0
    return int(active), int(mid)


def probe_totals(const double[:, ::1] opinions, const double[:, ::1] probes,
                 int norm_code, double norm_p, double[::1] probe_x):
    """probe_x[p] = sum over vertices of ||opinion - probe_p||."""
    cdef Py_ssize_t n = opinions.shape[0]
    cdef Py_ssize_t d = opinions.shape[1]
    cdef Py_ssize_t n_probes = probes.shape[0]
    cdef Py_ssize_t pi, i
    cdef double acc
    with nogil:
        for pi in range(n_probes):
            acc = 0.0
            for i in range(n):
                acc += _dist(&opinions[i, 0], &probes[pi, 0], d, norm_code,
                             norm_p)
            probe_x[pi] = acc


def all_pairs_clear(const double[:, ::1] opinions, int norm_code,
                    double norm_p, double tau):
    """True iff no vertex pair (adjacent or not) has distance in [tau/2, tau]."""
    cdef Py_ssize_t n = opinions.shape[0]
    cdef Py_ssize_t d = opinions.shape[1]
    cdef double half_tau = 0.5 * tau
    cdef Py_ssize_t i, j
    cdef double dval
    cdef bint clear = True
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                dval = _dist(&opinions[i, 0], &opinions[j, 0], d, norm_code,
                             norm_p)
                if half_tau <= dval <= tau:
                    clear = False
                    break
            if not clear:
                break
    return bool(clear)


def run_events(double[:, ::1] opinions, const int64_t[::1] edges_u,
               const int64_t[::1] edges_v, const int64_t[::1] adj_indptr,
               const int64_t[::1] adj_eids, int64_t[::1] stamp,
               double[::1] edge_dist, unsigned char[::1] is_active,
               unsigned char[::1] is_mid,
               int norm_code, double norm_p, double tau, double mu,
               double eps_stop, double mono_tol,
               int shape_code, const double[::1] shape_a,
               const double[::1] shape_b, double shape_r, double member_tol,
               const double[:, ::1] probes, double[::1] probe_x,
               const int64_t[::1] edge_buf, const double[::1] dt_buf,
               int64_t[::1] istate, double[::1] fstate,
               double[:, ::1] tstar_snapshot,
               int rec_on, int64_t[::1] rec_u, int64_t[::1] rec_v,
               unsigned char[::1] rec_flag, double[::1] rec_time,
               double[::1] rec_jump, double[:, ::1] rec_probe):
    """Process up to len(edge_buf) events; return (consumed, absorbed)."""
    cdef Py_ssize_t n = opinions.shape[0]
    cdef Py_ssize_t d = opinions.shape[1]
    cdef Py_ssize_t n_probes = probes.shape[0]
    cdef double half_tau = 0.5 * tau
    cdef Py_ssize_t chunk = edge_buf.shape[0]

    cdef int64_t active_count = istate[0]
    cdef int64_t mid_count = istate[1]
    cdef int64_t tstar_found = istate[2]
    cdef int64_t tstar_event = istate[3]
    cdef int64_t event_count = istate[4]
    cdef int64_t membership_violations = istate[5]
    cdef int64_t probe_increase_count = istate[6]
    cdef double time = fstate[0]
    cdef double tstar_time = fstate[1]
    cdef double max_probe_increment = fstate[2]

    old_probe_arr = np.zeros(n_probes, dtype=np.float64)
    cdef double[::1] old_probe = old_probe_arr

    cdef Py_ssize_t consumed = 0
    cdef bint absorbed = False
    cdef Py_ssize_t k, c, pi, idx, i, j, which
    cdef int64_t eid, e2, u, v, endpoint
    cdef double dval, jump, delta, new_val, inc, d2, dij
    cdef double* row_u
    cdef double* row_v
    cdef double* row_i
    cdef bint inter, clear
    cdef int now_active, now_mid

    with nogil:
        for k in range(chunk):
            eid = edge_buf[k]
            time += dt_buf[k]
            event_count += 1
            consumed = k + 1
            u = edges_u[eid]
            v = edges_v[eid]
            dval = edge_dist[eid]
            inter = dval <= tau
            jump = 0.0
            if inter:
                jump = mu * dval
                row_u = &opinions[u, 0]
                row_v = &opinions[v, 0]
                for pi in range(n_probes):
                    old_probe[pi] = (_dist(row_u, &probes[pi, 0], d,
                                           norm_code, norm_p)
                                     + _dist(row_v, &probes[pi, 0], d,
                                             norm_code, norm_p))
                for c in range(d):
                    delta = mu * (row_v[c] - row_u[c])
                    row_u[c] += delta
                    row_v[c] -= delta
                if _outside_space(row_u, d, norm_code, norm_p, shape_code,
                                  &shape_a[0], &shape_b[0], shape_r,
                                  member_tol):
                    membership_violations += 1
                if _outside_space(row_v, d, norm_code, norm_p, shape_code,
                                  &shape_a[0], &shape_b[0], shape_r,
                                  member_tol):
                    membership_violations += 1
                for pi in range(n_probes):
                    new_val = (_dist(row_u, &probes[pi, 0], d, norm_code,
                                     norm_p)
                               + _dist(row_v, &probes[pi, 0], d, norm_code,
                                       norm_p))
                    inc = new_val - old_probe[pi]
                    probe_x[pi] += inc
                    if inc > max_probe_increment:
                        max_probe_increment = inc
                    if inc > mono_tol:
                        probe_increase_count += 1
                # only edges touching u or v can change class; the stamp
                # keeps the shared edge (u, v) from being processed twice
                for which in range(2):
                    endpoint = u if which == 0 else v
                    for idx in range(adj_indptr[endpoint],
                                     adj_indptr[endpoint + 1]):
                        e2 = adj_eids[idx]
                        if stamp[e2] == event_count:
                            continue
                        stamp[e2] = event_count
                        d2 = _dist(&opinions[edges_u[e2], 0],
                                   &opinions[edges_v[e2], 0], d, norm_code,
                                   norm_p)
                        edge_dist[e2] = d2
                        now_active = 1 if (eps_stop <= d2 <= tau) else 0
                        if now_active != is_active[e2]:
                            active_count += now_active - is_active[e2]
                            is_active[e2] = now_active
                        now_mid = 1 if (half_tau <= d2 <= tau) else 0
                        if now_mid != is_mid[e2]:
                            mid_count += now_mid - is_mid[e2]
                            is_mid[e2] = now_mid
            if rec_on:
                rec_u[k] = u
                rec_v[k] = v
                rec_flag[k] = 1 if inter else 0
                rec_time[k] = time
                rec_jump[k] = jump
                for pi in range(n_probes):
                    rec_probe[k, pi] = probe_x[pi]
            if inter and not tstar_found and mid_count == 0:
                clear = True
                for i in range(n):
                    row_i = &opinions[i, 0]
                    for j in range(i + 1, n):
                        dij = _dist(row_i, &opinions[j, 0], d, norm_code,
                                    norm_p)
                        if half_tau <= dij <= tau:
                            clear = False
                            break
                    if not clear:
                        break
                if clear:
                    tstar_found = 1
                    tstar_time = time
                    tstar_event = event_count
                    for i in range(n):
                        for c in range(d):
                            tstar_snapshot[i, c] = opinions[i, c]
            if active_count == 0:
                absorbed = True
                break

    istate[0] = active_count
    istate[1] = mid_count
    istate[2] = tstar_found
    istate[3] = tstar_event
    istate[4] = event_count
    istate[5] = membership_violations
    istate[6] = probe_increase_count
    fstate[0] = time
    fstate[1] = tstar_time
    fstate[2] = max_probe_increment
    return int(consumed), bool(absorbed)
