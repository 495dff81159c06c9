"""Pure-Python event-loop kernel.

Fallback for environments without the compiled extension, and the reference
for kernel parity tests: `_kernel.pyx` is a line-by-line port of this module
and must produce bit-identical trajectories.  Keep every floating-point
operation in the same order in both files.  CPython floats are IEEE-754
binary64, like C doubles, so identical operation order gives identical bits.

State is passed in flat arrays so both kernels share one calling convention:

  istate: 0 active_count   (edges with distance in [eps_stop, tau])
          1 mid_count      (edges with distance in [tau/2, tau])
          2 tstar_found    (0/1)
          3 tstar_event    (event index at the stopping time)
          4 event_count    (events processed so far, across chunks)
          5 membership_violations
          6 probe_increase_count  (probe totals that rose by more than mono_tol)
  fstate: 0 time
          1 tstar_time
          2 max_probe_increment

Norm codes: 1 = l1, 2 = l2, 3 = linf, 4 = lp (with exponent norm_p).
Shape codes: 1 = ball (shape_a = center, shape_r = radius),
             2 = box  (shape_a = lower, shape_b = upper).
"""

from __future__ import annotations

import math

KERNEL_NAME = "python"


def _dist(a, b, d, code, p):
    # coordinate order is the bit-reproducibility contract
    if code == 1:
        acc = 0.0
        for k in range(d):
            acc += abs(a[k] - b[k])
        return acc
    if code == 2:
        acc = 0.0
        for k in range(d):
            x = a[k] - b[k]
            acc += x * x
        return math.sqrt(acc)
    if code == 3:
        acc = 0.0
        for k in range(d):
            x = abs(a[k] - b[k])
            if x > acc:
                acc = x
        return acc
    acc = 0.0
    for k in range(d):
        acc += abs(a[k] - b[k]) ** p
    return acc ** (1.0 / p)


def _outside_space(row, d, code, p, shape_code, shape_a, shape_b, shape_r, tol):
    if shape_code == 1:
        return _dist(row, shape_a, d, code, p) >= shape_r + tol
    for k in range(d):
        if row[k] < shape_a[k] - tol or row[k] > shape_b[k] + tol:
            return True
    return False


def init_state(opinions, edges_u, edges_v, norm_code, norm_p, tau, eps_stop,
               edge_dist, is_active, is_mid):
    """Fill the per-edge distance cache and flags; return (active, mid) counts."""
    op = opinions.tolist()
    eu = edges_u.tolist()
    ev = edges_v.tolist()
    d = opinions.shape[1]
    half_tau = 0.5 * tau
    n_edges = len(eu)
    dist_l = [0.0] * n_edges
    act_l = [0] * n_edges
    mid_l = [0] * n_edges
    active = 0
    mid = 0
    for e in range(n_edges):
        dval = _dist(op[eu[e]], op[ev[e]], d, norm_code, norm_p)
        dist_l[e] = dval
        if eps_stop <= dval <= tau:
            act_l[e] = 1
            active += 1
        if half_tau <= dval <= tau:
            mid_l[e] = 1
            mid += 1
    edge_dist[:] = dist_l
    is_active[:] = act_l
    is_mid[:] = mid_l
    return active, mid


def probe_totals(opinions, probes, norm_code, norm_p, probe_x):
    """probe_x[p] = sum over vertices of ||opinion - probe_p||."""
    op = opinions.tolist()
    pr = probes.tolist()
    d = opinions.shape[1]
    totals = [0.0] * len(pr)
    for pi in range(len(pr)):
        acc = 0.0
        for row in op:
            acc += _dist(row, pr[pi], d, norm_code, norm_p)
        totals[pi] = acc
    probe_x[:] = totals


def all_pairs_clear(opinions, norm_code, norm_p, tau):
    """True iff no vertex pair (adjacent or not) has distance in [tau/2, tau]."""
    op = opinions.tolist()
    n = len(op)
    d = opinions.shape[1]
    half_tau = 0.5 * tau
    for i in range(n):
        for j in range(i + 1, n):
            dval = _dist(op[i], op[j], d, norm_code, norm_p)
            if half_tau <= dval <= tau:
                return False
    return True


def run_events(opinions, edges_u, edges_v, adj_indptr, adj_eids, stamp,
               edge_dist, is_active, is_mid,
               norm_code, norm_p, tau, mu, eps_stop, mono_tol,
               shape_code, shape_a, shape_b, shape_r, member_tol,
               probes, probe_x,
               edge_buf, dt_buf,
               istate, fstate, tstar_snapshot,
               rec_on, rec_u, rec_v, rec_flag, rec_time, rec_jump, rec_probe):
    """Process up to len(edge_buf) events; return (consumed, absorbed).

    Mutates opinions, the per-edge caches, probe_x, istate/fstate, the
    snapshot, and (when rec_on) the per-chunk recording buffers.
    """
    op = opinions.tolist()
    eu = edges_u.tolist()
    ev = edges_v.tolist()
    indptr = adj_indptr.tolist()
    eids = adj_eids.tolist()
    stamp_l = stamp.tolist()
    dist_l = edge_dist.tolist()
    act_l = is_active.tolist()
    mid_l = is_mid.tolist()
    pr = probes.tolist()
    px = probe_x.tolist()
    ebuf = edge_buf.tolist()
    tbuf = dt_buf.tolist()
    sa = shape_a.tolist()
    sb = shape_b.tolist()

    n = len(op)
    d = opinions.shape[1]
    n_probes = len(pr)
    half_tau = 0.5 * tau
    chunk = len(ebuf)

    active_count = int(istate[0])
    mid_count = int(istate[1])
    tstar_found = int(istate[2])
    tstar_event = int(istate[3])
    event_count = int(istate[4])
    membership_violations = int(istate[5])
    probe_increase_count = int(istate[6])
    time = float(fstate[0])
    tstar_time = float(fstate[1])
    max_probe_increment = float(fstate[2])

    old_probe = [0.0] * n_probes
    rec_u_l = [0] * chunk if rec_on else None
    rec_v_l = [0] * chunk if rec_on else None
    rec_flag_l = [0] * chunk if rec_on else None
    rec_time_l = [0.0] * chunk if rec_on else None
    rec_jump_l = [0.0] * chunk if rec_on else None
    rec_probe_l = [[0.0] * n_probes for _ in range(chunk)] if rec_on else None

    consumed = 0
    absorbed = False
    for k in range(chunk):
        eid = ebuf[k]
        time += tbuf[k]
        event_count += 1
        consumed = k + 1
        u = eu[eid]
        v = ev[eid]
        dval = dist_l[eid]
        inter = dval <= tau
        jump = 0.0
        if inter:
            jump = mu * dval
            row_u = op[u]
            row_v = op[v]
            for pi in range(n_probes):
                old_probe[pi] = (_dist(row_u, pr[pi], d, norm_code, norm_p)
                                 + _dist(row_v, pr[pi], d, norm_code, norm_p))
            for c in range(d):
                delta = mu * (row_v[c] - row_u[c])
                row_u[c] += delta
                row_v[c] -= delta
            if _outside_space(row_u, d, norm_code, norm_p, shape_code, sa, sb, shape_r, member_tol):
                membership_violations += 1
            if _outside_space(row_v, d, norm_code, norm_p, shape_code, sa, sb, shape_r, member_tol):
                membership_violations += 1
            for pi in range(n_probes):
                new_val = (_dist(row_u, pr[pi], d, norm_code, norm_p)
                           + _dist(row_v, pr[pi], d, norm_code, norm_p))
                inc = new_val - old_probe[pi]
                px[pi] += inc
                if inc > max_probe_increment:
                    max_probe_increment = inc
                if inc > mono_tol:
                    probe_increase_count += 1
            # only edges touching u or v can change class; the stamp keeps
            # the shared edge (u, v) from being processed twice
            for endpoint in (u, v):
                for idx in range(indptr[endpoint], indptr[endpoint + 1]):
                    e2 = eids[idx]
                    if stamp_l[e2] == event_count:
                        continue
                    stamp_l[e2] = event_count
                    d2 = _dist(op[eu[e2]], op[ev[e2]], d, norm_code, norm_p)
                    dist_l[e2] = d2
                    now_active = 1 if (eps_stop <= d2 <= tau) else 0
                    if now_active != act_l[e2]:
                        active_count += now_active - act_l[e2]
                        act_l[e2] = now_active
                    now_mid = 1 if (half_tau <= d2 <= tau) else 0
                    if now_mid != mid_l[e2]:
                        mid_count += now_mid - mid_l[e2]
                        mid_l[e2] = now_mid
        if rec_on:
            rec_u_l[k] = u
            rec_v_l[k] = v
            rec_flag_l[k] = 1 if inter else 0
            rec_time_l[k] = time
            rec_jump_l[k] = jump
            row = rec_probe_l[k]
            for pi in range(n_probes):
                row[pi] = px[pi]
        if inter and not tstar_found and mid_count == 0:
            clear = True
            for i in range(n):
                row_i = op[i]
                for j in range(i + 1, n):
                    dij = _dist(row_i, op[j], d, norm_code, norm_p)
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
                    row_i = op[i]
                    for c in range(d):
                        tstar_snapshot[i, c] = row_i[c]
        if active_count == 0:
            absorbed = True
            break

    opinions[:] = op
    stamp[:] = stamp_l
    edge_dist[:] = dist_l
    is_active[:] = act_l
    is_mid[:] = mid_l
    if n_probes:
        probe_x[:] = px
    if rec_on:
        rec_u[:consumed] = rec_u_l[:consumed]
        rec_v[:consumed] = rec_v_l[:consumed]
        rec_flag[:consumed] = rec_flag_l[:consumed]
        rec_time[:consumed] = rec_time_l[:consumed]
        rec_jump[:consumed] = rec_jump_l[:consumed]
        for k in range(consumed):
            row = rec_probe_l[k]
            for pi in range(n_probes):
                rec_probe[k, pi] = row[pi]

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
    return consumed, absorbed
