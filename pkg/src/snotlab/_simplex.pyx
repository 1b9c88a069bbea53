# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled transportation-simplex kernel.

Same algorithm and return contract as ``snotlab._simplex_py`` (north-west
corner start, block pricing with most-negative-in-block selection, Bland's
rule after long degenerate runs), but with an incrementally maintained
basis tree: each pivot re-hangs the cut subtree and shifts its dual
potentials by the entering arc's reduced cost instead of recomputing the
tree from scratch.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

from .errors import SolverStall

cnp.import_array()

DEF DEGENERATE_RUN_LIMIT = 512


cdef inline void _attach(int v, int p, int arc, int[::1] parent, int[::1] parent_arc,
                         int[::1] first_child, int[::1] next_sib, int[::1] prev_sib) noexcept nogil:
    parent[v] = p
    parent_arc[v] = arc
    next_sib[v] = first_child[p]
    if first_child[p] != -1:
        prev_sib[first_child[p]] = v
    prev_sib[v] = -1
    first_child[p] = v


cdef inline void _detach(int v, int[::1] parent, int[::1] first_child,
                         int[::1] next_sib, int[::1] prev_sib) noexcept nogil:
    cdef int p = parent[v]
    if prev_sib[v] == -1:
        first_child[p] = next_sib[v]
    else:
        next_sib[prev_sib[v]] = next_sib[v]
    if next_sib[v] != -1:
        prev_sib[next_sib[v]] = prev_sib[v]


cdef int _nw_corner(double[::1] a, double[::1] b, int n, int m,
                    int[::1] bi, int[::1] bj, double[::1] flow) noexcept nogil:
    cdef int i = 0, j = 0, k
    cdef int K = n + m - 1
    cdef double ra = a[0], rb = b[0], t
    for k in range(K):
        t = ra if ra < rb else rb
        bi[k] = i
        bj[k] = j
        flow[k] = t
        ra -= t
        rb -= t
        if k == K - 1:
            break
        if ra <= 0.0 and i < n - 1:
            i += 1
            ra = a[i]
        else:
            j += 1
            rb = b[j] if j < m else 0.0
    return 0


cdef int _build_tree(int[::1] bi, int[::1] bj, int n, int m, double[:, ::1] C,
                     int[::1] parent, int[::1] parent_arc, int[::1] depth,
                     int[::1] first_child, int[::1] next_sib, int[::1] prev_sib,
                     int[::1] head, int[::1] nxt, int[::1] stack,
                     double[::1] pot) noexcept nogil:
    """Full tree/dual construction from the basis arc list.  Returns the
    number of reached nodes (== n + m iff the basis is a spanning tree)."""
    cdef int n_nodes = n + m
    cdef int K = n + m - 1
    cdef int s, e, node, other, slot, sp, count

    for node in range(n_nodes):
        head[node] = -1
        first_child[node] = -1
        parent[node] = -2
        next_sib[node] = -1
        prev_sib[node] = -1
    for s in range(K):
        e = 2 * s
        nxt[e] = head[bi[s]]
        head[bi[s]] = e
        e = 2 * s + 1
        nxt[e] = head[n + bj[s]]
        head[n + bj[s]] = e

    parent[0] = -1
    parent_arc[0] = -1
    depth[0] = 0
    pot[0] = 0.0
    stack[0] = 0
    sp = 1
    count = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        e = head[node]
        while e != -1:
            slot = e >> 1
            other = (n + bj[slot]) if node < n else bi[slot]
            if parent[other] == -2:
                depth[other] = depth[node] + 1
                pot[other] = C[bi[slot], bj[slot]] - pot[node]
                _attach(other, node, slot, parent, parent_arc,
                        first_child, next_sib, prev_sib)
                stack[sp] = other
                sp += 1
                count += 1
            e = nxt[e]
    return count


cdef long _pivot_loop(double[::1] Cf, int n, int m,
                      int[::1] bi, int[::1] bj, double[::1] flow,
                      int[::1] parent, int[::1] parent_arc, int[::1] depth,
                      int[::1] first_child, int[::1] next_sib, int[::1] prev_sib,
                      int[::1] stack, int[::1] cyc_a, int[::1] cyc_b,
                      int[::1] node_a, int[::1] node_b,
                      double[::1] pot, double tol, long max_pivots) noexcept nogil:
    """Returns the pivot count, or -1 if the pivot cap was exceeded."""
    cdef long A = (<long>n) * (<long>m)
    cdef long blk = <long>sqrt(<double>A)
    cdef long cursor = 0, scanned, r1, pos, ebest
    cdef long pivots = 0
    cdef int degenerate_run = 0
    cdef bint bland = False
    cdef int i, j, ei, ej, pa, pb, na, nb, t, s, slot, total
    cdef int leave_slot, t_leave, e1, e2, z_len, idx, cur, nxt_node, nxt_arc
    cdef int prev_node, prev_arc, sp, node, child
    cdef double rc, best, ui, theta, f, d_row, d_col, rc_enter

    if blk < 256:
        blk = 256
    if blk > A:
        blk = A

    while True:
        # ---- pricing ----
        ebest = -1
        best = -tol
        if bland:
            pos = 0
            i = 0
            j = 0
            ui = pot[0]
            while pos < A:
                rc = Cf[pos] - ui - pot[n + j]
                if rc < -tol:
                    ebest = pos
                    break
                pos += 1
                j += 1
                if j == m:
                    j = 0
                    i += 1
                    if i < n:
                        ui = pot[i]
        else:
            scanned = 0
            while scanned < A:
                r1 = cursor + blk
                if r1 > A:
                    r1 = A
                pos = cursor
                i = <int>(pos / m)
                j = <int>(pos - (<long>i) * m)
                ui = pot[i]
                while pos < r1:
                    rc = Cf[pos] - ui - pot[n + j]
                    if rc < best:
                        best = rc
                        ebest = pos
                    pos += 1
                    j += 1
                    if j == m:
                        j = 0
                        i += 1
                        if i < n:
                            ui = pot[i]
                scanned += r1 - cursor
                cursor = 0 if r1 == A else r1
                if ebest >= 0:
                    break
        if ebest < 0:
            return pivots

        ei = <int>(ebest / m)
        ej = <int>(ebest - (<long>ei) * m)
        rc_enter = Cf[ebest] - pot[ei] - pot[n + ej]

        # ---- cycle between row node ei and column node n+ej ----
        pa = ei
        pb = n + ej
        na = 0
        nb = 0
        while depth[pa] > depth[pb]:
            node_a[na] = pa
            cyc_a[na] = parent_arc[pa]
            na += 1
            pa = parent[pa]
        while depth[pb] > depth[pa]:
            node_b[nb] = pb
            cyc_b[nb] = parent_arc[pb]
            nb += 1
            pb = parent[pb]
        while pa != pb:
            node_a[na] = pa
            cyc_a[na] = parent_arc[pa]
            na += 1
            pa = parent[pa]
            node_b[nb] = pb
            cyc_b[nb] = parent_arc[pb]
            nb += 1
            pb = parent[pb]
        total = na + nb

        # ---- leaving arc: min flow on even (reverse) positions ----
        theta = INFINITY
        leave_slot = -1
        t_leave = -1
        for t in range(0, total, 2):
            slot = cyc_a[t] if t < na else cyc_b[total - 1 - t]
            f = flow[slot]
            if f < theta or (f == theta and slot < leave_slot):
                theta = f
                leave_slot = slot
                t_leave = t

        # ---- apply flow change ----
        for t in range(total):
            slot = cyc_a[t] if t < na else cyc_b[total - 1 - t]
            if t % 2 == 0:
                flow[slot] -= theta
                if flow[slot] < 0.0:
                    flow[slot] = 0.0
            else:
                flow[slot] += theta

        # ---- basis exchange: entering cell reuses the leaving slot ----
        bi[leave_slot] = ei
        bj[leave_slot] = ej
        flow[leave_slot] = theta

        # ---- re-hang the cut subtree ----
        if t_leave < na:
            e2 = ei
            e1 = n + ej
            z_len = t_leave  # chain node_a[0..t_leave]
        else:
            e2 = n + ej
            e1 = ei
            z_len = total - 1 - t_leave  # chain node_b[0..z_len]
        prev_node = e1
        prev_arc = leave_slot
        for idx in range(z_len + 1):
            cur = node_a[idx] if t_leave < na else node_b[idx]
            nxt_arc = parent_arc[cur]
            _detach(cur, parent, first_child, next_sib, prev_sib)
            _attach(cur, prev_node, prev_arc, parent, parent_arc,
                    first_child, next_sib, prev_sib)
            prev_node = cur
            prev_arc = nxt_arc

        # ---- refresh depth/potential on the re-hung subtree ----
        if e2 < n:
            d_row = rc_enter
            d_col = -rc_enter
        else:
            d_row = -rc_enter
            d_col = rc_enter
        stack[0] = e2
        sp = 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            depth[node] = depth[parent[node]] + 1
            if node < n:
                pot[node] += d_row
            else:
                pot[node] += d_col
            child = first_child[node]
            while child != -1:
                stack[sp] = child
                sp += 1
                child = next_sib[child]

        pivots += 1
        if pivots > max_pivots:
            return -1
        if theta <= 0.0:
            degenerate_run += 1
            if degenerate_run > DEGENERATE_RUN_LIMIT:
                bland = True
        else:
            degenerate_run = 0
            bland = False


def solve_transport(C_in, a_in, b_in, tol=None, max_pivots=None):
    """Run the transportation simplex on dense data.

    Returns ``(basis_i, basis_j, flow, u, v, n_pivots)``; the basis includes
    degenerate zero-flow cells so it always has N + M - 1 entries.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] C = np.ascontiguousarray(C_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef int n = C.shape[0]
    cdef int m = C.shape[1]
    cdef int n_nodes = n + m
    cdef int K = n + m - 1
    cdef double tol_c
    cdef long cap

    if tol is None:
        tol_c = 1e-11 * (1.0 + float(np.abs(C).max()))
    else:
        tol_c = float(tol)
    if max_pivots is None:
        cap = 200 * (<long>n_nodes) + 10_000
    else:
        cap = int(max_pivots)

    bi_arr = np.empty(K, dtype=np.int32)
    bj_arr = np.empty(K, dtype=np.int32)
    flow_arr = np.empty(K, dtype=np.float64)

    cdef int[::1] bi = bi_arr
    cdef int[::1] bj = bj_arr
    cdef double[::1] flow = flow_arr
    cdef double[::1] a_v = a
    cdef double[::1] b_v = b
    cdef double[:, ::1] C_v = C
    cdef double[::1] Cf = C.ravel()
    cdef int[::1] parent = np.empty(n_nodes, dtype=np.int32)
    cdef int[::1] parent_arc = np.empty(n_nodes, dtype=np.int32)
    cdef int[::1] depth = np.empty(n_nodes, dtype=np.int32)
    cdef int[::1] first_child = np.empty(n_nodes, dtype=np.int32)
    cdef int[::1] next_sib = np.empty(n_nodes, dtype=np.int32)
    cdef int[::1] prev_sib = np.empty(n_nodes, dtype=np.int32)
    cdef int[::1] head = np.empty(n_nodes, dtype=np.int32)
    cdef int[::1] nxt = np.empty(2 * K, dtype=np.int32)
    cdef int[::1] stack = np.empty(n_nodes + 1, dtype=np.int32)
    cdef int[::1] cyc_a = np.empty(n_nodes + 1, dtype=np.int32)
    cdef int[::1] cyc_b = np.empty(n_nodes + 1, dtype=np.int32)
    cdef int[::1] node_a = np.empty(n_nodes + 1, dtype=np.int32)
    cdef int[::1] node_b = np.empty(n_nodes + 1, dtype=np.int32)
    cdef double[::1] pot = np.empty(n_nodes, dtype=np.float64)
    cdef long pivots
    cdef int reached

    with nogil:
        _nw_corner(a_v, b_v, n, m, bi, bj, flow)
        reached = _build_tree(bi, bj, n, m, C_v, parent, parent_arc, depth,
                              first_child, next_sib, prev_sib, head, nxt,
                              stack, pot)
    if reached != n_nodes:
        raise SolverStall("initial basis lost connectivity")
    with nogil:
        pivots = _pivot_loop(Cf, n, m, bi, bj, flow,
                             parent, parent_arc, depth,
                             first_child, next_sib, prev_sib,
                             stack, cyc_a, cyc_b, node_a, node_b,
                             pot, tol_c, cap)
    if pivots < 0:
        raise SolverStall(f"pivot cap {cap} exceeded")

    # exact dual recomputation from the final tree (drops incremental drift)
    with nogil:
        reached = _build_tree(bi, bj, n, m, C_v, parent, parent_arc, depth,
                              first_child, next_sib, prev_sib, head, nxt,
                              stack, pot)
    if reached != n_nodes:
        raise SolverStall("final basis lost connectivity")

    pot_arr = np.asarray(pot)
    return (
        bi_arr.astype(np.int64),
        bj_arr.astype(np.int64),
        flow_arr,
        pot_arr[:n].copy(),
        pot_arr[n:].copy(),
        int(pivots),
    )
