"""Pure-numpy transportation simplex kernel (fallback backend).

Solves min <C, X> subject to row sums a and column sums b, X >= 0, by the
classical transportation simplex: north-west-corner start, MODI (dual)
pricing with a cyclic block search, and a switch to Bland's smallest-index
rule after a long run of degenerate pivots to rule out cycling.

The compiled backend in ``snotlab._simplex`` implements the same algorithm;
``snotlab.discrete_ot`` selects whichever is importable.  Both return the
full basis (N + M - 1 cells, including degenerate zero-flow cells), the
dual potentials, and the pivot count.
"""

from __future__ import annotations

import numpy as np

from .errors import SolverStall

# consecutive degenerate pivots tolerated before switching to Bland's rule
_DEGENERATE_RUN_LIMIT = 512


def _nw_corner(a: np.ndarray, b: np.ndarray):
    n, m = len(a), len(b)
    k_total = n + m - 1
    bi = np.empty(k_total, dtype=np.int64)
    bj = np.empty(k_total, dtype=np.int64)
    flow = np.empty(k_total, dtype=np.float64)
    i = j = 0
    ra, rb = a[0], b[0]
    for k in range(k_total):
        t = min(ra, rb)
        bi[k], bj[k], flow[k] = i, j, t
        ra -= t
        rb -= t
        if k == k_total - 1:
            break
        # on ties, advancing the row first inserts the degenerate cell needed
        # to keep the basis a spanning tree
        if ra <= 0.0 and i < n - 1:
            i += 1
            ra = a[i]
        else:
            j += 1
            rb = b[j] if j < m else 0.0
    return bi, bj, flow


def _tree_arrays(bi, bj, n, m):
    """Parent/depth/parent-arc arrays for the basis tree, rooted at node 0."""
    n_nodes = n + m
    heads = [[] for _ in range(n_nodes)]
    for slot in range(len(bi)):
        heads[bi[slot]].append(slot)
        heads[n + bj[slot]].append(slot)
    parent = np.full(n_nodes, -1, dtype=np.int64)
    parent_arc = np.full(n_nodes, -1, dtype=np.int64)
    depth = np.zeros(n_nodes, dtype=np.int64)
    order = np.empty(n_nodes, dtype=np.int64)
    seen = np.zeros(n_nodes, dtype=bool)
    seen[0] = True
    order[0] = 0
    count = 1
    ptr = 0
    while ptr < count:
        node = order[ptr]
        ptr += 1
        for slot in heads[node]:
            other = n + bj[slot] if node < n else bi[slot]
            if not seen[other]:
                seen[other] = True
                parent[other] = node
                parent_arc[other] = slot
                depth[other] = depth[node] + 1
                order[count] = other
                count += 1
    if count != n_nodes:
        raise SolverStall("basis lost connectivity")
    return parent, parent_arc, depth, order


def _duals_from_tree(bi, bj, C, parent, parent_arc, order, n):
    pot = np.empty(n + C.shape[1], dtype=np.float64)
    pot[0] = 0.0
    for idx in range(1, len(order)):
        node = order[idx]
        slot = parent_arc[node]
        c = C[bi[slot], bj[slot]]
        pot[node] = c - pot[parent[node]]
    return pot


def _cycle(parent, parent_arc, depth, ei, cj):
    """Basis-arc slots on the tree path from row node ei to column node cj."""
    arcs_a = []
    arcs_b = []
    pa, pb = ei, cj
    while depth[pa] > depth[pb]:
        arcs_a.append(parent_arc[pa])
        pa = parent[pa]
    while depth[pb] > depth[pa]:
        arcs_b.append(parent_arc[pb])
        pb = parent[pb]
    while pa != pb:
        arcs_a.append(parent_arc[pa])
        pa = parent[pa]
        arcs_b.append(parent_arc[pb])
        pb = parent[pb]
    arcs_b.reverse()
    return arcs_a + arcs_b


def solve_transport(C, a, b, tol: float | None = None, max_pivots: int | None = None):
    """Run the transportation simplex.

    Returns ``(basis_i, basis_j, flow, u, v, n_pivots)`` where the basis has
    exactly N + M - 1 cells (zero-flow cells included) and ``u``/``v`` are the
    row/column duals with ``u[i] + v[j] == C[i, j]`` on basic cells.
    """
    C = np.ascontiguousarray(C, dtype=np.float64)
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    n, m = C.shape
    if tol is None:
        tol = 1e-11 * (1.0 + float(np.abs(C).max()))
    if max_pivots is None:
        max_pivots = 200 * (n + m) + 10_000

    bi, bj, flow = _nw_corner(a, b)
    parent, parent_arc, depth, order = _tree_arrays(bi, bj, n, m)
    pot = _duals_from_tree(bi, bj, C, parent, parent_arc, order, n)

    block_rows = max(1, 8192 // m)
    row_cursor = 0
    degenerate_run = 0
    bland = False
    pivots = 0

    while True:
        u = pot[:n]
        v = pot[n:]
        enter = None
        if bland:
            for i in range(n):
                rc = C[i] - u[i] - v
                idx = np.flatnonzero(rc < -tol)
                if idx.size:
                    enter = (i, int(idx[0]))
                    break
        else:
            # cyclic block search: most negative reduced cost within the
            # first block that contains any candidate
            for _ in range(0, n, block_rows):
                r0 = row_cursor
                r1 = min(r0 + block_rows, n)
                rc = C[r0:r1] - u[r0:r1, None] - v[None, :]
                flat = np.argmin(rc)
                if rc.flat[flat] < -tol:
                    enter = (r0 + flat // m, int(flat % m))
                    break
                row_cursor = r1 % n
            else:
                enter = None
        if enter is None and not bland:
            # one exhaustive confirmation sweep before declaring optimality
            rc_full = C - u[:, None] - v[None, :]
            flat = np.argmin(rc_full)
            if rc_full.flat[flat] < -tol:
                enter = (int(flat // m), int(flat % m))
        if enter is None:
            return bi, bj, flow, pot[:n].copy(), pot[n:].copy(), pivots

        ei, ej = enter
        cycle = _cycle(parent, parent_arc, depth, ei, n + ej)
        minus_slots = cycle[0::2]
        minus_flows = flow[minus_slots]
        theta = minus_flows.min()
        # smallest slot index among ties (Bland-compatible leaving rule)
        leave_pos = min(s for s, f in zip(minus_slots, minus_flows) if f <= theta)

        flow[minus_slots] = np.maximum(minus_flows - theta, 0.0)
        flow[cycle[1::2]] += theta
        bi[leave_pos] = ei
        bj[leave_pos] = ej
        flow[leave_pos] = theta

        pivots += 1
        if pivots > max_pivots:
            raise SolverStall(f"pivot cap {max_pivots} exceeded")
        if theta <= 0.0:
            degenerate_run += 1
            if degenerate_run > _DEGENERATE_RUN_LIMIT:
                bland = True
        else:
            degenerate_run = 0
            bland = False

        parent, parent_arc, depth, order = _tree_arrays(bi, bj, n, m)
        pot = _duals_from_tree(bi, bj, C, parent, parent_arc, order, n)
