"""Exact discrete optimal transport via the transportation simplex.

The basis is a spanning tree of ``n + m - 1`` cells over the bipartite
row/column graph. Pricing is Dantzig (most negative reduced cost); during a run
of degenerate pivots both the entering and leaving choices switch to Bland's
smallest-index rule, which rules out cycling.
"""
from __future__ import annotations

from collections import deque

import numpy as np

from ..errors import SemotError, TooLarge
from .plan import TransportPlan, check_problem, plan_cost

MAX_SIDE = 256


def _least_cost_basis(c, a, b):
    """Initial basic feasible solution by the least-cost rule.

    Every allocation retires exactly one row or column (the final one retires
    both), so the ``n + m - 1`` cells form a tree even under degeneracy.
    """
    n, m = c.shape
    ra, rb = a.copy(), b.copy()
    row_alive = np.ones(n, dtype=bool)
    col_alive = np.ones(m, dtype=bool)
    rows_left, cols_left = n, m
    flows = {}
    for flat in np.argsort(c, axis=None, kind="stable"):
        i, j = divmod(int(flat), m)
        if not (row_alive[i] and col_alive[j]):
            continue
        x = min(ra[i], rb[j])
        flows[(i, j)] = x
        ra[i] -= x
        rb[j] -= x
        if rows_left == 1 and cols_left == 1:
            break
        if (ra[i] <= rb[j] and rows_left > 1) or cols_left == 1:
            row_alive[i] = False
            rows_left -= 1
            rb[j] += ra[i]
            ra[i] = 0.0
        else:
            col_alive[j] = False
            cols_left -= 1
            ra[i] += rb[j]
            rb[j] = 0.0
    return flows


def _potentials(c, n, m, row_adj, col_adj):
    u = np.zeros(n)
    v = np.zeros(m)
    seen_r = np.zeros(n, dtype=bool)
    seen_c = np.zeros(m, dtype=bool)
    seen_r[0] = True
    queue = deque([(0, 0)])  # (is_col, index)
    while queue:
        is_col, k = queue.popleft()
        if is_col:
            for i in col_adj[k]:
                if not seen_r[i]:
                    seen_r[i] = True
                    u[i] = c[i, k] - v[k]
                    queue.append((0, i))
        else:
            for j in row_adj[k]:
                if not seen_c[j]:
                    seen_c[j] = True
                    v[j] = c[k, j] - u[k]
                    queue.append((1, j))
    if not (seen_r.all() and seen_c.all()):
        raise SemotError("transportation basis is not a spanning tree")
    return u, v


def _tree_path(i0, j0, row_adj, col_adj):
    """Cells on the tree path from row ``i0`` to column ``j0``, in order."""
    parent = {(0, i0): None}
    queue = deque([(0, i0)])
    target = (1, j0)
    while queue:
        node = queue.popleft()
        if node == target:
            break
        is_col, k = node
        nbrs = ((0, i) for i in col_adj[k]) if is_col else ((1, j) for j in row_adj[k])
        for nb in nbrs:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    cells = []
    node = target
    while parent[node] is not None:
        prev = parent[node]
        if node[0]:
            cells.append((prev[1], node[1]))
        else:
            cells.append((node[1], prev[1]))
        node = prev
    cells.reverse()
    return cells


def exact_ot(c, a, b, max_pivots: int | None = None) -> TransportPlan:
    """Optimal coupling of the transportation LP ``min <P, C>`` s.t. ``P1 = a, P'1 = b``."""
    c, a, b = check_problem(c, a, b)
    n, m = c.shape
    if min(n, m) > MAX_SIDE:
        raise TooLarge(f"exact solver handles min(n, m) <= {MAX_SIDE}, got {min(n, m)}")
    b = b * (a.sum() / b.sum())
    flows = _least_cost_basis(c, a, b)
    row_adj = [set() for _ in range(n)]
    col_adj = [set() for _ in range(m)]
    for i, j in flows:
        row_adj[i].add(j)
        col_adj[j].add(i)

    tol = 1e-12 * max(1.0, float(np.abs(c).max()))
    if max_pivots is None:
        max_pivots = 50 * (n + m) * max(n, m) + 1000
    bland = False
    pivots = 0
    while True:
        u, v = _potentials(c, n, m, row_adj, col_adj)
        reduced = c - u[:, None] - v[None, :]
        if bland:
            (neg,) = np.nonzero(reduced.ravel() < -tol)
            if neg.size == 0:
                break
            flat = int(neg[0])
        else:
            flat = int(np.argmin(reduced))
            if reduced.flat[flat] >= -tol:
                break
        ei, ej = divmod(flat, m)
        path = _tree_path(ei, ej, row_adj, col_adj)
        minus = path[0::2]
        theta = min(flows[cell] for cell in minus)
        leaving = min(cell for cell in minus if flows[cell] == theta)
        flows[(ei, ej)] = theta
        for k, cell in enumerate(path):
            flows[cell] += -theta if k % 2 == 0 else theta
        del flows[leaving]
        row_adj[leaving[0]].discard(leaving[1])
        col_adj[leaving[1]].discard(leaving[0])
        row_adj[ei].add(ej)
        col_adj[ej].add(ei)
        bland = theta == 0.0
        pivots += 1
        if pivots > max_pivots:
            raise SemotError("transportation simplex exceeded its pivot budget")

    coupling = np.zeros((n, m))
    for (i, j), x in flows.items():
        coupling[i, j] = max(x, 0.0)
    basis = tuple(sorted(flows))
    return TransportPlan(coupling, a, b, plan_cost(coupling, c), iterations=pivots, basis=basis)
