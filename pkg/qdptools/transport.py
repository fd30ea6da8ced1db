#
# Copyright 2026 The qdptools developers
#
#    This file is part of qdptools.
#
#    qdptools is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    qdptools is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with qdptools.  If not, see <https://www.gnu.org/licenses/>.
#
import collections
import numpy as np


class TransportResult():
    """Optimal plan of a transportation problem.

    Attributes:
        plan: Full-size transport plan, rows are sources.
        cost: Optimal total cost.
        u, v: Dual potentials of the nonzero-mass rows and columns.
        rows, cols: Indices of the nonzero-mass rows and columns.
        iterations: Number of simplex pivots.
    """
    def __init__(self, plan, cost, u, v, rows, cols, iterations):
        self.plan = plan
        self.cost = cost
        self.u = u
        self.v = v
        self.rows = rows
        self.cols = cols
        self.iterations = iterations


def hamming_cost(n_bits):
    """Hamming distances between all pairs of n_bits bitstrings."""
    idx = np.arange(2**n_bits)
    diff = idx[:, None] ^ idx[None, :]
    cost = np.zeros_like(diff)
    for b in range(n_bits):
        cost += (diff >> b) & 1
    return cost


def _vogel(supply, demand, cost):
    """Vogel's approximation; crosses out one line per allocation so the
    result is a spanning tree of m+n-1 basic cells."""
    m, n = cost.shape
    supply = supply.copy()
    demand = demand.copy()
    row_on = np.ones(m, dtype=bool)
    col_on = np.ones(n, dtype=bool)
    x = np.zeros((m, n))
    basis = []

    def allocate(i, j):
        q = min(supply[i], demand[j])
        x[i, j] = q
        supply[i] -= q
        demand[j] -= q
        basis.append((i, j))
        return q

    while row_on.sum() > 1 and col_on.sum() > 1:
        best = None
        for i in np.flatnonzero(row_on):
            c = np.sort(cost[i, col_on])
            pen = c[1] - c[0]
            if best is None or pen > best[0]:
                best = (pen, 'row', i)
        for j in np.flatnonzero(col_on):
            c = np.sort(cost[row_on, j])
            pen = c[1] - c[0]
            if pen > best[0]:
                best = (pen, 'col', j)
        pen, kind, line = best
        if kind == 'row':
            i = line
            cols = np.flatnonzero(col_on)
            j = cols[np.argmin(cost[i, cols])]
        else:
            j = line
            rows = np.flatnonzero(row_on)
            i = rows[np.argmin(cost[rows, j])]
        if supply[i] <= demand[j]:
            allocate(i, j)
            supply[i] = 0.0
            row_on[i] = False
        else:
            allocate(i, j)
            demand[j] = 0.0
            col_on[j] = False

    # a single row or column remains; it takes every remaining cell
    for i in np.flatnonzero(row_on):
        for j in np.flatnonzero(col_on):
            allocate(i, j)
    return x, basis


def _tree_adjacency(basis, m):
    adj = collections.defaultdict(list)
    for i, j in basis:
        adj[i].append((m + j, (i, j)))
        adj[m + j].append((i, (i, j)))
    return adj


def _potentials(basis, cost, m, n):
    adj = _tree_adjacency(basis, m)
    pot = np.full(m + n, np.nan)
    pot[0] = 0.0
    queue = collections.deque([0])
    while queue:
        node = queue.popleft()
        for nxt, (i, j) in adj[node]:
            if np.isnan(pot[nxt]):
                # u_i + v_j = c_ij on basic cells
                pot[nxt] = cost[i, j] - pot[node]
                queue.append(nxt)
    if np.any(np.isnan(pot)):
        raise RuntimeError('transport_simplex: basis is not a spanning tree')
    return pot[:m], pot[m:]


def _tree_path(basis, m, start, goal):
    """Cells on the tree path from node start to node goal."""
    adj = _tree_adjacency(basis, m)
    parent = {start: None}
    queue = collections.deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nxt, cell in adj[node]:
            if nxt not in parent:
                parent[nxt] = (node, cell)
                queue.append(nxt)
    path = []
    node = goal
    while parent[node] is not None:
        node, cell = parent[node]
        path.append(cell)
    return path[::-1]


def transport_simplex(supply, demand, cost, max_iter=10000):
    """Solve min sum c_ij x_ij over couplings of supply and demand.

    Vogel's approximation starts the MODI transportation simplex; the
    entering cell is the first negative reduced cost in row-major order and
    the leaving cell the lowest-index tie. Optimality is confirmed by
    complementary slackness and a zero duality gap.

    Args:
        supply: Source masses.
        demand: Sink masses, same total as supply within 1e-9.
        cost: len(supply) x len(demand) ground cost.
        max_iter (optional): Pivot limit. Defaults to 10000.

    Returns:
        TransportResult.
    """
    a = np.asarray(supply, dtype=float).ravel()
    b = np.asarray(demand, dtype=float).ravel()
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (a.size, b.size):
        raise ValueError('transport_simplex: cost shape mismatch ',
                         (cost.shape, a.size, b.size))
    if np.any(a < -1e-12) or np.any(b < -1e-12):
        raise ValueError('transport_simplex: negative mass')
    if abs(a.sum() - b.sum()) > 1e-9:
        raise ValueError('transport_simplex: mass mismatch ',
                         a.sum() - b.sum())
    rows = np.flatnonzero(a > 0)
    cols = np.flatnonzero(b > 0)
    plan = np.zeros((a.size, b.size))
    if rows.size == 0 or cols.size == 0:
        return TransportResult(plan, 0.0, np.zeros(0), np.zeros(0), rows,
                               cols, 0)
    sa = a[rows]
    sb = b[cols]*(sa.sum()/b[cols].sum())
    c = cost[np.ix_(rows, cols)]
    m, n = c.shape
    tol = 1e-12*max(1.0, np.max(np.abs(c)))

    x, basis = _vogel(sa, sb, c)
    in_basis = set(basis)
    iterations = 0
    while True:
        u, v = _potentials(basis, c, m, n)
        reduced = c - u[:, None] - v[None, :]
        entering = None
        for i, j in zip(*np.nonzero(reduced < -tol)):
            if (i, j) not in in_basis:
                entering = (int(i), int(j))
                break
        if entering is None:
            break
        if iterations >= max_iter:
            raise RuntimeError('transport_simplex: no convergence after ',
                               max_iter)
        i, j = entering
        path = _tree_path(basis, m, i, m + j)
        minus = path[0::2]
        plus = path[1::2]
        theta = min(x[cell] for cell in minus)
        leaving = min(cell for cell in minus if x[cell] <= theta)
        for cell in plus:
            x[cell] += theta
        for cell in minus:
            x[cell] -= theta
        x[entering] += theta
        x[leaving] = 0.0
        basis.remove(leaving)
        in_basis.discard(leaving)
        basis.append(entering)
        in_basis.add(entering)
        iterations += 1

    x = np.clip(x, 0.0, None)
    primal = float(np.sum(x*c))
    dual = float(sa @ u + sb @ v)
    if abs(primal - dual) > 1e-9*max(1.0, abs(primal)):
        raise RuntimeError('transport_simplex: duality gap ', primal - dual)
    plan[np.ix_(rows, cols)] = x
    return TransportResult(plan, primal, u, v, rows, cols, iterations)
