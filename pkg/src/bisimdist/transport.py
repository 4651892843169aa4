"""Transportation problems, couplings and coupling structures.

The solver is the classical transportation simplex: a northwest-corner basic
feasible solution, MODI potentials for pricing and stepping-stone pivots along
the cycle closed by the entering cell.  Entering and leaving cells follow
Bland's smallest-index rule, so degenerate bases (kept as explicit zero basic
cells) cannot cycle.  Every returned flow is a vertex of the transportation
polytope.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

MARGINAL_TOL = 1e-9
REDUCED_COST_TOL = 1e-9
_ZERO = 1e-15


class CouplingError(ValueError):
    pass


class TransportSolution(NamedTuple):
    flow: np.ndarray
    value: float
    basis: list
    pivots: int


def _check_marginals(left, right):
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    if left.ndim != 1 or right.ndim != 1 or left.size == 0 or right.size == 0:
        raise ValueError("marginals must be non-empty vectors")
    if np.any(left < -MARGINAL_TOL) or np.any(right < -MARGINAL_TOL):
        raise ValueError("marginals must be non-negative")
    if abs(left.sum() - right.sum()) > MARGINAL_TOL:
        raise ValueError(f"marginal mismatch: {left.sum()!r} vs {right.sum()!r}")
    return np.clip(left, 0, None), np.clip(right, 0, None)


def northwest_corner(left, right):
    """Northwest-corner vertex of the transportation polytope.

    Returns ``(flow, basis)`` where ``basis`` lists the ``m + n - 1`` basic
    cells (a spanning tree of the row/column bipartite graph), zeros included.
    """
    a = np.array(left, dtype=float)
    b = np.array(right, dtype=float)
    m, n = a.size, b.size
    flow = np.zeros((m, n))
    basis = []
    i = j = 0
    while True:
        x = max(min(a[i], b[j]), 0.0)
        flow[i, j] = x
        basis.append((i, j))
        a[i] -= x
        b[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if i == m - 1:
            j += 1
        elif j == n - 1 or a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return flow, basis


def _potentials(cost, basis, m, n):
    rows = [[] for _ in range(m)]
    cols = [[] for _ in range(n)]
    for i, j in basis:
        rows[i].append(j)
        cols[j].append(i)
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    queue = deque([("r", 0)])
    while queue:
        kind, k = queue.popleft()
        if kind == "r":
            for j in rows[k]:
                if np.isnan(v[j]):
                    v[j] = cost[k, j] - u[k]
                    queue.append(("c", j))
        else:
            for i in cols[k]:
                if np.isnan(u[i]):
                    u[i] = cost[i, k] - v[k]
                    queue.append(("r", i))
    return u, v


def _tree_path(basis, m, start_row, end_col):
    """Basic cells on the tree path from row ``start_row`` to column ``end_col``."""
    adj = {}
    for i, j in basis:
        adj.setdefault(("r", i), []).append((("c", j), (i, j)))
        adj.setdefault(("c", j), []).append((("r", i), (i, j)))
    start, goal = ("r", start_row), ("c", end_col)
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nxt, cell in adj.get(node, ()):
            if nxt not in parent:
                parent[nxt] = (node, cell)
                queue.append(nxt)
    path = []
    node = goal
    while parent[node] is not None:
        node, cell = parent[node]
        path.append(cell)
    path.reverse()
    return path


def basis_from_flow(flow):
    """Spanning-tree basis containing the support of ``flow``, or None if the support has a cycle."""
    m, n = flow.shape
    parent = list(range(m + n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    basis = []
    support = list(zip(*np.nonzero(flow > 0)))
    for i, j in support:
        a, b = find(i), find(m + j)
        if a == b:
            return None
        parent[a] = b
        basis.append((int(i), int(j)))
    for i in range(m):
        for j in range(n):
            if len(basis) == m + n - 1:
                return basis
            a, b = find(i), find(m + j)
            if a != b:
                parent[a] = b
                basis.append((i, j))
    return basis


def solve_tp(cost, left, right, max_pivots=100_000, start=None):
    """Minimize ``sum(cost * flow)`` over couplings of ``left`` and ``right``.

    ``cost`` has shape ``(len(left), len(right))``.  Returns a
    :class:`TransportSolution` whose ``flow`` is an optimal vertex.  ``start``
    may give a vertex to begin from; otherwise the northwest corner is used.
    """
    left, right = _check_marginals(left, right)
    cost = np.asarray(cost, dtype=float)
    m, n = left.size, right.size
    if cost.shape != (m, n):
        raise ValueError(f"cost has shape {cost.shape}, expected {(m, n)}")

    basis = None
    if start is not None:
        flow = np.array(start, dtype=float)
        ok = (
            flow.shape == (m, n)
            and np.all(flow >= 0)
            and np.max(np.abs(flow.sum(axis=1) - left)) <= MARGINAL_TOL
            and np.max(np.abs(flow.sum(axis=0) - right)) <= MARGINAL_TOL
        )
        basis = basis_from_flow(flow) if ok else None
    if basis is None:
        flow, basis = northwest_corner(left, right)
    in_basis = np.zeros((m, n), dtype=bool)
    for cell in basis:
        in_basis[cell] = True

    pivots = 0
    while True:
        u, v = _potentials(cost, basis, m, n)
        reduced = cost - u[:, None] - v[None, :]
        reduced[in_basis] = 0.0
        candidates = np.flatnonzero(reduced.ravel() < -REDUCED_COST_TOL)
        if candidates.size == 0:
            break
        if pivots >= max_pivots:
            raise RuntimeError("transportation simplex did not converge")
        p, q = divmod(int(candidates[0]), n)

        path = _tree_path(basis, m, p, q)
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flow[c] for c in minus)
        leaving = min(c for c in minus if flow[c] <= theta + _ZERO)
        for c in minus:
            flow[c] -= theta
        for c in plus:
            flow[c] += theta
        flow[p, q] = theta
        flow[leaving] = 0.0
        basis[basis.index(leaving)] = (p, q)
        in_basis[leaving] = False
        in_basis[p, q] = True
        pivots += 1

    flow[np.abs(flow) < _ZERO] = 0.0
    flow = np.clip(flow, 0.0, None)
    return TransportSolution(flow, float(np.sum(cost * flow)), sorted(basis), pivots)


@dataclass(frozen=True, eq=False)
class Coupling:
    """Joint distribution on ``rows x cols`` (state indices) given by ``mass``."""

    rows: tuple
    cols: tuple
    mass: np.ndarray

    def __post_init__(self):
        mass = np.array(self.mass, dtype=float)
        if mass.shape != (len(self.rows), len(self.cols)):
            raise CouplingError(f"mass has shape {mass.shape}, expected {(len(self.rows), len(self.cols))}")
        mass.setflags(write=False)
        object.__setattr__(self, "rows", tuple(int(r) for r in self.rows))
        object.__setattr__(self, "cols", tuple(int(c) for c in self.cols))
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_dict(cls, entries):
        """Build from ``{(u, v): mass}`` over state indices."""
        rows = sorted({u for u, _ in entries})
        cols = sorted({v for _, v in entries})
        mass = np.zeros((len(rows), len(cols)))
        for (u, v), w in entries.items():
            mass[rows.index(u), cols.index(v)] += w
        return cls(tuple(rows), tuple(cols), mass)

    def cost(self, d):
        """Expected value of the distance matrix ``d`` under this coupling."""
        return float(np.sum(self.mass * np.asarray(d)[np.ix_(self.rows, self.cols)]))

    def items(self):
        """Positive-mass cells as ``((u, v), mass)``."""
        return self._items

    @cached_property
    def _items(self):
        a, b = np.nonzero(self.mass > 0)
        return tuple(((self.rows[i], self.cols[j]), float(self.mass[i, j])) for i, j in zip(a, b))

    def transpose(self):
        return Coupling(self.cols, self.rows, self.mass.T)

    def to_dict(self):
        return dict(self.items())

    def nonzero_count(self):
        return int(np.count_nonzero(self.mass > 0))

    def violations(self, mu_idx, mu, nu_idx, nu, tol=MARGINAL_TOL):
        """Invariant violations against marginals given as ``(indices, probs)``."""
        out = []
        if np.any(self.mass < 0):
            out.append("negative mass")
        row_sum = dict(zip(self.rows, self.mass.sum(axis=1)))
        col_sum = dict(zip(self.cols, self.mass.sum(axis=0)))
        want_rows = dict(zip((int(i) for i in mu_idx), mu))
        want_cols = dict(zip((int(i) for i in nu_idx), nu))
        for k in set(row_sum) | set(want_rows):
            if abs(row_sum.get(k, 0.0) - want_rows.get(k, 0.0)) > tol:
                out.append(f"row marginal mismatch at state {k}")
        for k in set(col_sum) | set(want_cols):
            if abs(col_sum.get(k, 0.0) - want_cols.get(k, 0.0)) > tol:
                out.append(f"column marginal mismatch at state {k}")
        return out

    def is_vertex(self):
        # Necessary support bound; the solver only ever produces basic solutions.
        return self.nonzero_count() <= len(self.rows) + len(self.cols) - 1


def pair_marginals(ctmc, s, t):
    return ctmc.support(s), ctmc.support(t)


def tp_for_pair(ctmc, d, s, t):
    """Transport problem for ``(tau(s), tau(t))`` with costs read from ``d``."""
    (ri, rp), (ci, cp) = pair_marginals(ctmc, s, t)
    return np.asarray(d)[np.ix_(ri, ci)], rp, cp, ri, ci


def optimal_coupling(ctmc, d, s, t):
    """Vertex-optimal coupling of ``(tau(s), tau(t))`` for costs ``d``; returns ``(coupling, value)``."""
    cost, rp, cp, ri, ci = tp_for_pair(ctmc, d, s, t)
    sol = solve_tp(cost, rp, cp)
    return Coupling(tuple(ri), tuple(ci), sol.flow), sol.value


def northwest_coupling(ctmc, s, t):
    (ri, rp), (ci, cp) = pair_marginals(ctmc, s, t)
    flow, _ = northwest_corner(rp, cp)
    return Coupling(tuple(ri), tuple(ci), flow)


def diagonal_coupling(ctmc, s):
    idx, p = ctmc.support(s)
    return Coupling(tuple(idx), tuple(idx), np.diag(p))


def is_optimal(cost, left, right, flow, tol=REDUCED_COST_TOL):
    """True iff ``flow`` costs at most the transport optimum plus ``tol``."""
    flow = np.asarray(flow, dtype=float)
    left, right = _check_marginals(left, right)
    if flow.shape != (left.size, right.size) or np.any(flow < -MARGINAL_TOL):
        raise CouplingError("flow is not a coupling of the given marginals")
    if np.max(np.abs(flow.sum(axis=1) - left)) > MARGINAL_TOL or np.max(np.abs(flow.sum(axis=0) - right)) > MARGINAL_TOL:
        raise CouplingError("flow is not a coupling of the given marginals")
    cost = np.asarray(cost, dtype=float)
    return float(np.sum(cost * flow)) <= solve_tp(cost, left, right).value + tol


class CouplingStructure:
    """Partial map from ordered non-absorbing state pairs to couplings.

    Lookups of ``(t, s)`` fall back to the transpose of a stored ``(s, t)``.
    Every stored coupling is checked against the pair's transition marginals.
    """

    def __init__(self, ctmc, entries=None):
        self.ctmc = ctmc
        self._entries = {}
        for pair, w in (entries or {}).items():
            self[pair] = w

    def _validated(self, pair, w):
        s, t = pair
        if self.ctmc.is_absorbing(s) or self.ctmc.is_absorbing(t):
            raise CouplingError(f"pair {pair} involves an absorbing state")
        (ri, rp), (ci, cp) = pair_marginals(self.ctmc, s, t)
        bad = w.violations(ri, rp, ci, cp)
        if bad:
            raise CouplingError(f"invalid coupling for pair {pair}: " + "; ".join(bad))
        return w

    def __setitem__(self, pair, w):
        pair = (int(pair[0]), int(pair[1]))
        self._entries[pair] = self._validated(pair, w)

    def __getitem__(self, pair):
        w = self.get(pair)
        if w is None:
            raise KeyError(f"no coupling for pair {pair}")
        return w

    def get(self, pair, default=None):
        s, t = pair
        if (s, t) in self._entries:
            return self._entries[s, t]
        if (t, s) in self._entries:
            return self._entries[t, s].transpose()
        return default

    def __contains__(self, pair):
        s, t = pair
        return (s, t) in self._entries or (t, s) in self._entries

    def __delitem__(self, pair):
        s, t = pair
        if (s, t) in self._entries:
            del self._entries[s, t]
        else:
            del self._entries[t, s]

    def pop(self, pair, default=None):
        if pair in self:
            w = self.get(pair)
            del self[pair]
            return w
        return default

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def items(self):
        return self._entries.items()

    def copy(self):
        out = CouplingStructure(self.ctmc)
        out._entries = dict(self._entries)
        return out

    def update(self, pair, w):
        """The structure equal to this one except at ``pair``, where it is ``w``."""
        out = self.copy()
        if pair in out and pair not in out._entries:
            del out[pair]
        out[pair] = w
        return out
