"""On-the-fly computation of the bisimilarity distance for selected state pairs.

A partial coupling structure is built lazily from the queried pairs and then
improved greedily: its exact discrepancy is computed by a small LP, every
coupling in the closure is checked against the transport optimum, and the
first non-optimal one is replaced.  When nothing can be improved the closure
values are exact.

One detail goes beyond the bare greedy loop.  The optimality check reads costs
for every pair in ``support(tau(u)) x support(tau(v))``, and some of those pairs
may never have been explored.  They are costed with the certified lower bound
``max(label, lam * rate)``.  If the transport optimum then wants mass on such a
pair, the pair is explored and added to the system before any coupling is
replaced.  This keeps the check sound: at loop exit every coupling in the
closure is optimal against values that are exact inside the closure and at
most the true distance outside it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .fixpoint import PairTables, _check_lambda, discrepancy_program
from .lp import solve_lp
from .transport import Coupling, CouplingStructure, northwest_coupling, solve_tp

TOL = 1e-9
MAX_STEPS = 1_000_000


class TraceEvent(NamedTuple):
    kind: str  # "discrepancy", "explore" or "replace"
    pivot: tuple
    pair: tuple
    old: float
    new: float


@dataclass
class OtfStats:
    tp_count: int = 0
    lp_count: int = 0
    replacements: int = 0
    explorations: int = 0
    steps: int = 0
    max_closure: int = 0


def _canon(s, t):
    return (s, t) if s <= t else (t, s)


def _oriented(w, pair):
    """``w`` as a coupling for ``pair`` in canonical orientation."""
    s, t = pair
    return w if s <= t else w.transpose()


@dataclass
class OnTheFly:
    """Mutable state of an on-the-fly computation over one model.

    Pairs are stored canonically as ``(min, max)`` state indices.  ``d`` is
    NaN where undefined.  ``guess`` maps a canonical pair to its first
    coupling; it defaults to the northwest corner and may also be a mapping or
    :class:`CouplingStructure` of seeds.
    """

    ctmc: object
    metric: object
    lam: float
    known: object = None
    guess: object = None
    tables: PairTables = None
    trace: list = None
    improve: str = "all"
    label_shortcut: bool = True
    c: CouplingStructure = field(init=False)
    d: np.ndarray = field(init=False)
    exact: np.ndarray = field(init=False)
    visited: set = field(init=False)
    retired: dict = field(init=False)
    stats: OtfStats = field(init=False)

    def __post_init__(self):
        _check_lambda(self.lam)
        if self.improve not in ("first", "all"):
            raise ValueError(f"improve must be 'first' or 'all', got {self.improve!r}")
        n = self.ctmc.n
        self.tables = self.tables or PairTables.of(self.ctmc, self.metric)
        self.base = self.tables.lower_bound(self.lam)
        self.c = CouplingStructure(self.ctmc)
        self.d = np.full((n, n), np.nan)
        self.exact = np.zeros((n, n), dtype=bool)
        self.visited = set()
        self.retired = {}
        self.stats = OtfStats()
        self._in_closure = np.zeros((n, n), dtype=bool)
        for p, v in _known_items(self.known, n):
            self._settle(_canon(*p), v)

    # bookkeeping

    def _set_d(self, p, v):
        s, t = p
        self.d[s, t] = self.d[t, s] = v

    def _settle(self, p, v):
        s, t = p
        self._set_d(p, v)
        self.exact[s, t] = self.exact[t, s] = True
        self.visited.add(p)
        w = self.c.pop(p)
        if w is not None:
            self.retired[p] = w

    def _emit(self, *event):
        if self.trace is not None:
            self.trace.append(TraceEvent(*event))

    def visited_ordered(self):
        """Number of ordered state pairs covered by the visited set."""
        return sum(1 if s == t else 2 for s, t in self.visited)

    def _guess(self, p):
        g = self.guess
        w = None
        if isinstance(g, CouplingStructure):
            w = g.get(p)
        elif callable(g):
            w = g(p)
        elif g is not None:
            w = g.get(p)
            if w is None and (p[1], p[0]) in g:
                w = g[p[1], p[0]].transpose()
        return northwest_coupling(self.ctmc, *p) if w is None else w

    def _touch(self, p):
        """Settle a trivial pair; True if it needs a coupling."""
        if self.exact[p]:
            return False
        v = self.tables.trivial(*p, self.lam if self.label_shortcut else None)
        if v is not None:
            self._settle(p, v)
            return False
        return p not in self.c

    # the three operations

    def set_pair(self, pair, w):
        """Install ``w`` at ``pair`` and guess couplings for newly demanded successors."""
        p = _canon(*pair)
        work = [(p, _oriented(w, pair))]
        pending = {p}
        while work:
            q, wq = work.pop()
            self.c[q] = wq
            self.visited.add(q)
            for (u, v), _ in wq.items():
                r = _canon(u, v)
                if r not in pending and self._touch(r):
                    pending.add(r)
                    self.visited.add(r)
                    work.append((r, self._guess(r)))

    def reachable(self, pair, extra=()):
        """Closure of ``pair`` (plus ``extra`` roots) under positive mass, stopping at exact pairs."""
        roots = [_canon(*pair), *(_canon(*x) for x in extra)]
        seen = set()
        stack = list(reversed(roots))
        while stack:
            p = stack.pop()
            if p in seen or self.exact[p]:
                continue
            if p not in self.c:
                raise KeyError(f"no coupling for pair {p}")
            seen.add(p)
            for (u, v), _ in self.c.get(p).items():
                q = _canon(u, v)
                if q not in seen:
                    stack.append(q)
        return sorted(seen)

    def discrepancy(self, pivot, extra=()):
        """Recompute exact discrepancies on the closure; promote pairs at 0 or at their label distance."""
        closure = self.reachable(pivot, extra)
        self._in_closure[:] = False
        self.stats.max_closure = max(self.stats.max_closure, len(closure))
        if not closure:
            return closure
        prob = discrepancy_program(self.ctmc, self.lam, self.c, closure, self.d, self.tables)
        sol = solve_lp(prob, start=["upper"] * len(closure))
        self.stats.lp_count += 1
        if sol.status != "optimal":
            raise RuntimeError(f"discrepancy program is {sol.status}")
        live = []
        for p, v in zip(closure, sol.x):
            v = float(v)
            old = self.d[p]
            self._set_d(p, v)
            if p == _canon(*pivot):
                self._emit("discrepancy", _canon(*pivot), p, old, v)
            if abs(v) <= TOL or abs(v - self.tables.label[p]) <= TOL:
                self._settle(p, v)
            else:
                live.append(p)
        for s, t in live:
            self._in_closure[s, t] = self._in_closure[t, s] = True
        return live

    def _costs(self, rows, cols):
        ix = np.ix_(rows, cols)
        settled = self.exact[ix] | self._in_closure[ix]
        return np.where(settled, self.d[ix], self.base[ix])

    def _check(self, p):
        """Transport optimum for ``p`` if it beats the current coupling by more than TOL, else None."""
        u, v = p
        (ri, rp), (ci, cp) = self.ctmc.support(u), self.ctmc.support(v)
        w = self.c.get(p)
        cost = self._costs(ri, ci)
        aligned = w.rows == tuple(ri) and w.cols == tuple(ci)
        sol = solve_tp(cost, rp, cp, start=w.mass if aligned else None)
        self.stats.tp_count += 1
        current = float(np.sum(w.mass * (cost if aligned else self._costs(w.rows, w.cols))))
        if current <= sol.value + TOL:
            return None
        demanded = {
            _canon(int(ri[i]), int(ci[j]))
            for i, j in zip(*np.nonzero(sol.flow > 0))
            if not (self.exact[ri[i], ci[j]] or self._in_closure[ri[i], ci[j]])
        }
        return Coupling(tuple(ri), tuple(ci), sol.flow), demanded

    def improve_step(self, pivot, extra):
        """One improvement round on the closure; returns True if some coupling was replaced.

        With ``improve == "first"`` only the first non-optimal pair (in
        lexicographic order) is replaced; with ``"all"`` every non-optimal pair
        found in one sweep is.  ``extra`` is a set of additional roots; pairs
        explored to make the optimality check exact are added to it.
        """
        todo = self.reachable(pivot, extra)
        found = []
        checked = set()
        while True:
            for p in todo:
                hit = self._check(p)
                if hit is None:
                    checked.add(p)
                    continue
                found.append((p, *hit))
                if self.improve == "first":
                    break
            if not found:
                return False
            demanded = set().union(*(dem for _, _, dem in found))
            if not demanded:
                break
            for q in sorted(demanded):
                if self._touch(q):
                    self.set_pair(q, self._guess(q))
                if not self.exact[q]:
                    extra.add(q)
                self.stats.explorations += 1
                self._emit("explore", _canon(*pivot), q, np.nan, np.nan)
            self.discrepancy(pivot, extra)
            # Exploring only raises costs (lower bound -> exact value) on cells
            # unused by current couplings, so pairs already found optimal stay
            # optimal; everything else in the grown closure is (re)checked.
            todo = [p for p in self.reachable(pivot, extra) if p not in checked]
            found = []
        old = {p: float(self.d[p]) for p, _, _ in found}
        for p, w, _ in found:
            self.set_pair(p, w)
            self.stats.replacements += 1
        self.discrepancy(pivot, extra)
        for p, _, _ in found:
            self._emit("replace", _canon(*pivot), p, old[p], float(self.d[p]))
        return True

    # driver

    def solve_pair(self, pair):
        """Settle ``pair`` exactly and return its distance."""
        p = _canon(*pair)
        if self._touch(p):
            self.set_pair(p, self._guess(p))
        self.visited.add(p)
        extra = set()
        self.discrepancy(p, extra)
        while True:
            extra = {q for q in extra if not self.exact[q]}
            if self.exact[p] and not extra:
                break
            self.stats.steps += 1
            if self.stats.steps > MAX_STEPS:
                raise RuntimeError("on-the-fly improvement did not terminate")
            if not self.improve_step(p, extra):
                for q in self.reachable(p, extra):
                    self._settle(q, float(self.d[q]))
                break
        return float(self.d[p])

    def query(self, pairs):
        """Distances for ``pairs`` (state indices) as ``{(s, t): value}``."""
        n = self.ctmc.n
        out = {}
        for s, t in pairs:
            if not (0 <= s < n and 0 <= t < n):
                raise KeyError(f"unknown state in query: {(s, t)}")
        for s, t in sorted(pairs, key=lambda x: _canon(*x)):
            out[s, t] = self.solve_pair((s, t))
        return out

    def terminal_structure(self):
        """Retired couplings together with the current ones."""
        out = CouplingStructure(self.ctmc)
        for p, w in self.retired.items():
            out[p] = w
        for p, w in self.c.items():
            out[p] = w
        return out


def _known_items(known, n):
    if known is None:
        return []
    if isinstance(known, dict):
        return list(known.items())
    known = np.asarray(known, dtype=float)
    return [((s, t), float(known[s, t])) for s in range(n) for t in range(s, n) if not np.isnan(known[s, t])]


def all_pairs(n):
    return [(s, t) for s in range(n) for t in range(s, n)]


def on_the_fly(ctmc, metric, lam, query, known=None, **options):
    """Distances for the ``query`` pairs, plus the final :class:`OnTheFly` state.

    ``options`` are passed on to :class:`OnTheFly` (``guess``, ``trace``,
    ``improve``, ``label_shortcut``).
    """
    st = OnTheFly(ctmc, metric, lam, known=known, **options)
    return st.query(list(query)), st


def distance_matrix(ctmc, metric, lam, known=None):
    """All-pairs distances by the on-the-fly method."""
    values, _ = on_the_fly(ctmc, metric, lam, all_pairs(ctmc.n), known=known)
    n = ctmc.n
    d = np.zeros((n, n))
    for (s, t), v in values.items():
        d[s, t] = d[t, s] = v
    return d
