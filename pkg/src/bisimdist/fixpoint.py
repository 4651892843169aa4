"""Fixed-point operators on state distances and exact discrepancies of coupling structures.

Distance matrices are plain ``(n, n)`` float arrays; partial ones use NaN for
undefined entries or are passed as ``{(s, t): value}`` dicts over state indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lp import LpProblem, solve_lp
from .metrics import label_distance_matrix, rate_distance_matrix
from .transport import diagonal_coupling, solve_tp


class MissingCouplingError(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class PairTables:
    """Per-model constants: label distances, rate distances and absorbing flags."""

    label: np.ndarray
    rate: np.ndarray
    absorbing: np.ndarray

    @classmethod
    def of(cls, ctmc, metric):
        absorbing = np.array([ctmc.is_absorbing(i) for i in range(ctmc.n)])
        return cls(label_distance_matrix(ctmc, metric), rate_distance_matrix(ctmc), absorbing)

    def trivial(self, s, t, lam=None):
        """Distance of a pair settled without looking at ``d``, or None.

        With ``lam`` given, non-absorbing pairs whose label distance is at
        least ``lam`` count as settled too: the discounted transition term
        never exceeds ``lam``, so the value is the label distance.
        """
        if s == t:
            return 0.0
        if self.absorbing[s] != self.absorbing[t]:
            return 1.0
        if self.absorbing[s] or (lam is not None and self.label[s, t] >= lam):
            return float(self.label[s, t])
        return None

    def lower_bound(self, lam):
        """Pointwise lower bound on the distance, exact on trivial pairs.

        For two non-absorbing states the Kantorovich term is non-negative, so
        ``max(label, lam * rate)`` never exceeds the distance.
        """
        ab = self.absorbing
        out = np.maximum(self.label, lam * self.rate)
        out[ab[:, None] != ab[None, :]] = 1.0
        both = ab[:, None] & ab[None, :]
        out[both] = self.label[both]
        np.fill_diagonal(out, 0.0)
        return out


def _check_lambda(lam):
    if not 0.0 < lam < 1.0:
        raise ValueError(f"discount factor must lie in (0, 1), got {lam!r}")


def _canon(s, t):
    return (s, t) if s <= t else (t, s)


def delta_op(ctmc, metric, lam, d, tables=None, counter=None):
    """One application of the bisimilarity functional to the symmetric matrix ``d``.

    ``counter``, if given, is a dict whose ``"tp"`` entry is incremented per
    transportation problem solved.
    """
    _check_lambda(lam)
    tables = tables or PairTables.of(ctmc, metric)
    d = np.asarray(d, dtype=float)
    n = ctmc.n
    zero_diag = not np.any(np.diag(d))
    # with d <= 1 the transition term is at most lam
    bounded = d.size == 0 or np.max(d) <= 1.0
    out = np.empty((n, n))
    for s in range(n):
        for t in range(s, n):
            if tables.absorbing[s] != tables.absorbing[t]:
                v = 1.0
            elif tables.absorbing[s] or (bounded and tables.label[s, t] >= lam):
                v = tables.label[s, t]
            elif s == t and zero_diag:
                v = 0.0
            else:
                (ri, rp), (ci, cp) = ctmc.support(s), ctmc.support(t)
                k = solve_tp(d[np.ix_(ri, ci)], rp, cp).value
                if counter is not None:
                    counter["tp"] = counter.get("tp", 0) + 1
                r = tables.rate[s, t]
                v = max(tables.label[s, t], lam * (r + (1.0 - r) * k))
            out[s, t] = out[t, s] = v
    return out


def iteration_count(lam, eps):
    """Applications needed for accuracy ``eps``: ``ceil(log_lam(eps))``, at least 0."""
    _check_lambda(lam)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if eps >= 1:
        return 0
    k = math.log(eps) / math.log(lam)
    # guard against log rounding pushing an exact integer just above itself
    return max(0, math.ceil(k - 1e-12))


def start_matrix(n, start="bottom"):
    if start == "bottom":
        return np.zeros((n, n))
    if start == "top":
        d = np.ones((n, n))
        np.fill_diagonal(d, 0.0)
        return d
    raise ValueError(f"start must be 'bottom' or 'top', got {start!r}")


def iterates(ctmc, metric, lam, start="bottom", tables=None, counter=None):
    """Yield ``Delta^1(start), Delta^2(start), ...`` indefinitely."""
    tables = tables or PairTables.of(ctmc, metric)
    d = start_matrix(ctmc.n, start)
    while True:
        d = delta_op(ctmc, metric, lam, d, tables, counter)
        yield d


def iterate(ctmc, metric, lam, eps, start="bottom", tables=None, counter=None):
    """``Delta^n(start)`` with ``n = ceil(log_lam eps)``; within ``eps`` of the distance."""
    n_iter = iteration_count(lam, eps)
    d = start_matrix(ctmc.n, start)
    if counter is not None:
        counter["iterations"] = n_iter
    tables = tables or PairTables.of(ctmc, metric)
    for _ in range(n_iter):
        d = delta_op(ctmc, metric, lam, d, tables, counter)
    return d


def _coupling_for(c, s, t, ctmc):
    w = c.get((s, t))
    if w is None and s == t:
        return diagonal_coupling(ctmc, s)
    if w is None:
        raise MissingCouplingError(f"no coupling for pair {(s, t)}")
    return w


def gamma_op(ctmc, metric, lam, c, d, tables=None):
    """Like :func:`delta_op` but with the couplings of ``c`` instead of optimal ones.

    Diagonal pairs without an entry use the diagonal coupling.
    """
    _check_lambda(lam)
    tables = tables or PairTables.of(ctmc, metric)
    d = np.asarray(d, dtype=float)
    n = ctmc.n
    out = np.empty((n, n))
    for s in range(n):
        for t in range(n):
            if tables.absorbing[s] != tables.absorbing[t]:
                out[s, t] = 1.0
            elif tables.absorbing[s]:
                out[s, t] = tables.label[s, t]
            else:
                w = _coupling_for(c, s, t, ctmc)
                r = tables.rate[s, t]
                out[s, t] = max(tables.label[s, t], lam * (r + (1.0 - r) * w.cost(d)))
    return out


def _known_value(known, p):
    if known is None:
        return None
    if isinstance(known, dict):
        v = known.get(p)
        if v is None:
            v = known.get((p[1], p[0]))
        return v
    v = known[p]
    return None if np.isnan(v) else float(v)


def closure(ctmc, c, roots, known=None, tables=None, lam=None):
    """Pairs reachable from ``roots`` through positive coupling mass.

    Pairs with a known or trivial value end the exploration; they are returned
    separately as ``{pair: value}``.  Pairs are canonical ``(min, max)``.
    """
    variables, constants = [], {}
    seen = set()
    stack = [_canon(*p) for p in roots]
    while stack:
        p = stack.pop()
        if p in seen:
            continue
        seen.add(p)
        v = _known_value(known, p)
        if v is None and tables is not None:
            v = tables.trivial(*p, lam)
        if v is not None:
            constants[p] = v
            continue
        variables.append(p)
        w = _coupling_for(c, p[0], p[1], ctmc)
        for (u, v_), _ in w.items():
            q = _canon(u, v_)
            if q not in seen:
                stack.append(q)
    variables.sort()
    return variables, constants


def discrepancy_program(ctmc, lam, c, variables, constants, tables, objective_weights=None):
    """The least-pre-fixed-point program restricted to ``variables``.

    Known values enter the right-hand side; ``d >= label`` becomes a variable
    bound.  The upper bound 1 is implied (the least solution never exceeds it)
    and makes ``d = 1`` a feasible starting vertex.
    """
    index = {p: k for k, p in enumerate(variables)}
    weights = np.ones(len(variables)) if objective_weights is None else np.asarray(objective_weights, float)
    prob = LpProblem(weights, "min", lower=[float(tables.label[p]) for p in variables], upper=[1.0] * len(variables))
    for p in variables:
        s, t = p
        w = _coupling_for(c, s, t, ctmc)
        r = tables.rate[s, t]
        scale = lam * (1.0 - r)
        coeffs = {index[p]: 1.0}
        rhs = lam * r
        for (u, v), mass in w.items():
            q = _canon(u, v)
            if q in index:
                coeffs[index[q]] = coeffs.get(index[q], 0.0) - scale * mass
            else:
                rhs += scale * mass * constants[q]
        prob.add(coeffs, ">=", rhs)
    return prob


def discrepancy(ctmc, metric, lam, c, pairs, known=None, tables=None, method="simplex"):
    """Least fixed point of the coupling-structure functional on the closure of ``pairs``.

    ``known`` (dict or NaN-padded matrix) supplies constants that cut the
    closure.  Returns ``{pair: value}`` over canonical pairs, including the
    constants met during exploration.
    """
    _check_lambda(lam)
    tables = tables or PairTables.of(ctmc, metric)
    variables, constants = closure(ctmc, c, pairs, known, tables, lam)
    out = dict(constants)
    if not variables:
        return out
    prob = discrepancy_program(ctmc, lam, c, variables, constants, tables)
    sol = solve_lp(prob, method=method, start=["upper"] * len(variables))
    if sol.status != "optimal":
        raise RuntimeError(f"discrepancy program is {sol.status}")
    for p, v in zip(variables, sol.x):
        out[p] = float(v)
    return out


def to_matrix(n, values):
    """Symmetric NaN-padded matrix from ``{(s, t): value}``."""
    d = np.full((n, n), np.nan)
    for (s, t), v in values.items():
        d[s, t] = d[t, s] = v
    return d


def sup_norm(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0))
