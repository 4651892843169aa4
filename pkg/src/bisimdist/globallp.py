"""The global linear program whose optimum carries the distance on every state pair.

Variables are laid out contiguously as ``d`` (all ordered pairs), ``y`` (one
dual potential per non-absorbing ordered pair and state), then ``k`` and ``m``
(one each per non-absorbing ordered pair).  ``m <= label`` is expressed as an
upper bound on ``m`` rather than a row.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .fixpoint import PairTables, _check_lambda, delta_op, sup_norm
from .lp import LpProblem, solve_lp

# Above this many rows the dense simplex gets slow; HiGHS takes over.
AUTO_HIGHS_ROWS = 400
RESIDUAL_TOL = 1e-6


class LpResidualWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class GlobalLpLayout:
    n: int
    live: tuple  # non-absorbing state indices

    @property
    def h(self):
        return len(self.live)

    @property
    def num_vars(self):
        n, h = self.n, self.h
        return n * n + h * h * n + 2 * h * h

    def d(self, s, t):
        return s * self.n + t

    @cached_property
    def _pos(self):
        return {x: i for i, x in enumerate(self.live)}

    def _pair(self, s, t):
        return self._pos[s] * self.h + self._pos[t]

    def y(self, s, t, u):
        return self.n * self.n + self._pair(s, t) * self.n + u

    def k(self, s, t):
        return self.n * self.n + self.h * self.h * self.n + self._pair(s, t)

    def m(self, s, t):
        return self.n * self.n + self.h * self.h * (self.n + 1) + self._pair(s, t)

    def names(self):
        """Variable names in column order."""
        out = [None] * self.num_vars
        for s in range(self.n):
            for t in range(self.n):
                out[self.d(s, t)] = f"d_{s}_{t}"
        for s in self.live:
            for t in self.live:
                out[self.k(s, t)] = f"k_{s}_{t}"
                out[self.m(s, t)] = f"m_{s}_{t}"
                for u in range(self.n):
                    out[self.y(s, t, u)] = f"y_{s}_{t}_{u}"
        return out


def build_d_program(ctmc, metric, lam, tables=None):
    """The program and its layout."""
    _check_lambda(lam)
    tables = tables or PairTables.of(ctmc, metric)
    n = ctmc.n
    live = tuple(i for i in range(n) if not ctmc.is_absorbing(i))
    lay = GlobalLpLayout(n, live)
    nv = lay.num_vars
    obj = np.zeros(nv)
    lower = [0.0] * nv
    upper = [1.0] * nv
    prob = LpProblem(obj, "max", lower=lower, upper=upper)
    ab = tables.absorbing

    for s in range(n):
        for t in range(n):
            ell = float(tables.label[s, t])
            if ab[s] != ab[t]:
                prob.add({lay.d(s, t): 1.0}, "=", 1.0)
            elif ab[s]:
                prob.add({lay.d(s, t): 1.0}, "=", ell)
            else:
                r = float(tables.rate[s, t])
                k, m = lay.k(s, t), lay.m(s, t)
                obj[k] = obj[m] = 1.0
                upper[m] = ell
                # d = ell + lam*r + lam*(1-r)*k - m
                prob.add({lay.d(s, t): 1.0, k: -lam * (1.0 - r), m: 1.0}, "=", ell + lam * r)
                # m <= lam*r + lam*(1-r)*k
                prob.add({m: 1.0, k: -lam * (1.0 - r)}, "<=", lam * r)
                coeffs = {k: 1.0}
                diff = ctmc.trans[s] - ctmc.trans[t]
                for u in np.flatnonzero(diff):
                    coeffs[lay.y(s, t, int(u))] = -float(diff[u])
                prob.add(coeffs, "=", 0.0)

    for s in live:
        for t in live:
            for u in range(n):
                lower[lay.y(s, t, u)] = None
                upper[lay.y(s, t, u)] = None
            for u in range(n):
                for v in range(n):
                    if u == v:
                        # y_u - y_u <= d_uu, kept so the row family matches the figure
                        prob.add({lay.d(u, v): -1.0}, "<=", 0.0)
                    else:
                        prob.add({lay.y(s, t, u): 1.0, lay.y(s, t, v): -1.0, lay.d(u, v): -1.0}, "<=", 0.0)
    prob.objective = obj
    return prob, lay


def solve_distance_lp(ctmc, metric, lam, method="auto", full=False):
    """All-pairs distance matrix from an optimal solution of the global program.

    ``method`` is ``"simplex"`` (built-in), ``"highs"`` (SciPy) or ``"auto"``,
    which picks HiGHS for programs above ``AUTO_HIGHS_ROWS`` rows.  With
    ``full=True`` returns ``(d, solution, layout, residual)``.

    The optimum is the distance whenever label distances are 0 or 1.  With
    intermediate label distances the objective can prefer raising some ``d``
    above the label bound (slack in ``m``) because that lifts several ``k``
    terms at once; the extracted matrix is then not a fixed point.  The
    fixed-point residual is checked and an :class:`LpResidualWarning` is
    issued when it exceeds ``RESIDUAL_TOL``.
    """
    tables = PairTables.of(ctmc, metric)
    prob, lay = build_d_program(ctmc, metric, lam, tables)
    if method == "auto":
        method = "highs" if len(prob.rows) > AUTO_HIGHS_ROWS else "simplex"
    sol = solve_lp(prob, method=method)
    if sol.status != "optimal":
        raise RuntimeError(f"global distance program is {sol.status}")
    n = ctmc.n
    d = np.asarray(sol.x[: n * n]).reshape(n, n).copy()
    d = np.clip((d + d.T) / 2.0, 0.0, 1.0)
    np.fill_diagonal(d, 0.0)
    residual = sup_norm(delta_op(ctmc, metric, lam, d, tables), d)
    if residual > RESIDUAL_TOL:
        warnings.warn(
            f"global program optimum is not a fixed point (residual {residual:.3g})",
            LpResidualWarning,
            stacklevel=2,
        )
    if full:
        return d, sol, lay, residual
    return d


def _fmt(v):
    return repr(float(v))


def to_lp_format(prob, names=None):
    """The program in CPLEX LP text format."""
    names = names or [f"x{j}" for j in range(prob.num_vars)]

    def expr(coeffs):
        parts = []
        for j, a in sorted(coeffs.items()):
            if a == 0:
                continue
            parts.append(f"{'-' if a < 0 else '+'} {_fmt(abs(a))} {names[j]}")
        return " ".join(parts) if parts else f"0 {names[0]}"

    lines = ["Maximize" if prob.sense == "max" else "Minimize"]
    lines.append(" obj: " + expr({j: a for j, a in enumerate(prob.objective)}))
    lines.append("Subject To")
    rel = {"<=": "<=", ">=": ">=", "=": "="}
    for i, (coeffs, r, rhs) in enumerate(prob.rows):
        lines.append(f" c{i}: {expr(coeffs)} {rel[r]} {_fmt(rhs)}")
    lines.append("Bounds")
    lo, hi = prob.bounds()
    for j in range(prob.num_vars):
        if np.isinf(lo[j]) and np.isinf(hi[j]):
            lines.append(f" {names[j]} free")
        else:
            a = "-inf" if np.isinf(lo[j]) else _fmt(lo[j])
            b = "+inf" if np.isinf(hi[j]) else _fmt(hi[j])
            lines.append(f" {a} <= {names[j]} <= {b}")
    lines.append("End")
    return "\n".join(lines) + "\n"
