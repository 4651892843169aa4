"""Dense linear programming.

``solve_lp`` runs a bounded-variable revised simplex: every row gets a logical
(slack) variable, artificial columns cover rows that the initial logical basis
leaves infeasible, and a first phase drives their sum to zero.  Pricing is
Dantzig's largest reduced cost until a run of degenerate pivots is seen, after
which Bland's smallest-index rule takes over for both the entering and the
leaving variable, which rules out cycling.  The explicit basis inverse is
updated with eta transformations and refactorized periodically.

Problems too large for a dense basis inverse can be routed to SciPy's HiGHS
with ``method="highs"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-7
COST_TOL = 1e-9
PIVOT_TOL = 1e-10

_REFACTOR_EVERY = 64
_DEGENERATE_STREAK = 50


@dataclass
class LpProblem:
    """``sense`` c.x subject to rows ``a.x (<=|=|>=) b`` and ``lower <= x <= upper``.

    Rows are kept as sparse ``{column: coefficient}`` dicts; ``None`` bounds
    mean unbounded on that side.
    """

    objective: np.ndarray
    sense: str = "min"
    rows: list = field(default_factory=list)
    lower: list = None
    upper: list = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.size
        if self.lower is None:
            self.lower = [0.0] * n
        if self.upper is None:
            self.upper = [None] * n
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")

    @property
    def num_vars(self):
        return self.objective.size

    def add(self, coeffs, rel, rhs):
        if rel not in ("<=", "=", ">="):
            raise ValueError(f"unknown relation {rel!r}")
        if not isinstance(coeffs, dict):
            coeffs = {j: a for j, a in enumerate(coeffs) if a != 0}
        self.rows.append((coeffs, rel, float(rhs)))

    def matrix(self):
        a = np.zeros((len(self.rows), self.num_vars))
        for i, (coeffs, _, _) in enumerate(self.rows):
            for j, v in coeffs.items():
                if not 0 <= j < self.num_vars:
                    raise ValueError(f"row {i} references column {j}, problem has {self.num_vars}")
                a[i, j] += v
        return a

    def bounds(self):
        lo = np.array([-np.inf if v is None else v for v in self.lower], dtype=float)
        hi = np.array([np.inf if v is None else v for v in self.upper], dtype=float)
        if lo.size != self.num_vars or hi.size != self.num_vars:
            raise ValueError("bounds do not match the number of variables")
        return lo, hi

    def violation(self, x):
        """Largest constraint or bound violation of the point ``x``."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        lo, hi = self.bounds()
        worst = max(worst, float(np.max(lo - x, initial=0)), float(np.max(x - hi, initial=0)))
        a = self.matrix()
        lhs = a @ x
        for i, (_, rel, rhs) in enumerate(self.rows):
            gap = lhs[i] - rhs
            if rel == "<=":
                worst = max(worst, gap)
            elif rel == ">=":
                worst = max(worst, -gap)
            else:
                worst = max(worst, abs(gap))
        return worst


@dataclass
class LpSolution:
    status: str
    x: np.ndarray = None
    objective: float = float("nan")
    iterations: int = 0


class _Simplex:
    def __init__(self, a, b, cost, lo, hi, max_iter):
        self.a, self.b = a, b
        self.lo, self.hi = lo, hi
        self.cost = cost
        self.max_iter = max_iter
        self.iterations = 0

    def setup(self, basis, x, status):
        self.basis = basis
        self.x = x
        # status of non-basic columns: 0 at lower, 1 at upper, 2 free at zero
        self.status = status
        self.refactor()

    def refactor(self):
        self.binv = np.linalg.inv(self.a[:, self.basis])
        nonbasic = np.ones(self.a.shape[1], dtype=bool)
        nonbasic[self.basis] = False
        rhs = self.b - self.a[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.binv @ rhs
        self.since_refactor = 0

    def run(self, cost, blocked=None):
        """Optimize ``cost`` from the current basis; returns 'optimal' or 'unbounded'."""
        a, lo, hi = self.a, self.lo, self.hi
        ncol = a.shape[1]
        is_basic = np.zeros(ncol, dtype=bool)
        is_basic[self.basis] = True
        fixed = lo == hi
        if blocked is not None:
            fixed = fixed | blocked
        bland = False
        streak = 0
        while True:
            if self.iterations >= self.max_iter:
                raise RuntimeError("simplex iteration limit reached")
            pi = cost[self.basis] @ self.binv
            d = cost - pi @ a
            st = self.status
            up = (~is_basic) & (~fixed) & (((st == 0) & (d < -COST_TOL)) | ((st == 1) & (d > COST_TOL)) | ((st == 2) & (np.abs(d) > COST_TOL)))
            cand = np.flatnonzero(up)
            if cand.size == 0:
                return "optimal"
            q = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if (st[q] == 0 or (st[q] == 2 and d[q] < 0)) else -1.0

            alpha = self.binv @ a[:, q]
            g = direction * alpha
            xb = self.x[self.basis]
            lob, hib = lo[self.basis], hi[self.basis]
            ratios = np.full(g.size, np.inf)
            dec = g > PIVOT_TOL
            inc = g < -PIVOT_TOL
            ratios[dec] = (xb[dec] - lob[dec]) / g[dec]
            ratios[inc] = (hib[inc] - xb[inc]) / -g[inc]
            ratios = np.maximum(ratios, 0.0)
            theta = ratios.min() if ratios.size else np.inf
            flip = hi[q] - lo[q]
            if not np.isfinite(theta) and not np.isfinite(flip):
                return "unbounded"
            self.iterations += 1

            if flip <= theta:
                self.x[self.basis] = xb - flip * g
                self.x[q] = hi[q] if direction > 0 else lo[q]
                st[q] = 1 if direction > 0 else 0
                streak = 0
                continue

            ties = np.flatnonzero(ratios <= theta + 1e-12)
            if bland:
                r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
            else:
                r = int(ties[np.argmax(np.abs(g[ties]))])
            leaving = self.basis[r]
            self.x[self.basis] = xb - theta * g
            self.x[q] = self.x[q] + direction * theta
            if g[r] > 0:
                self.x[leaving], st[leaving] = lo[leaving], 0
            else:
                self.x[leaving], st[leaving] = hi[leaving], 1
            if not np.isfinite(self.x[leaving]):
                self.x[leaving], st[leaving] = 0.0, 2
            self._pivot(r, q, alpha)
            is_basic[leaving] = False
            is_basic[q] = True

            if theta < 1e-12:
                streak += 1
                if streak > _DEGENERATE_STREAK:
                    bland = True
            else:
                streak = 0

    def _pivot(self, r, q, alpha):
        self.basis[r] = q
        self.since_refactor += 1
        if self.since_refactor >= _REFACTOR_EVERY:
            self.refactor()
            return
        row = self.binv[r] / alpha[r]
        self.binv -= np.outer(alpha, row)
        self.binv[r] = row


def _solve_simplex(p, max_iter, start=None):
    a0 = p.matrix()
    m, n = a0.shape
    lo0, hi0 = p.bounds()
    if np.any(lo0 > hi0):
        return LpSolution("infeasible")
    b = np.array([rhs for _, _, rhs in p.rows], dtype=float)
    c0 = p.objective if p.sense == "min" else -p.objective

    slo = np.array([0.0 if rel in ("<=", "=") else -np.inf for _, rel, _ in p.rows])
    shi = np.array([np.inf if rel == "<=" else 0.0 for _, rel, _ in p.rows])

    x0 = np.where(np.isfinite(lo0), lo0, np.where(np.isfinite(hi0), hi0, 0.0))
    st0 = np.where(np.isfinite(lo0), 0, np.where(np.isfinite(hi0), 1, 2))
    if start is not None:
        if len(start) != n:
            raise ValueError("start does not match the number of variables")
        at_hi = np.array([v == "upper" for v in start]) & np.isfinite(hi0)
        x0[at_hi] = hi0[at_hi]
        st0[at_hi] = 1
    resid = b - a0 @ x0 if m else np.zeros(0)
    ok = (resid >= slo) & (resid <= shi)
    art_rows = np.flatnonzero(~ok)
    k = art_rows.size

    a = np.zeros((m, n + m + k))
    a[:, :n] = a0
    a[:, n : n + m] = np.eye(m)
    sign = np.sign(resid[art_rows])
    a[art_rows, n + m + np.arange(k)] = sign
    lo = np.concatenate([lo0, slo, np.zeros(k)])
    hi = np.concatenate([hi0, shi, np.full(k, np.inf)])

    x = np.concatenate([x0, np.zeros(m), np.zeros(k)])
    status = np.concatenate([st0, np.zeros(m, dtype=int), np.zeros(k, dtype=int)])
    for i in range(m):
        if not ok[i]:
            # logical sits at its finite bound nearest the residual
            x[n + i] = 0.0
            status[n + i] = 1 if shi[i] == 0.0 and slo[i] == -np.inf else 0
    basis = [n + i for i in range(m)]
    for t, i in enumerate(art_rows):
        basis[i] = n + m + t

    if m == 0:
        x = x0.copy()
        for j in range(n):
            if c0[j] > COST_TOL:
                if not np.isfinite(lo0[j]):
                    return LpSolution("unbounded")
                x[j] = lo0[j]
            elif c0[j] < -COST_TOL:
                if not np.isfinite(hi0[j]):
                    return LpSolution("unbounded")
                x[j] = hi0[j]
        return LpSolution("optimal", x, float(p.objective @ x), 0)

    sx = _Simplex(a, b, None, lo, hi, max_iter)
    sx.setup(basis, x, status)
    art = np.zeros(a.shape[1], dtype=bool)
    art[n + m :] = True

    if k:
        cost1 = art.astype(float)
        sx.run(cost1)
        if float(sx.x[art].sum()) > FEAS_TOL:
            return LpSolution("infeasible", iterations=sx.iterations)
        _drive_out_artificials(sx, art)
        sx.hi[art] = 0.0
        sx.x[art] = np.clip(sx.x[art], 0.0, 0.0)

    cost2 = np.concatenate([c0, np.zeros(m + k)])
    if sx.run(cost2, blocked=art) == "unbounded":
        return LpSolution("unbounded", iterations=sx.iterations)
    sx.refactor()
    xs = sx.x[:n].copy()
    xs = np.clip(xs, lo0, hi0)
    return LpSolution("optimal", xs, float(p.objective @ xs), sx.iterations)


def _drive_out_artificials(sx, art):
    for r, j in enumerate(list(sx.basis)):
        if not art[j]:
            continue
        row = sx.binv[r] @ sx.a
        row[art] = 0.0
        row[sx.basis] = 0.0
        cand = np.flatnonzero(np.abs(row) > 1e-7)
        if cand.size == 0:
            continue  # redundant row; the artificial stays basic at zero
        q = int(cand[np.argmax(np.abs(row[cand]))])
        alpha = sx.binv @ sx.a[:, q]
        sx.status[j] = 0
        sx.x[j] = 0.0
        sx._pivot(r, q, alpha)
    sx.refactor()


def _solve_highs(p):
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix

    n = p.num_vars
    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for coeffs, rel, rhs in p.rows:
        if rel == "=":
            eq_rows.append(coeffs)
            eq_rhs.append(rhs)
        elif rel == "<=":
            ub_rows.append(coeffs)
            ub_rhs.append(rhs)
        else:
            ub_rows.append({j: -v for j, v in coeffs.items()})
            ub_rhs.append(-rhs)

    def sparse(rows):
        if not rows:
            return None
        data, ri, ci = [], [], []
        for i, coeffs in enumerate(rows):
            for j, v in coeffs.items():
                data.append(v)
                ri.append(i)
                ci.append(j)
        return csr_matrix((data, (ri, ci)), shape=(len(rows), n))

    c = p.objective if p.sense == "min" else -p.objective
    res = linprog(
        c,
        A_ub=sparse(ub_rows),
        b_ub=ub_rhs or None,
        A_eq=sparse(eq_rows),
        b_eq=eq_rhs or None,
        bounds=list(zip(p.lower, p.upper)),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status == 2:
        return LpSolution("infeasible")
    if res.status == 3:
        return LpSolution("unbounded")
    if res.status != 0:
        raise RuntimeError(f"HiGHS failed: {res.message}")
    return LpSolution("optimal", res.x, float(p.objective @ res.x), int(getattr(res, "nit", 0)))


def solve_lp(p, method="simplex", max_iter=200_000, start=None):
    """Solve ``p``; ``method`` is ``"simplex"`` (built-in) or ``"highs"`` (SciPy).

    ``start`` optionally puts the simplex at a bound-vertex: each entry is
    ``"lower"`` or ``"upper"``.  When every row is satisfied there, phase 1 is
    skipped.
    """
    for i, (coeffs, _, _) in enumerate(p.rows):
        if any(not 0 <= j < p.num_vars for j in coeffs):
            raise ValueError(f"dimension mismatch in row {i}")
    if method == "simplex":
        return _solve_simplex(p, max_iter, start)
    if method == "highs":
        return _solve_highs(p)
    raise ValueError(f"unknown LP method {method!r}")
