"""Shared models and independent oracles for the test suite."""

from fractions import Fraction as F
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from bisimdist.model import Ctmc, LabelMetric, load, random_ctmc
from bisimdist.transport import Coupling, CouplingStructure, solve_tp

MODELS = Path(__file__).resolve().parents[1] / "models"

S1, S2, S3, S4 = range(4)


def colors4():
    return load(MODELS / "colors4.json")


def twins5():
    return load(MODELS / "twins5.json")


def twins5_skewed():
    return load(MODELS / "twins5_skewed.json")


def tv_oracle(r, r2):
    """Half the L1 distance between the two exponential densities, by quadrature."""
    f = lambda x: abs(r * np.exp(-r * x) - r2 * np.exp(-r2 * x))
    # split at the crossing point so quad sees a smooth integrand on each side
    if r == r2:
        return 0.0
    x0 = np.log(r / r2) / (r - r2)
    a, _ = quad(f, 0, x0, epsabs=1e-13, epsrel=1e-12, limit=200)
    b, _ = quad(f, x0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    return 0.5 * (a + b)


ALPHA = tv_oracle(15.0, 9.0)


def c0_value(alpha=ALPHA):
    return alpha / 2 + 5 * (1 - alpha) / 21


def final_value(alpha=ALPHA):
    return alpha / 2 + 31 * (1 - alpha) / 189


def _cp(rows, cols, table):
    return Coupling(rows, cols, np.array([[float(x) for x in r] for r in table]))


def c0_couplings():
    """The initial couplings of the worked trace on the four-state model, keyed by canonical pair."""
    return {
        (S1, S4): _cp((S2, S4), (S2, S3, S4), [[0, F(4, 9), F(17, 63)], [F(1, 9), 0, F(11, 63)]]),
        (S1, S2): _cp((S2, S4), (S1, S2), [[0, F(5, 7)], [F(1, 4), F(1, 28)]]),
        (S2, S3): _cp((S1, S2), (S2, S4), [[F(1, 4), 0], [F(1, 4), F(1, 2)]]),
        (S2, S4): _cp((S1, S2), (S2, S3, S4), [[F(1, 9), 0, F(5, 36)], [0, F(4, 9), F(11, 36)]]),
    }


def omega_prime_14():
    return _cp((S2, S4), (S2, S3, S4), [[F(1, 9), F(4, 9), F(10, 63)], [0, 0, F(2, 7)]])


def c0_structure(ctmc):
    return CouplingStructure(ctmc, c0_couplings())


def loop3(lam):
    """Three states: s loops, t loops with probability lam and else moves to u."""
    trans = np.array([[1.0, 0, 0], [0, lam, 1 - lam], [0, 0, 1.0]])
    ctmc = Ctmc(("s", "t", "u"), ("red", "red", "blue"), (1.0, 1.0, 1.0), trans)
    return ctmc, LabelMetric.discrete(("blue", "red"))


def random_models(count, n_max, deg_max=4, seed0=0, n_min=2, absorbing=True):
    """Deterministic family of generated models with varied shape."""
    rng = np.random.default_rng(seed0)
    out = []
    for k in range(count):
        n = int(rng.integers(n_min, n_max + 1))
        deg = int(rng.integers(1, min(deg_max, n) + 1))
        labels = int(rng.integers(1, 4))
        ab = int(rng.integers(0, 2)) if absorbing and n > 2 else 0
        out.append(random_ctmc(n, deg, labels, ab, seed=seed0 * 10_000 + k))
    return out


def twin_model(n_base, out_degree, clones, seed, label_count=2):
    """A generated model extended with bisimilar copies of some of its states.

    Each clone copies label, rate and successor distribution of its original.
    Every probability flowing into an original is split at random between it
    and its clone, so predecessors keep their block-wise behaviour.
    """
    base, metric = random_ctmc(n_base, out_degree, label_count, seed=seed)
    rng = np.random.default_rng(seed)
    picks = sorted(rng.choice(n_base, size=min(clones, n_base), replace=False).tolist())
    n = n_base + len(picks)
    trans = np.zeros((n, n))
    trans[:n_base, :n_base] = base.trans
    for k, x in enumerate(picks):
        trans[n_base + k, :n_base] = base.trans[x]
    for k, x in enumerate(picks):
        share = rng.uniform(0.2, 0.8, size=n)
        moved = trans[:, x] * share
        trans[:, x] -= moved
        trans[:, n_base + k] += moved
    states = base.states + tuple(f"c{x}" for x in picks)
    labels = base.labels + tuple(base.labels[x] for x in picks)
    rates = base.rates + tuple(base.rates[x] for x in picks)
    return Ctmc(states, labels, rates, trans), metric


def random_vertex_coupling(ctmc, s, t, rng):
    """Optimal transport plan for random costs, hence a vertex of the polytope."""
    (ri, rp), (ci, cp) = ctmc.support(s), ctmc.support(t)
    sol = solve_tp(rng.random((ri.size, ci.size)), rp, cp)
    return Coupling(tuple(ri), tuple(ci), sol.flow)


def random_vertex_structure(ctmc, rng):
    """Random vertex couplings on every pair of distinct non-absorbing states.

    Diagonal pairs are left to the default diagonal coupling.
    """
    live = [i for i in range(ctmc.n) if not ctmc.is_absorbing(i)]
    c = CouplingStructure(ctmc)
    for a, s in enumerate(live):
        for t in live[a + 1 :]:
            c[s, t] = random_vertex_coupling(ctmc, s, t, rng)
    return c


def is_pseudometric(d, tol=1e-7):
    d = np.asarray(d)
    if not np.array_equal(d, d.T):
        return False
    if np.max(np.abs(np.diag(d)), initial=0) > 1e-9:
        return False
    # d[i, k] <= d[i, j] + d[j, k] for all triples
    via = d[:, :, None] + d[None, :, :]
    return bool(np.all(d[:, None, :] <= via + tol))


def random_pseudometric(n, rng, scale=1.0):
    """Shortest-path closure of random symmetric weights, scaled into [0, scale]."""
    w = rng.random((n, n))
    w = np.minimum(w, w.T)
    np.fill_diagonal(w, 0.0)
    if rng.random() < 0.3:
        # glue a random pair to exercise zero distances between distinct points
        i, j = rng.choice(n, 2, replace=False) if n > 1 else (0, 0)
        w[i, j] = w[j, i] = 0.0
    for k in range(n):
        w = np.minimum(w, w[:, k : k + 1] + w[k : k + 1, :])
    return w * scale


@lru_cache(maxsize=None)
def _transport_bases(m, n):
    """Inverses of every basis of the m x n transportation equations.

    The last column equation is redundant and dropped, leaving m + n - 1 rows.
    """
    rows = []
    for i in range(m):
        rows.append([1.0 if a == i else 0.0 for a in range(m) for _ in range(n)])
    for j in range(n - 1):
        rows.append([1.0 if b == j else 0.0 for _ in range(m) for b in range(n)])
    a = np.array(rows)
    k = m + n - 1
    cells, inverses = [], []
    for sub in combinations(range(m * n), k):
        block = a[:, sub]
        if abs(np.linalg.det(block)) > 1e-9:
            cells.append(sub)
            inverses.append(np.linalg.inv(block))
    return np.array(cells), np.array(inverses)


def brute_force_tp(cost, left, right):
    """Minimum cost over every basic feasible solution, plus that solution."""
    cost = np.asarray(cost, float)
    m, n = cost.shape
    cells, inv = _transport_bases(m, n)
    rhs = np.concatenate([left, right[:-1]])
    flows = inv @ rhs
    feasible = np.all(flows >= -1e-12, axis=1)
    values = np.einsum("bk,bk->b", flows, cost.ravel()[cells])
    values[~feasible] = np.inf
    b = int(np.argmin(values))
    flow = np.zeros(m * n)
    flow[cells[b]] = flows[b]
    return float(values[b]), flow.reshape(m, n)


def lp_vertices(a_ub, b_ub, lo, hi):
    """Feasible vertices of ``{a_ub x <= b_ub, lo <= x <= hi}`` by exhaustive active-set search."""
    n = a_ub.shape[1]
    eye = np.eye(n)
    a = np.vstack([a_ub, -eye, eye])
    b = np.concatenate([b_ub, -lo, hi])
    out = []
    for act in combinations(range(a.shape[0]), n):
        sub = a[list(act)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        x = np.linalg.solve(sub, b[list(act)])
        if np.all(a @ x <= b + 1e-9):
            out.append(x)
    return out
