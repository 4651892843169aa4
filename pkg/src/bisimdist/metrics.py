"""Scalar distances: exponential residence times, labels, and the Kantorovich lifting."""

import math

import numpy as np

from .transport import MARGINAL_TOL, solve_tp

RATE_EQ_TOL = 1e-12


def tv_exp(r, r2):
    """Total variation distance between exponential distributions with rates ``r`` and ``r2``.

    The densities cross once, giving ``x**a - x**b`` with ``x = r2/r``,
    ``a = r/(r - r2)`` and ``b = r2/(r - r2)``.  Since ``a - b = 1`` this equals
    ``x**b * |x - 1|``, evaluated in log space.
    """
    if not (r > 0 and r2 > 0):
        raise ValueError(f"rates must be strictly positive, got {r!r}, {r2!r}")
    if abs(r - r2) < RATE_EQ_TOL * max(r, r2):
        return 0.0
    if r < r2:
        r, r2 = r2, r
    log_x = math.log1p((r2 - r) / r)
    b = r2 / (r - r2)
    return math.exp(b * log_x) * (r - r2) / r


def rate_distance_matrix(ctmc):
    """Symmetric table of ``tv_exp`` over non-absorbing state pairs (0 elsewhere)."""
    n = ctmc.n
    out = np.zeros((n, n))
    for i in range(n):
        if ctmc.is_absorbing(i):
            continue
        for j in range(i + 1, n):
            if not ctmc.is_absorbing(j):
                out[i, j] = out[j, i] = tv_exp(ctmc.rates[i], ctmc.rates[j])
    return out


def label_dist(a, b, metric):
    return metric.dist(a, b)


def label_distance_matrix(ctmc, metric):
    n = ctmc.n
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = metric.dist(ctmc.labels[i], ctmc.labels[j])
    return out


def kantorovich(d, mu, nu):
    """Kantorovich lifting of the state distance ``d`` to distributions ``mu``, ``nu``.

    ``mu`` and ``nu`` are probability vectors over the same index set as ``d``;
    only the block of ``d`` on ``support(mu) x support(nu)`` is read.
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if abs(mu.sum() - nu.sum()) > MARGINAL_TOL:
        raise ValueError(f"marginal mismatch: {mu.sum()!r} vs {nu.sum()!r}")
    ri = np.flatnonzero(mu > 0)
    ci = np.flatnonzero(nu > 0)
    return solve_tp(np.asarray(d)[np.ix_(ri, ci)], mu[ri], nu[ci]).value
