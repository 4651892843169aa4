"""Stochastic bisimilarity by partition refinement."""

import numpy as np

RATE_REL_TOL = 1e-12
PROB_TOL = 1e-9


def _group(members, close):
    """Split ``members`` greedily: each joins the first group whose representative is close."""
    groups = []
    for s in members:
        for g in groups:
            if close(g[0], s):
                g.append(s)
                break
        else:
            groups.append([s])
    return groups


def _rates_close(a, b):
    if a is None or b is None:
        return a is b
    return abs(a - b) <= RATE_REL_TOL * max(abs(a), abs(b))


def bisim_classes(ctmc, metric=None):
    """Coarsest stochastic bisimulation as a list of sorted state-index lists.

    States are first split by absorption, label and exit rate, then blocks are
    refined until all members send equal probability into every block.
    ``metric`` is accepted for symmetry with the distance functions; label
    equality, not label distance, decides here.
    """
    n = ctmc.n
    by_label = {}
    for s in range(n):
        by_label.setdefault((ctmc.is_absorbing(s), ctmc.labels[s]), []).append(s)
    blocks = []
    for key in sorted(by_label, key=lambda k: by_label[k][0]):
        blocks.extend(_group(by_label[key], lambda a, b: _rates_close(ctmc.rates[a], ctmc.rates[b])))

    while True:
        block_of = np.empty(n, dtype=int)
        for i, b in enumerate(blocks):
            block_of[b] = i
        # mass[s, i] = probability that s jumps into block i
        mass = np.zeros((n, len(blocks)))
        np.add.at(mass.T, block_of, ctmc.trans.T)
        refined = []
        for b in blocks:
            refined.extend(_group(b, lambda a, c: np.max(np.abs(mass[a] - mass[c])) <= PROB_TOL))
        if len(refined) == len(blocks):
            return sorted(sorted(b) for b in refined)
        blocks = refined


def bisimilar(ctmc, metric, s, t):
    for x in (s, t):
        if not 0 <= x < ctmc.n:
            raise KeyError(f"unknown state index {x}")
    classes = bisim_classes(ctmc, metric)
    return any(s in b and t in b for b in classes)


def bisim_matrix(ctmc, metric=None):
    """Boolean ``(n, n)`` matrix of the bisimilarity relation."""
    n = ctmc.n
    out = np.zeros((n, n), dtype=bool)
    for b in bisim_classes(ctmc, metric):
        out[np.ix_(b, b)] = True
    return out
