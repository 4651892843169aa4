"""Labelled continuous-time Markov chains: construction, I/O, generation, perturbation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations

import numpy as np

PROB_TOL = 1e-12


class ModelError(ValueError):
    """Raised for malformed model documents or invalid models."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


@dataclass(frozen=True)
class LabelMetric:
    """A 1-bounded metric on a finite label alphabet.

    ``kind`` is ``"discrete"`` (0 on equal labels, 1 otherwise) or ``"table"``,
    in which case ``table`` maps ``frozenset({a, b})`` to the distance.
    """

    alphabet: tuple
    kind: str = "discrete"
    table: dict = field(default_factory=dict)

    def __call__(self, a, b):
        return self.dist(a, b)

    def dist(self, a, b):
        if a not in self.alphabet or b not in self.alphabet:
            raise KeyError(f"unknown label: {a if a not in self.alphabet else b}")
        if a == b:
            return 0.0
        if self.kind == "discrete":
            return 1.0
        return float(self.table[frozenset((a, b))])

    @classmethod
    def discrete(cls, alphabet):
        return cls(tuple(alphabet), "discrete")

    @classmethod
    def from_table(cls, entries, alphabet=()):
        """Build a table metric from ``(a, b, d)`` triples."""
        table = {}
        labels = list(alphabet)
        for a, b, d in entries:
            table[frozenset((a, b))] = float(d)
            for x in (a, b):
                if x not in labels:
                    labels.append(x)
        return cls(tuple(labels), "table", table)


@dataclass(frozen=True, eq=False)
class Ctmc:
    """Finite labelled CTMC over dense state indices ``0..n-1``.

    ``trans`` is an ``(n, n)`` row-stochastic matrix whose rows for absorbing
    states are all zero; ``rates[i]`` is ``None`` exactly for absorbing states.
    """

    states: tuple
    labels: tuple
    rates: tuple
    trans: np.ndarray

    def __post_init__(self):
        trans = np.array(self.trans, dtype=float)
        trans.setflags(write=False)
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.states)})
        supports = []
        n = len(self.states)
        for i in range(n):
            if trans.shape == (n, n):
                idx = np.flatnonzero(trans[i] > 0)
            else:
                idx = np.array([], dtype=int)
            supports.append((idx, trans[i, idx] if idx.size else np.array([])))
        object.__setattr__(self, "_supports", tuple(supports))

    @property
    def n(self):
        return len(self.states)

    @property
    def absorbing(self):
        return frozenset(i for i, r in enumerate(self.rates) if r is None)

    def is_absorbing(self, i):
        return self.rates[i] is None

    def index(self, state):
        try:
            return self._index[state]
        except KeyError:
            raise KeyError(f"unknown state: {state!r}") from None

    def support(self, i):
        """Successor indices and their probabilities for state ``i``."""
        return self._supports[i]

    def __eq__(self, other):
        if not isinstance(other, Ctmc):
            return NotImplemented
        return (
            self.states == other.states
            and self.labels == other.labels
            and self.rates == other.rates
            and np.array_equal(self.trans, other.trans)
        )

    __hash__ = None


def validate(ctmc, metric):
    """Return the list of violated model/metric invariants (empty iff valid)."""
    out = []
    if ctmc.n == 0:
        out.append("empty state set")
    if len(set(ctmc.states)) != ctmc.n:
        out.append("duplicate state identifiers")
    if len(ctmc.labels) != ctmc.n or len(ctmc.rates) != ctmc.n:
        out.append("labels/rates length does not match state count")
        return out
    if ctmc.trans.shape != (ctmc.n, ctmc.n):
        out.append(f"transition matrix has shape {ctmc.trans.shape}, expected {(ctmc.n, ctmc.n)}")
        return out
    for i, s in enumerate(ctmc.states):
        row = ctmc.trans[i]
        if ctmc.rates[i] is None:
            if np.any(row != 0):
                out.append(f"absorbing state {s} has outgoing transitions")
            continue
        if not ctmc.rates[i] > 0:
            out.append(f"state {s}: exit rate must be strictly positive")
        if np.any(row < 0):
            out.append(f"state {s}: negative transition probability")
        total = row.sum()
        if abs(total - 1.0) > PROB_TOL:
            out.append(f"state {s}: distribution does not sum to 1 (sum = {total!r})")
    for i, lab in enumerate(ctmc.labels):
        if lab not in metric.alphabet:
            out.append(f"state {ctmc.states[i]}: label {lab!r} not in metric alphabet")
    out.extend(_metric_violations(metric))
    return out


def _metric_violations(metric):
    if metric.kind == "discrete":
        return []
    if metric.kind != "table":
        return [f"unknown label metric kind {metric.kind!r}"]
    out = []
    for a, b in combinations(metric.alphabet, 2):
        key = frozenset((a, b))
        if key not in metric.table:
            out.append(f"label metric: missing entry for ({a}, {b})")
            continue
        d = metric.table[key]
        if not 0.0 <= d <= 1.0:
            out.append(f"label metric: d({a}, {b}) = {d} outside [0, 1]")
        elif d == 0.0:
            out.append(f"label metric: d({a}, {b}) = 0 for distinct labels")
    for key, d in metric.table.items():
        if len(key) == 1 and d != 0.0:
            (a,) = key
            out.append(f"label metric: d({a}, {a}) must be 0")
    if out:
        return out
    for a, b, c in permutations(metric.alphabet, 3):
        if metric.dist(a, b) > metric.dist(a, c) + metric.dist(c, b) + 1e-12:
            out.append(f"label metric: triangle inequality fails for ({a}, {b}) via {c}")
    return out


def check(ctmc, metric):
    violations = validate(ctmc, metric)
    if violations:
        raise ModelError("invalid model: " + "; ".join(violations), violations)
    return ctmc


def _number(value, what):
    if isinstance(value, bool):
        raise ModelError(f"{what}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise ModelError(f"{what}: cannot parse number {value!r}") from None
    raise ModelError(f"{what}: expected a number, got {value!r}")


def from_dict(doc):
    """Build and validate ``(Ctmc, LabelMetric)`` from a decoded model document."""
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    states = doc.get("states")
    if not isinstance(states, list):
        raise ModelError("'states' must be a list")
    if not states:
        raise ModelError("empty state set", ["empty state set"])
    ids, labels, rates = [], [], []
    for k, st in enumerate(states):
        if not isinstance(st, dict) or "id" not in st or "label" not in st:
            raise ModelError(f"states[{k}]: expected an object with 'id' and 'label'")
        ids.append(str(st["id"]))
        labels.append(str(st["label"]))
        rate = st.get("rate")
        rates.append(None if rate is None else _number(rate, f"states[{k}].rate"))
    index = {s: i for i, s in enumerate(ids)}
    if len(index) != len(ids):
        raise ModelError("duplicate state identifiers")
    n = len(ids)
    trans = np.zeros((n, n))
    for k, tr in enumerate(doc.get("transitions", [])):
        try:
            i, j = index[str(tr["from"])], index[str(tr["to"])]
        except KeyError as e:
            raise ModelError(f"transitions[{k}]: unknown or missing state {e}") from None
        trans[i, j] += _number(tr.get("prob"), f"transitions[{k}].prob")

    lm = doc.get("label_metric", {"kind": "discrete"})
    kind = lm.get("kind")
    if kind == "discrete":
        metric = LabelMetric.discrete(sorted(set(labels)))
    elif kind == "table":
        entries = [(str(e["a"]), str(e["b"]), _number(e["d"], "label_metric.d")) for e in lm.get("entries", [])]
        metric = LabelMetric.from_table(entries, sorted(set(labels)))
    else:
        raise ModelError(f"unknown label metric kind {kind!r}")

    ctmc = Ctmc(tuple(ids), tuple(labels), tuple(rates), trans)
    return check(ctmc, metric), metric


def parse_ctmc(text):
    """Parse a JSON model document into ``(Ctmc, LabelMetric)``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError(f"syntax error at line {e.lineno} column {e.colno}: {e.msg}") from None
    return from_dict(doc)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return parse_ctmc(fh.read())


def to_dict(ctmc, metric):
    doc = {
        "states": [
            {"id": s, "label": lab, "rate": r}
            for s, lab, r in zip(ctmc.states, ctmc.labels, ctmc.rates)
        ],
        "transitions": [
            {"from": ctmc.states[i], "to": ctmc.states[j], "prob": float(ctmc.trans[i, j])}
            for i in range(ctmc.n)
            for j in range(ctmc.n)
            if ctmc.trans[i, j] != 0
        ],
    }
    if metric.kind == "discrete":
        doc["label_metric"] = {"kind": "discrete"}
    else:
        entries = []
        for a, b in combinations(metric.alphabet, 2):
            entries.append({"a": a, "b": b, "d": metric.dist(a, b)})
        doc["label_metric"] = {"kind": "table", "entries": entries}
    return doc


def serialize(ctmc, metric):
    return json.dumps(to_dict(ctmc, metric), indent=2)


class SplitMix64:
    """SplitMix64 generator; identical streams across platforms for a given seed."""

    MASK = (1 << 64) - 1

    def __init__(self, seed):
        self.state = seed & self.MASK

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def random(self):
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, k):
        return int(self.random() * k)

    def shuffled(self, items):
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.below(i + 1)
            out[i], out[j] = out[j], out[i]
        return out


def random_ctmc(n, out_degree, label_count=2, absorbing_count=0, rate_range=(1.0, 10.0), seed=0):
    """Random CTMC with a discrete label metric, deterministic in ``seed``.

    Absorbing states are the first ``absorbing_count`` entries of a shuffled
    state list. Every other state moves to ``out_degree`` successors (prefix of
    a fresh shuffle) with normalized uniform weights in (0, 1].
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 1 <= out_degree <= n:
        raise ValueError(f"out_degree must be in [1, {n}], got {out_degree}")
    if not 0 <= absorbing_count < n:
        raise ValueError(f"absorbing_count must be in [0, {n - 1}], got {absorbing_count}")
    if label_count < 1:
        raise ValueError("label_count must be at least 1")
    lo, hi = rate_range
    if not 0 < lo <= hi:
        raise ValueError(f"rate_range must be a positive interval, got {rate_range}")

    rng = SplitMix64(seed)
    alphabet = tuple(f"l{k}" for k in range(label_count))
    absorbing = set(rng.shuffled(range(n))[:absorbing_count])
    trans = np.zeros((n, n))
    rates = []
    for i in range(n):
        if i in absorbing:
            rates.append(None)
            continue
        rates.append(lo + (hi - lo) * rng.random())
        succ = rng.shuffled(range(n))[:out_degree]
        w = np.array([1.0 - rng.random() for _ in succ])
        trans[i, succ] = w / w.sum()
    labels = tuple(alphabet[rng.below(label_count)] for _ in range(n))
    ctmc = Ctmc(tuple(f"s{i}" for i in range(n)), labels, tuple(rates), trans)
    return ctmc, LabelMetric.discrete(alphabet)


def perturb(ctmc, edits, seed=None):
    """Move probability mass ``eps`` from ``target_b`` to ``target_a`` for each edit.

    ``edits`` holds ``(state, target_a, target_b, eps)`` tuples over state ids.
    If ``edits`` is a float instead, one random edit of that size is drawn per
    non-absorbing state with at least two successors (deterministic in ``seed``).
    """
    if isinstance(edits, (int, float)):
        edits = random_edits(ctmc, float(edits), seed or 0)
    trans = np.array(ctmc.trans)
    for state, a, b, eps in edits:
        i, ja, jb = ctmc.index(state), ctmc.index(a), ctmc.index(b)
        if ctmc.is_absorbing(i):
            raise ModelError(f"cannot perturb absorbing state {state}")
        if eps < 0:
            raise ModelError(f"edit ({state}, {a}, {b}): eps must be non-negative")
        if trans[i, ja] + eps > 1 + PROB_TOL or trans[i, jb] - eps < -PROB_TOL:
            raise ModelError(
                f"edit ({state}, {a}, {b}, {eps}): probabilities would leave [0, 1] "
                f"(tau({a}) = {trans[i, ja]:.6g}, tau({b}) = {trans[i, jb]:.6g})"
            )
        trans[i, ja] = min(trans[i, ja] + eps, 1.0)
        trans[i, jb] = max(trans[i, jb] - eps, 0.0)
    return Ctmc(ctmc.states, ctmc.labels, ctmc.rates, trans)


def random_edits(ctmc, eps, seed=0):
    rng = SplitMix64(seed)
    edits = []
    for i in range(ctmc.n):
        idx, probs = ctmc.support(i)
        if ctmc.is_absorbing(i) or idx.size < 2:
            continue
        a, b = rng.shuffled(range(idx.size))[:2]
        if probs[b] < eps or probs[a] + eps > 1:
            continue
        edits.append((ctmc.states[i], ctmc.states[idx[a]], ctmc.states[idx[b]], eps))
    return edits
