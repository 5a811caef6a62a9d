"""Edge-exchangeable network generation from truncated self-product measures.

Networks are directed multigraphs without self-loops, stored sparsely as a
map from d-tuples of distinct 1-based vertex indices to positive counts.
The independent likelihood process draws per-index round-aggregated counts
(Binomial/Poisson sufficient statistics of the i.i.d. rounds) from
counter-based per-index RNG streams, which makes truncation consistency
hold bit-exactly: restricting a larger-K simulation to the first K rates
reproduces the direct K-truncated simulation draw for draw.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSupportError, ParameterError

MAX_ARITY = 8
_INDEX_BITS = 21  # per-component budget in the Philox counter


class LikKind(enum.Enum):
    BERNOULLI = "bernoulli"
    POISSON = "poisson"
    CATEGORICAL_PROCESS = "categorical_process"


@dataclass(frozen=True)
class LikelihoodModel:
    """Per-edge count distribution h(. | rate product) with its zero mass."""

    kind: LikKind

    def pmf(self, x, vartheta):
        x = np.asarray(x)
        v = np.asarray(vartheta, dtype=np.float64)
        if self.kind is LikKind.BERNOULLI:
            return np.where(x == 0, 1.0 - v, np.where(x == 1, v, 0.0))
        if self.kind is LikKind.POISSON:
            from scipy import special
            return np.exp(x * np.log(v) - v - special.gammaln(x + 1.0))
        raise ParameterError("pmf is defined for Bernoulli and Poisson")

    def log_pi(self, vartheta):
        """log h(0 | vartheta), always <= 0."""
        v = np.asarray(vartheta, dtype=np.float64)
        if self.kind is LikKind.BERNOULLI:
            return np.log1p(-v)
        if self.kind is LikKind.POISSON:
            return -v
        raise ParameterError("log_pi is defined for Bernoulli and Poisson")

    def mean(self, vartheta):
        v = np.asarray(vartheta, dtype=np.float64)
        if self.kind in (LikKind.BERNOULLI, LikKind.POISSON):
            return v
        raise ParameterError("mean is defined for Bernoulli and Poisson")


def bernoulli_likelihood():
    return LikelihoodModel(LikKind.BERNOULLI)


def poisson_likelihood():
    return LikelihoodModel(LikKind.POISSON)


@dataclass
class EdgeCounts:
    """Sparse multi-index -> count map for the edges accumulated over rounds."""

    d: int
    rounds: int
    counts: dict

    def __post_init__(self):
        if self.d < 2:
            raise ParameterError("arity d must be >= 2")
        for key, c in self.counts.items():
            if len(key) != self.d:
                raise ParameterError(f"key {key} does not have arity {self.d}")
            if len(set(key)) != self.d or min(key) < 1:
                raise ParameterError(f"key {key} must have distinct positive components")
            if c < 1:
                raise ParameterError(f"count for {key} must be >= 1")

    def total_edges(self):
        return sum(self.counts.values())


# ---------------------------------------------------------------------------
# per-index RNG streams
# ---------------------------------------------------------------------------

def _philox_key(seed):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.generate_state(2, np.uint64)


def _index_counter(index):
    flat = 0
    for c in index:
        if c >= (1 << _INDEX_BITS):
            raise ParameterError(f"vertex index {c} exceeds the 2^{_INDEX_BITS} stream budget")
        flat = (flat << _INDEX_BITS) | c
    return flat << 64


def _index_rng(key, index):
    return np.random.Generator(np.random.Philox(key=key, counter=_index_counter(index)))


def _distinct_indices(K, d):
    """Row-major lexicographic iteration over [K]^d with distinct components."""
    for idx in itertools.product(range(1, K + 1), repeat=d):
        if len(set(idx)) == d:
            yield idx


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def _check_arity(d):
    if d < 2:
        raise ParameterError("arity d must be >= 2")
    if d > MAX_ARITY:
        raise ParameterError(f"arity d is capped at {MAX_ARITY}")


def simulate_independent(crm, lik, N, d, seed, with_rounds=False):
    """Independent likelihood process: per index i in [K]^d_!=, the count
    after N rounds is Binomial(N, prod theta) for Bernoulli or
    Poisson(N * prod theta) for Poisson.

    With ``with_rounds`` the (exchangeable) round index of every edge is
    also drawn; returns (EdgeCounts, {index: round array}) in that case.
    """
    if lik.kind not in (LikKind.BERNOULLI, LikKind.POISSON):
        raise ParameterError("independent process needs a Bernoulli or Poisson likelihood")
    rates = np.asarray(crm.rates, dtype=np.float64)
    K = rates.size
    _check_arity(d)
    if N < 0:
        raise ParameterError("rounds N must be nonnegative")
    if lik.kind is LikKind.BERNOULLI and K >= d:
        top = np.sort(rates)[-d:]
        if float(np.prod(top)) > 1.0:
            raise ParameterError("Bernoulli requires every rate product <= 1")
    key = _philox_key(seed)
    counts = {}
    round_map = {} if with_rounds else None
    for index in _distinct_indices(K, d):
        v = 1.0
        for c in index:
            v *= rates[c - 1]
        if v == 0.0:
            continue
        rng = _index_rng(key, index)
        if lik.kind is LikKind.BERNOULLI:
            x = int(rng.binomial(N, v)) if N > 0 else 0
        else:
            x = int(rng.poisson(N * v))
        if x > 0:
            counts[index] = x
            if with_rounds:
                if lik.kind is LikKind.BERNOULLI:
                    rounds = np.sort(rng.choice(N, size=x, replace=False))
                else:
                    rounds = np.sort(rng.integers(0, N, size=x))
                round_map[index] = rounds
    edges = EdgeCounts(d=d, rounds=int(N), counts=counts)
    return (edges, round_map) if with_rounds else edges


def simulate_categorical(crm, N, d, seed):
    """Categorical likelihood process: one edge per round, index drawn with
    probability proportional to the rate product over distinct d-tuples,
    via d independent rate-proportional draws with repeat rejection."""
    rates = np.asarray(crm.rates, dtype=np.float64)
    npos = int((rates > 0).sum())
    _check_arity(d)
    if npos < d:
        raise InsufficientSupportError(
            f"categorical process needs >= {d} strictly positive rates, got {npos}")
    if N < 0:
        raise ParameterError("rounds N must be nonnegative")
    total = rates.sum()
    cdf = np.cumsum(rates / total)
    rng = np.random.default_rng(seed)
    counts = {}
    remaining = int(N)
    while remaining > 0:
        m = min(remaining, 1 << 16)
        u = rng.uniform(size=(m, d))
        rows = np.searchsorted(cdf, u, side="right")
        rows = np.minimum(rows, rates.size - 1) + 1
        srt = np.sort(rows, axis=1)
        ok = ~np.any(np.diff(srt, axis=1) == 0, axis=1)
        good = rows[ok]
        for row in good:
            keyt = tuple(int(x) for x in row)
            counts[keyt] = counts.get(keyt, 0) + 1
        remaining -= int(ok.sum())
    return EdgeCounts(d=d, rounds=int(N), counts=counts)


# ---------------------------------------------------------------------------
# transforms and summaries
# ---------------------------------------------------------------------------

def binarize_undirect(edges):
    """Collapse to an undirected binary graph: sorted keys, 0/1 counts."""
    out = {}
    for key in edges.counts:
        out[tuple(sorted(key))] = 1
    return EdgeCounts(d=edges.d, rounds=edges.rounds, counts=out)


def truncate_edges(edges, K):
    """Drop every key with a component beyond K."""
    out = {k: c for k, c in edges.counts.items() if max(k) <= K}
    return EdgeCounts(d=edges.d, rounds=edges.rounds, counts=out)


def max_vertex_index(edges):
    if not edges.counts:
        return 0
    return max(max(k) for k in edges.counts)


def network_stats(edges):
    """Vertex count, edge count (with multiplicity) and degree histogram.

    Degree of a vertex is the count-weighted number of incidences; for a
    binarized graph this reduces to the number of distinct neighbors.
    """
    degree = {}
    for key, c in edges.counts.items():
        for v in key:
            degree[v] = degree.get(v, 0) + c
    hist = {}
    for deg in degree.values():
        hist[deg] = hist.get(deg, 0) + 1
    return {
        "num_vertices": len(degree),
        "num_edges": edges.total_edges(),
        "degree_histogram": hist,
    }
