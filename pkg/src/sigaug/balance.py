"""Structural-balance engine.

Counts balanced/unbalanced signed walks closing through each node pair, scores
edges by the share of balanced cycles they sit in, gates edges on that score,
and provides the message-entropy diagnostics used to reason about perturbation.

Counting semantics are walk-based: the length-n matrices are built from
adjacency products, so for n >= 4 they include degenerate back-and-forth walks.
The enumeration oracle reproduces exactly the same semantics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .graph import SignedGraph, split_adjacency

KEEP = "keep"
DISCARD = "discard"

MU_MAX = 0.9
ETA_MIN = 3
ETA_MAX = 6

# below this dimension the product recursion runs on dense int64 arrays
_DENSE_CUTOFF = 512

# hard cap for the exhaustive enumeration oracle
_ORACLE_MAX_NODES = 14


@dataclass(frozen=True)
class CycleCountSet:
    """Per-pair walk-closure counts for every cycle length 3..eta.

    cb[n][u, v] counts length-(n-1) walks u -> v with an odd number of negative
    edges (these close into balanced cycles through a negative edge {u, v});
    cu[n] counts the even-sign walks; c[n] = cb[n] + cu[n]. All matrices are
    symmetric int64 csr for symmetric inputs.
    """

    eta: int
    cb: dict[int, sp.csr_matrix]
    cu: dict[int, sp.csr_matrix]
    c: dict[int, sp.csr_matrix]


@dataclass(frozen=True)
class UtilityScores:
    """Balanced-cycle share per requested edge; None marks a zero-cycle edge."""

    mu: float
    scores: dict[tuple[int, int], Optional[float]]

    def verdict(self, u: int, v: int) -> str:
        key = (u, v) if u < v else (v, u)
        return filter_edge(self.scores[key], self.mu)

    @property
    def kept(self) -> int:
        return sum(1 for s in self.scores.values() if filter_edge(s, self.mu) == KEEP)

    @property
    def discarded(self) -> int:
        return len(self.scores) - self.kept

    @property
    def undefined(self) -> int:
        return sum(1 for s in self.scores.values() if s is None)


def path_sign(signs: Sequence[int]) -> int:
    """Cumulative product of edge signs along a path: +1 iff negatives are even."""
    if len(signs) == 0:
        raise ValueError("path must contain at least one edge")
    out = 1
    for s in signs:
        if s not in (1, -1):
            raise ValueError(f"sign {s} not in {{+1, -1}}")
        out *= s
    return out


def _check_adjacency_inputs(apos, aneg, eta):
    apos = sp.csr_matrix(apos, dtype=np.int64)
    aneg = sp.csr_matrix(aneg, dtype=np.int64)
    if apos.shape != aneg.shape or apos.shape[0] != apos.shape[1]:
        raise ValueError(f"adjacency shapes differ or are not square: {apos.shape} vs {aneg.shape}")
    if not isinstance(eta, int) or not ETA_MIN <= eta <= ETA_MAX:
        raise ValueError(f"eta must be an integer in [{ETA_MIN}, {ETA_MAX}], got {eta}")
    for name, m in (("positive", apos), ("negative", aneg)):
        if (m != m.T).nnz != 0:
            raise ValueError(f"{name} adjacency is not symmetric")
        if m.nnz and not np.all(m.data == 1):
            raise ValueError(f"{name} adjacency must be 0/1")
    if apos.multiply(aneg).nnz != 0:
        raise ValueError("positive and negative adjacency supports overlap")
    return apos, aneg


def count_cycles(apos, aneg, eta: int = 4) -> CycleCountSet:
    """Signed walk-closure counting via the adjacency-product recursion.

    Base case (length-2 walks): cb(3) = Apos*Aneg + Aneg*Apos and
    cu(3) = Apos^2 + Aneg^2. Each further step appends one edge: a positive
    edge preserves walk sign, a negative edge flips it, so
    cb(n) = cb(n-1)*Apos + cu(n-1)*Aneg and cu(n) = cb(n-1)*Aneg + cu(n-1)*Apos.
    Diagonals are retained but carry no meaning for edge scoring.
    """
    apos, aneg = _check_adjacency_inputs(apos, aneg, eta)
    n = apos.shape[0]
    dense = n < _DENSE_CUTOFF
    ap = apos.toarray() if dense else apos
    an = aneg.toarray() if dense else aneg
    cb = {3: ap @ an + an @ ap}
    cu = {3: ap @ ap + an @ an}
    for k in range(4, eta + 1):
        cb[k] = cb[k - 1] @ ap + cu[k - 1] @ an
        cu[k] = cb[k - 1] @ an + cu[k - 1] @ ap
    to_csr = (lambda m: sp.csr_matrix(m)) if dense else (lambda m: m.tocsr())
    cb = {k: to_csr(v) for k, v in cb.items()}
    cu = {k: to_csr(v) for k, v in cu.items()}
    c = {k: (cb[k] + cu[k]).tocsr() for k in cb}
    return CycleCountSet(eta=eta, cb=cb, cu=cu, c=c)


def oracle_count_cycles(g: SignedGraph, eta: int = 4) -> CycleCountSet:
    """Reference counter: explicit enumeration of signed walks, no matrix products.

    Walks may revisit nodes, matching the product semantics of count_cycles.
    Refuses graphs with more than 14 nodes.
    """
    if g.n > _ORACLE_MAX_NODES:
        raise ValueError(f"enumeration oracle refuses n={g.n} > {_ORACLE_MAX_NODES}")
    if not isinstance(eta, int) or not ETA_MIN <= eta <= ETA_MAX:
        raise ValueError(f"eta must be an integer in [{ETA_MIN}, {ETA_MAX}], got {eta}")
    n = g.n
    adj = [sorted([(w, 1) for w in g.pos_neighbors(u)] + [(w, -1) for w in g.neg_neighbors(u)])
           for u in range(n)]
    # counts[length][parity] with parity 1 = odd number of negative edges
    counts = {length: (np.zeros((n, n), dtype=np.int64), np.zeros((n, n), dtype=np.int64))
              for length in range(2, eta)}
    max_len = eta - 1

    def walk(start, node, length, neg_parity):
        for nxt, s in adj[node]:
            parity = neg_parity ^ (s < 0)
            if length + 1 >= 2:
                counts[length + 1][parity][start, nxt] += 1
            if length + 1 < max_len:
                walk(start, nxt, length + 1, parity)

    for start in range(n):
        walk(start, start, 0, 0)
    cb = {k: sp.csr_matrix(counts[k - 1][1]) for k in range(3, eta + 1)}
    cu = {k: sp.csr_matrix(counts[k - 1][0]) for k in range(3, eta + 1)}
    c = {k: (cb[k] + cu[k]).tocsr() for k in cb}
    return CycleCountSet(eta=eta, cb=cb, cu=cu, c=c)


def edge_utility(counts: CycleCountSet, u: int, v: int) -> Optional[float]:
    """Share of balanced cycles among all cycles through the pair (u, v).

    Sums lengths 3..eta. Returns None when the pair sits in no cycle at all
    (zero denominator) rather than inventing a score.
    """
    num = 0
    den = 0
    for k in range(3, counts.eta + 1):
        num += int(counts.cb[k][u, v])
        den += int(counts.c[k][u, v])
    if den == 0:
        return None
    return num / den


def filter_edge(utility: Optional[float], mu: float) -> str:
    """Keep iff utility is undefined (cycle-free) or >= mu."""
    if not 0.0 <= mu <= MU_MAX:
        raise ValueError(f"mu must be in [0, {MU_MAX}], got {mu}")
    if utility is None:
        return KEEP
    return KEEP if utility >= mu else DISCARD


def pair_utility(pos_adj: Sequence[set], neg_adj: Sequence[set], u: int, v: int,
                 eta: int = 4) -> Optional[float]:
    """Incremental utility of the pair (u, v) on neighbor-set adjacency.

    Counts the same walk quantities as count_cycles/edge_utility but only for
    the one pair, in O(local degree) work, so the augmenter can score a
    candidate edge against the current working graph without rebuilding the
    full count matrices. The candidate edge itself is not assumed present.
    """
    if not isinstance(eta, int) or not ETA_MIN <= eta <= ETA_MAX:
        raise ValueError(f"eta must be an integer in [{ETA_MIN}, {ETA_MAX}], got {eta}")
    odd: dict[int, int] = {}
    even: dict[int, int] = {}
    for w in pos_adj[u]:
        even[w] = even.get(w, 0) + 1
    for w in neg_adj[u]:
        odd[w] = odd.get(w, 0) + 1
    num = 0
    den = 0
    for _length in range(2, eta):
        odd2: dict[int, int] = {}
        even2: dict[int, int] = {}
        for w, cnt in odd.items():
            for x in pos_adj[w]:
                odd2[x] = odd2.get(x, 0) + cnt
            for x in neg_adj[w]:
                even2[x] = even2.get(x, 0) + cnt
        for w, cnt in even.items():
            for x in pos_adj[w]:
                even2[x] = even2.get(x, 0) + cnt
            for x in neg_adj[w]:
                odd2[x] = odd2.get(x, 0) + cnt
        odd, even = odd2, even2
        num += odd.get(v, 0)
        den += odd.get(v, 0) + even.get(v, 0)
    if den == 0:
        return None
    return num / den


def compute_utilities(g: SignedGraph, eta: int = 4, mu: float = 0.7,
                      pairs=None) -> UtilityScores:
    """Score edges of g (default: all negative edges) by balanced-cycle share."""
    if not 0.0 <= mu <= MU_MAX:
        raise ValueError(f"mu must be in [0, {MU_MAX}], got {mu}")
    counts = count_cycles(*split_adjacency(g), eta)
    if pairs is None:
        pairs = [(u, v) for u, v, s in g.edges() if s < 0]
    scores = {}
    for u, v in pairs:
        key = (u, v) if u < v else (v, u)
        scores[key] = edge_utility(counts, key[0], key[1])
    return UtilityScores(mu=mu, scores=scores)


def entropy_shares(g: SignedGraph) -> np.ndarray:
    """Message-traffic share per edge: endpoint-degree sums, normalized.

    Stands in for per-edge delivery counts, is topology-derived and
    deterministic, and reduces to the uniform distribution on regular graphs.
    Aligned with g.edges() order.
    """
    if g.num_edges == 0:
        raise ValueError("entropy shares are undefined for an edgeless graph")
    shares = np.array([g.degree(u) + g.degree(v) for u, v, _ in g.edges()], dtype=np.float64)
    return shares / shares.sum()


def shannon_entropy(g: SignedGraph) -> float:
    """Entropy (natural log) of the per-edge message-share distribution."""
    p = entropy_shares(g)
    return float(-(p * np.log(p)).sum())


def expected_entropy_after_perturbation(p, delta: float) -> float:
    """Expected entropy after perturbing an edge share delta of the graph.

    E = -delta*log(delta) + (1-delta) * sum_i -p_i*log((1-delta)*p_i), with the
    0*log(0) = 0 convention so delta = 0 returns the plain entropy of p.
    """
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must be in [0, 1), got {delta}")
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("p is not a probability distribution")
    pz = p[p > 0]
    h = float(-(pz * np.log(pz)).sum())
    if delta == 0.0:
        return h
    tail = float(-(pz * np.log((1.0 - delta) * pz)).sum())
    return -delta * math.log(delta) + (1.0 - delta) * tail
