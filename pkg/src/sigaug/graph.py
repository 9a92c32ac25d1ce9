"""Signed-graph data model: edge-list ingestion, symmetrization, splits, adjacency."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp

POS = 1
NEG = -1

CONFLICT_POLICIES = ("negative_wins", "last_wins", "majority")


class ParseError(ValueError):
    """Malformed edge-list input. Carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class RatingRecord:
    """One directed record as read from an edge-list file, labels kept verbatim."""

    source: str
    target: str
    rating: int
    timestamp: Optional[int] = None


class SignedGraph:
    """Undirected signed graph over dense node ids 0..n-1.

    Edges are unordered pairs carrying a sign in {+1, -1}; an absent pair means
    no edge. Instances are immutable after construction and safe to share across
    threads. Neighbor lookup split by sign is O(1) per node.
    """

    __slots__ = ("n", "_sign", "_pos", "_neg", "_edges", "num_pos", "num_neg")

    def __init__(self, n: int, edges: Iterable[tuple[int, int, int]] = ()):
        if n < 0:
            raise ValueError("node count must be non-negative")
        self.n = n
        sign: dict[tuple[int, int], int] = {}
        pos = [set() for _ in range(n)]
        neg = [set() for _ in range(n)]
        for u, v, s in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) references a node id outside 0..{n - 1}")
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if s not in (POS, NEG):
                raise ValueError(f"edge ({u}, {v}) has sign {s}, expected +1 or -1")
            key = (u, v) if u < v else (v, u)
            if key in sign:
                raise ValueError(f"duplicate edge {key}")
            sign[key] = s
            (pos if s == POS else neg)[u].add(v)
            (pos if s == POS else neg)[v].add(u)
        self._sign = sign
        self._pos = [frozenset(x) for x in pos]
        self._neg = [frozenset(x) for x in neg]
        self._edges = tuple((u, v, sign[(u, v)]) for (u, v) in sorted(sign))
        self.num_pos = sum(1 for s in sign.values() if s == POS)
        self.num_neg = len(sign) - self.num_pos

    @property
    def num_edges(self) -> int:
        return len(self._sign)

    def edges(self) -> tuple[tuple[int, int, int], ...]:
        """All edges as (u, v, sign) with u < v, sorted by (u, v)."""
        return self._edges

    def sign(self, u: int, v: int) -> int:
        """Sign of edge {u, v}, or 0 when absent."""
        key = (u, v) if u < v else (v, u)
        return self._sign.get(key, 0)

    def has_edge(self, u: int, v: int) -> bool:
        return self.sign(u, v) != 0

    def pos_neighbors(self, u: int) -> frozenset:
        return self._pos[u]

    def neg_neighbors(self, u: int) -> frozenset:
        return self._neg[u]

    def neighbors(self, u: int) -> frozenset:
        return self._pos[u] | self._neg[u]

    def degree(self, u: int) -> int:
        return len(self._pos[u]) + len(self._neg[u])

    def without_edge(self, u: int, v: int) -> "SignedGraph":
        """A copy with edge {u, v} removed (error if absent)."""
        if not self.has_edge(u, v):
            raise ValueError(f"no edge ({u}, {v}) to remove")
        key = (u, v) if u < v else (v, u)
        return SignedGraph(self.n, (e for e in self._edges if (e[0], e[1]) != key))

    def with_edge(self, u: int, v: int, s: int) -> "SignedGraph":
        """A copy with edge {u, v} of sign s added (error if present)."""
        if self.has_edge(u, v):
            raise ValueError(f"edge ({u}, {v}) already present")
        key = (u, v) if u < v else (v, u)
        return SignedGraph(self.n, self._edges + ((key[0], key[1], s),))

    def __eq__(self, other):
        if not isinstance(other, SignedGraph):
            return NotImplemented
        return self.n == other.n and self._sign == other._sign

    def __hash__(self):
        return hash((self.n, self._edges))

    def __repr__(self):
        return f"SignedGraph(n={self.n}, pos={self.num_pos}, neg={self.num_neg})"


@dataclass(frozen=True)
class EdgeSplit:
    """Disjoint train/test partition of a graph's edges."""

    train: SignedGraph
    test: tuple[tuple[int, int, int], ...]
    seed: int
    test_fraction: float


def _split_fields(line: str) -> list[str]:
    if "," in line:
        return [f.strip() for f in line.split(",")]
    return line.split()


def _parse_int(field: str, lineno: int, what: str) -> int:
    try:
        return int(field)
    except ValueError:
        raise ParseError(lineno, f"non-numeric {what} {field!r}") from None


def load_edge_list(source, format: str = "signed") -> list[RatingRecord]:
    """Parse an edge-list stream into records.

    Each data line holds `source target weight [timestamp]`, comma- or
    whitespace-separated; lines starting with '#' or '%' are comments. With
    format="rating" the weight is an integer rating in [-10, 10]; with
    format="signed" it must already be +1 or -1. `source` may be a file object
    (text or binary), bytes, or str content.
    """
    if format not in ("rating", "signed"):
        raise ValueError(f"unknown format {format!r}")
    data = source.read() if hasattr(source, "read") else source
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    records = []
    for lineno, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("%"):
            continue
        fields = _split_fields(line)
        if len(fields) not in (3, 4):
            raise ParseError(lineno, f"expected 3 or 4 fields, got {len(fields)}")
        src, dst = fields[0], fields[1]
        if not src or not dst:
            raise ParseError(lineno, "empty node label")
        rating = _parse_int(fields[2], lineno, "weight")
        if format == "rating" and not -10 <= rating <= 10:
            raise ParseError(lineno, f"rating {rating} outside [-10, 10]")
        if format == "signed" and rating not in (POS, NEG):
            raise ParseError(lineno, f"sign {rating} not in {{+1, -1}}")
        ts = _parse_int(fields[3], lineno, "timestamp") if len(fields) == 4 else None
        records.append(RatingRecord(src, dst, rating, ts))
    return records


def build_graph(records: list[RatingRecord], conflict_policy: str = "negative_wins") -> SignedGraph:
    """Symmetrize directed records into a SignedGraph.

    Labels are mapped to dense ids in first-appearance order (source before
    target, record order). Ratings > 0 become +1 edges, ratings <= 0 become -1.
    Self-loops are dropped. Duplicate directed records over the same unordered
    pair are collapsed per `conflict_policy`:

    - negative_wins: any -1 among the duplicates wins (default; negative
      information is scarcer and more informative),
    - last_wins: the last record in file order wins,
    - majority: the more frequent sign wins, ties resolved to -1.
    """
    if conflict_policy not in CONFLICT_POLICIES:
        raise ValueError(f"unknown conflict policy {conflict_policy!r}")
    ids: dict[str, int] = {}
    for rec in records:
        for label in (rec.source, rec.target):
            if label not in ids:
                ids[label] = len(ids)
    pair_signs: dict[tuple[int, int], list[int]] = {}
    for rec in records:
        u, v = ids[rec.source], ids[rec.target]
        if u == v:
            continue
        key = (u, v) if u < v else (v, u)
        pair_signs.setdefault(key, []).append(POS if rec.rating > 0 else NEG)
    edges = []
    for (u, v), signs in pair_signs.items():
        if conflict_policy == "negative_wins":
            s = NEG if NEG in signs else POS
        elif conflict_policy == "last_wins":
            s = signs[-1]
        else:
            s = POS if sum(signs) > 0 else NEG
        edges.append((u, v, s))
    return SignedGraph(len(ids), edges)


def split_edges(g: SignedGraph, test_fraction: float, seed: int) -> EdgeSplit:
    """Hold out round(test_fraction * |edges|) edges uniformly at random.

    Deterministic for a given seed. The train graph keeps all n nodes.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    m = g.num_edges
    if m < 2:
        raise ValueError("graph needs at least 2 edges to split")
    k = int(math.floor(test_fraction * m + 0.5))
    rng = np.random.default_rng(seed)
    picked = set(rng.choice(m, size=k, replace=False).tolist())
    edges = g.edges()
    test = tuple(edges[i] for i in sorted(picked))
    train = SignedGraph(g.n, (edges[i] for i in range(m) if i not in picked))
    return EdgeSplit(train=train, test=test, seed=seed, test_fraction=test_fraction)


def split_adjacency(g: SignedGraph):
    """Decompose into symmetric 0/1 csr matrices (Apos, Aneg) with disjoint supports."""
    prows, pcols = [], []
    nrows, ncols = [], []
    for u, v, s in g.edges():
        if s == POS:
            prows += [u, v]
            pcols += [v, u]
        else:
            nrows += [u, v]
            ncols += [v, u]
    shape = (g.n, g.n)
    apos = sp.csr_matrix((np.ones(len(prows), dtype=np.int64), (prows, pcols)), shape=shape)
    aneg = sp.csr_matrix((np.ones(len(nrows), dtype=np.int64), (nrows, ncols)), shape=shape)
    return apos, aneg


def graph_stats(g: SignedGraph) -> dict:
    """Node/edge counts and the negative-edge share of a built graph."""
    m = g.num_edges
    return {
        "n": g.n,
        "pos_edges": g.num_pos,
        "neg_edges": g.num_neg,
        "neg_ratio": g.num_neg / m if m else 0.0,
    }


def record_stats(records: list[RatingRecord]) -> dict:
    """Raw (pre-symmetrization) counts straight off the record list."""
    labels = set()
    pos = 0
    for rec in records:
        labels.add(rec.source)
        labels.add(rec.target)
        if rec.rating > 0:
            pos += 1
    neg = len(records) - pos
    total = len(records)
    return {
        "n": len(labels),
        "pos_edges": pos,
        "neg_edges": neg,
        "neg_ratio": neg / total if total else 0.0,
    }
