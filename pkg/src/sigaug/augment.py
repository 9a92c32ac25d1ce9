"""Selective signed-graph augmenter.

Turns branch embeddings into edge-propensity matrices, then repeatedly perturbs
the extreme entries: the best non-edge is added and the worst existing edge
removed, per sign. Negative candidates pass through the edge-utility filter
evaluated on the current working graph: additions need a keep verdict, removals
a discard verdict (high-utility negatives are retained, noise negatives go). A
regulator steers the running ratio of positive to negative perturbations toward
theta_target and stops once the perturbed-edge share reaches delta_target.
Finally the two perturbed adjacencies are fused back into one signed graph.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .balance import DISCARD, KEEP, MU_MAX, filter_edge, pair_utility
from .graph import SignedGraph
from .sgnn import EmbeddingPair

logger = logging.getLogger(__name__)

CONTINUE = "continue"
STOP = "stop"

ADD = "add"
REMOVE = "remove"
NOT_GATED = "n/a"

# finite stand-in that never wins an argmax over cosine-derived scores
DIAG_SENTINEL = -1e30

_RECIPROCAL_GUARD = 1e-8
_RATIO_TOL = 1e-9


@dataclass(frozen=True)
class ProbabilityMatrices:
    """Edge-propensity matrices per sign, diagonals masked to a sentinel."""

    mpos: np.ndarray
    mneg: np.ndarray


@dataclass(frozen=True)
class EPRConfig:
    """Perturbation-regulator targets plus the utility gate threshold."""

    theta_target: float
    delta_target: float
    mu: float
    eta: int = 4

    def __post_init__(self):
        if self.theta_target <= 0:
            raise ValueError("theta_target must be positive")
        if not 0.0 <= self.delta_target <= 1.0:
            raise ValueError("delta_target must be in [0, 1]")
        if not 0.0 <= self.mu <= MU_MAX:
            raise ValueError(f"mu must be in [0, {MU_MAX}]")
        if not 3 <= self.eta <= 6:
            raise ValueError("eta must be in [3, 6]")


@dataclass(frozen=True)
class LogEntry:
    action: str
    sign: int
    u: int
    v: int
    probability: float
    euf_verdict: str

    @property
    def performed(self) -> bool:
        """Whether the edge change actually happened.

        The utility verdict describes the edge itself: a "discard" edge cannot
        be added (gated addition), a "keep" edge cannot be removed (vetoed
        removal). Ungated actions carry "n/a" and always happen.
        """
        if self.euf_verdict == NOT_GATED:
            return True
        return self.euf_verdict == (KEEP if self.action == ADD else DISCARD)


class PerturbationLog:
    """Ordered perturbation record with running kept-counters per sign."""

    def __init__(self):
        self.entries: list[LogEntry] = []
        self.pos_kept = 0
        self.neg_kept = 0

    def append(self, entry: LogEntry):
        self.entries.append(entry)
        if entry.performed:
            if entry.sign > 0:
                self.pos_kept += 1
            else:
                self.neg_kept += 1

    @property
    def total_kept(self) -> int:
        return self.pos_kept + self.neg_kept

    def pairs(self) -> set:
        return {(e.u, e.v) for e in self.entries}

    def to_lines(self) -> list[str]:
        return [f"{i} {e.action} {e.sign} {e.u} {e.v} {e.probability!r} {e.euf_verdict}"
                for i, e in enumerate(self.entries)]

    def __len__(self):
        return len(self.entries)


@dataclass
class AugmentedGraph:
    """Fused result plus the pre-fusion adjacencies and the full action log."""

    graph: SignedGraph
    apos_aug: sp.csr_matrix
    aneg_aug: sp.csr_matrix
    log: PerturbationLog
    thresholds_unmet: bool = False


def edge_probabilities(pair: EmbeddingPair) -> ProbabilityMatrices:
    """Cosine scores per branch: mpos = Zp Zp^T, mneg = 1 / (Zn Zn^T).

    Rows are L2-normalized first. The reciprocal keeps its sign; magnitudes
    below 1e-8 are clamped to +-1e-8 before dividing so mneg stays finite.
    Zero-norm rows yield zero similarity (with a warning) and fall under the
    same guard. Diagonals are set to a large negative sentinel so they never
    win an argmax.
    """

    def normalize(z):
        norms = np.linalg.norm(z, axis=1, keepdims=True)
        bad = norms[:, 0] < 1e-300
        if bad.any():
            logger.warning("%d zero-norm embedding rows; similarities guarded", int(bad.sum()))
        safe = np.where(norms > 0, norms, 1.0)
        return z / safe

    zp = normalize(np.asarray(pair.zpos, dtype=np.float64))
    zn = normalize(np.asarray(pair.zneg, dtype=np.float64))
    mpos = zp @ zp.T
    sim = zn @ zn.T
    guarded = np.where(np.abs(sim) < _RECIPROCAL_GUARD,
                       np.where(sim < 0, -_RECIPROCAL_GUARD, _RECIPROCAL_GUARD), sim)
    mneg = 1.0 / guarded
    mpos = (mpos + mpos.T) / 2.0
    mneg = (mneg + mneg.T) / 2.0
    np.fill_diagonal(mpos, DIAG_SENTINEL)
    np.fill_diagonal(mneg, DIAG_SENTINEL)
    return ProbabilityMatrices(mpos=mpos, mneg=mneg)


def _ratio_error(pos: int, neg: int, theta: float) -> float:
    """Distance to the target sign ratio, in edges (numerator or denominator)."""
    return min(abs(pos - theta * neg), abs(neg - pos / theta))


def _ratio_ok(pos: int, neg: int, theta: float) -> bool:
    return _ratio_error(pos, neg, theta) <= 1.0 + _RATIO_TOL


def epr_check(log: PerturbationLog, cfg: EPRConfig, original_edge_count: int) -> str:
    """Stop once the perturbed share reaches delta_target and the realized
    sign ratio sits within one edge of theta_target."""
    if original_edge_count <= 0:
        raise ValueError("original_edge_count must be positive")
    share = log.total_kept / original_edge_count
    if share >= cfg.delta_target - _RATIO_TOL and _ratio_ok(log.pos_kept, log.neg_kept,
                                                            cfg.theta_target):
        return STOP
    return CONTINUE


class AugmentationState:
    """Mutable working state of one augmentation run (single-owner)."""

    def __init__(self, g: SignedGraph, probs: ProbabilityMatrices, cfg: EPRConfig):
        n = g.n
        if probs.mpos.shape != (n, n) or probs.mneg.shape != (n, n):
            raise ValueError("probability matrices do not match the graph size")
        self.n = n
        self.cfg = cfg
        self.probs = probs
        self.original_edge_count = g.num_edges
        self.pos_adj = [set(g.pos_neighbors(u)) for u in range(n)]
        self.neg_adj = [set(g.neg_neighbors(u)) for u in range(n)]
        self.log = PerturbationLog()
        self.last_round_actions = 0
        upper = np.triu(np.ones((n, n), dtype=bool), k=1)
        self.addable = upper.copy()
        self.pos_removable = np.zeros((n, n), dtype=bool)
        self.neg_removable = np.zeros((n, n), dtype=bool)
        for u, v, s in g.edges():
            self.addable[u, v] = False
            (self.pos_removable if s > 0 else self.neg_removable)[u, v] = True

    def _mark_spent(self, u, v):
        self.addable[u, v] = False
        self.pos_removable[u, v] = False
        self.neg_removable[u, v] = False

    def _steer_allows(self, sign: int) -> bool:
        """Skip an action when it would drift the running sign ratio past the
        target by more than one edge (and would not move it closer)."""
        p, m = self.log.pos_kept, self.log.neg_kept
        p2, m2 = (p + 1, m) if sign > 0 else (p, m + 1)
        theta = self.cfg.theta_target
        return _ratio_ok(p2, m2, theta) or (
            _ratio_error(p2, m2, theta) < _ratio_error(p, m, theta) - _RATIO_TOL)

    def apos_matrix(self) -> sp.csr_matrix:
        return self._matrix(self.pos_adj, 1)

    def aneg_matrix(self) -> sp.csr_matrix:
        return self._matrix(self.neg_adj, -1)

    def _matrix(self, adj, value) -> sp.csr_matrix:
        rows, cols = [], []
        for u in range(self.n):
            for v in adj[u]:
                rows.append(u)
                cols.append(v)
        data = np.full(len(rows), value, dtype=np.int64)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))


def _argbest(matrix, mask, maximize):
    if not mask.any():
        return None
    fill = -np.inf if maximize else np.inf
    vals = np.where(mask, matrix, fill)
    flat = int(vals.argmax() if maximize else vals.argmin())
    return divmod(flat, matrix.shape[1])


def perturb_step(state: AugmentationState) -> AugmentationState:
    """One perturbation round: up to four actions (add/remove per sign).

    Positive actions are ungated. Negative candidates pass through the utility
    filter on the current working graph: an addition happens only when the
    filter keeps the edge, a removal only when the filter discards it (noise
    negatives go, load-bearing ones are retained). Gated-away candidates are
    still logged and marked spent. Ties in the argmax/argmin break toward the
    lexicographically smallest pair. Sets last_round_actions = 0 when nothing
    could be done, which is the stop signal to the driver.
    """
    cfg = state.cfg
    mp, mn = state.probs.mpos, state.probs.mneg
    actions = 0

    if state._steer_allows(1):
        pick = _argbest(mp, state.addable, maximize=True)
        if pick is not None:
            u, v = pick
            state._mark_spent(u, v)
            state.pos_adj[u].add(v)
            state.pos_adj[v].add(u)
            state.log.append(LogEntry(ADD, 1, u, v, float(mp[u, v]), NOT_GATED))
            actions += 1

    if state._steer_allows(1):
        pick = _argbest(mp, state.pos_removable, maximize=False)
        if pick is not None:
            u, v = pick
            state._mark_spent(u, v)
            state.pos_adj[u].discard(v)
            state.pos_adj[v].discard(u)
            state.log.append(LogEntry(REMOVE, 1, u, v, float(mp[u, v]), NOT_GATED))
            actions += 1

    if state._steer_allows(-1):
        pick = _argbest(mn, state.addable, maximize=True)
        if pick is not None:
            u, v = pick
            state._mark_spent(u, v)
            util = pair_utility(state.pos_adj, state.neg_adj, u, v, cfg.eta)
            verdict = filter_edge(util, cfg.mu)
            if verdict == KEEP:
                state.neg_adj[u].add(v)
                state.neg_adj[v].add(u)
            state.log.append(LogEntry(ADD, -1, u, v, float(mn[u, v]), verdict))
            actions += 1

    if state._steer_allows(-1):
        pick = _argbest(mn, state.neg_removable, maximize=False)
        if pick is not None:
            u, v = pick
            state._mark_spent(u, v)
            util = pair_utility(state.pos_adj, state.neg_adj, u, v, cfg.eta)
            verdict = filter_edge(util, cfg.mu)
            if verdict == DISCARD:  # only noise negatives actually get removed
                state.neg_adj[u].discard(v)
                state.neg_adj[v].discard(u)
            state.log.append(LogEntry(REMOVE, -1, u, v, float(mn[u, v]), verdict))
            actions += 1

    state.last_round_actions = actions
    return state


def fuse(apos_aug, aneg_aug, probs: ProbabilityMatrices) -> SignedGraph:
    """Merge the perturbed per-sign adjacencies into one signed graph.

    Per pair: both zero -> no edge; exactly one nonzero -> that sign; both
    nonzero -> +1 iff mpos > mneg, else -1.
    """
    apos = sp.csr_matrix(apos_aug)
    aneg = sp.csr_matrix(aneg_aug)
    if apos.shape != aneg.shape or apos.shape[0] != apos.shape[1]:
        raise ValueError("adjacency shapes differ or are not square")
    for name, m in (("positive", apos), ("negative", aneg)):
        if (m != m.T).nnz != 0:
            raise ValueError(f"{name} adjacency is not symmetric")
    n = apos.shape[0]
    pc = apos.tocoo()
    nc = aneg.tocoo()
    pairs = set()
    for r, c, d in zip(pc.row, pc.col, pc.data):
        if r < c and d:
            pairs.add((int(r), int(c)))
    for r, c, d in zip(nc.row, nc.col, nc.data):
        if r < c and d:
            pairs.add((int(r), int(c)))
    edges = []
    for u, v in sorted(pairs):
        has_pos = apos[u, v] != 0
        has_neg = aneg[u, v] != 0
        if has_pos and has_neg:
            sign = 1 if probs.mpos[u, v] > probs.mneg[u, v] else -1
        elif has_pos:
            sign = 1
        else:
            sign = -1
        edges.append((u, v, sign))
    return SignedGraph(n, edges)


def augment(g: SignedGraph, pair: EmbeddingPair, cfg: EPRConfig) -> AugmentedGraph:
    """Drive perturbation rounds to the regulator's fixed point, then fuse.

    Deterministic for identical inputs. When the candidate pools run dry before
    both regulator targets are met, the best-effort result is returned with
    thresholds_unmet set.
    """
    if g.n == 0:
        raise ValueError("cannot augment an empty graph")
    probs = edge_probabilities(pair)
    state = AugmentationState(g, probs, cfg)
    unmet = False
    while epr_check(state.log, cfg, state.original_edge_count) == CONTINUE:
        perturb_step(state)
        if state.last_round_actions == 0:
            unmet = True
            break
    apos = state.apos_matrix()
    aneg = state.aneg_matrix()
    fused = fuse(apos, aneg, probs)
    return AugmentedGraph(graph=fused, apos_aug=apos, aneg_aug=aneg,
                          log=state.log, thresholds_unmet=unmet)
