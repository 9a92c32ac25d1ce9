"""Compact two-branch signed GNN with a hand-derived training objective.

The network keeps separate positive and negative embedding branches. Layer 1
aggregates raw features over each branch's own neighbor set; deeper layers
cross the branches (the positive branch pulls positive embeddings of positive
neighbors and negative embeddings of negative neighbors, the negative branch
the converse). AGGREGATE is the mean over the neighbor set, COMBINE is
concatenate-then-linear-then-tanh. Training is full-batch gradient descent on a
weighted 3-class logistic loss over node pairs plus two hinge terms separating
positive/negative neighbors from non-adjacent pairs; gradients are derived by
hand and validated against central finite differences.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .graph import SignedGraph, split_adjacency

logger = logging.getLogger(__name__)

CLASSES = ("+", "-", "?")
_CLS_INDEX = {c: i for i, c in enumerate(CLASSES)}

# enumerate all non-adjacent pairs (instead of rejection sampling) below this
_NULL_POOL_CUTOFF = 200_000


@dataclass
class TrainConfig:
    """Hyperparameters of the trainer; defaults are the desk-scale settings."""

    epochs: int = 100
    learning_rate: float = 0.01
    lam: float = 5.0
    weight_decay: float = 1e-4
    seed: int = 0
    embed_dim: int = 64
    feature_dim: int = 64
    layers: int = 2
    class_weights: Optional[dict] = None
    feature_mode: str = "random_fixed"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.embed_dim < 2 or self.embed_dim % 2:
            raise ValueError("embed_dim must be an even integer >= 2")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.feature_mode != "random_fixed":
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")
        if self.class_weights is not None:
            if any(w <= 0 for w in self.class_weights.values()):
                raise ValueError("class weights must be positive")


@dataclass
class ModelParams:
    """Per-layer weights of both branches plus the pair classifier.

    wpos[0]/wneg[0] have shape (d/2, 2*D); deeper layers (d/2, d); theta has one
    weight row per class in (+, -, ?) over the concatenated pair feature (2*d).
    """

    wpos: list
    wneg: list
    theta: np.ndarray

    def __post_init__(self):
        if len(self.wpos) != len(self.wneg) or not self.wpos:
            raise ValueError("branch layer lists must be non-empty and equal length")
        h = self.wpos[0].shape[0]
        for l, (wp, wn) in enumerate(zip(self.wpos, self.wneg)):
            if wp.shape != wn.shape or wp.shape[0] != h:
                raise ValueError(f"layer {l} weight shapes do not chain: {wp.shape} vs {wn.shape}")
            if l > 0 and wp.shape[1] != 2 * h:
                raise ValueError(f"layer {l} expects fan-in {2 * h}, got {wp.shape[1]}")
        if self.theta.shape != (len(CLASSES), 4 * h):
            raise ValueError(f"classifier shape {self.theta.shape} != {(len(CLASSES), 4 * h)}")
        for a in self.arrays():
            if not np.all(np.isfinite(a)):
                raise ValueError("model parameters contain non-finite entries")

    @property
    def layers(self) -> int:
        return len(self.wpos)

    @property
    def half_dim(self) -> int:
        return self.wpos[0].shape[0]

    @property
    def embed_dim(self) -> int:
        return 2 * self.half_dim

    @property
    def feature_dim(self) -> int:
        return self.wpos[0].shape[1] // 2

    def arrays(self) -> list:
        return list(self.wpos) + list(self.wneg) + [self.theta]

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.wpos],
                           [w.copy() for w in self.wneg], self.theta.copy())


@dataclass
class EmbeddingPair:
    """Positive- and negative-branch embedding matrices, one row per node."""

    zpos: np.ndarray
    zneg: np.ndarray

    def __post_init__(self):
        if self.zpos.shape != self.zneg.shape:
            raise ValueError("branch embeddings must have equal shapes")
        if not (np.all(np.isfinite(self.zpos)) and np.all(np.isfinite(self.zneg))):
            raise ValueError("embeddings contain non-finite entries")


@dataclass
class TrainResult:
    params: ModelParams
    embeddings: EmbeddingPair
    loss_trace: list = field(default_factory=list)

    def __iter__(self):  # allow `params, embeddings = train(...)`
        return iter((self.params, self.embeddings))


@dataclass(frozen=True)
class EgoTree:
    """Level-by-level signed unrolling of a node's neighborhood."""

    graph: SignedGraph
    root: int
    sources: tuple


def synth_features(n: int, dim: int, seed: int) -> np.ndarray:
    """Fixed-seed uniform features in [-a, a] with a = sqrt(3/dim).

    The bound makes E[||row||^2] = 1, so rows have roughly unit norm at any
    dimension.
    """
    if dim < 1:
        raise ValueError("feature dimension must be >= 1")
    a = math.sqrt(3.0 / dim)
    return np.random.default_rng(seed).uniform(-a, a, size=(n, dim))


def concat(pair: EmbeddingPair) -> np.ndarray:
    """Final embedding: positive-branch columns then negative-branch columns."""
    return np.hstack([pair.zpos, pair.zneg])


def init_params(feature_dim: int, embed_dim: int, layers: int, rng) -> ModelParams:
    """Glorot-uniform branch weights, zero classifier (uniform initial softmax)."""
    h = embed_dim // 2
    wpos, wneg = [], []
    for branch in (wpos, wneg):
        for l in range(layers):
            fan_in = 2 * feature_dim if l == 0 else 2 * h
            limit = math.sqrt(6.0 / (fan_in + h))
            branch.append(rng.uniform(-limit, limit, size=(h, fan_in)))
    theta = np.zeros((len(CLASSES), 2 * embed_dim))
    return ModelParams(wpos, wneg, theta)


class _GraphTensors:
    """Row-normalized propagation operators for one graph, built once."""

    def __init__(self, g: SignedGraph):
        apos, aneg = split_adjacency(g)
        apos = apos.astype(np.float64)
        aneg = aneg.astype(np.float64)
        degp = np.asarray(apos.sum(axis=1)).ravel()
        degn = np.asarray(aneg.sum(axis=1)).ravel()
        degt = degp + degn
        self.rp1 = self._row_scale(apos, degp)
        self.rn1 = self._row_scale(aneg, degn)
        self.rpd = self._row_scale(apos, degt)
        self.rnd = self._row_scale(aneg, degt)
        self.rpd_t = self.rpd.T.tocsr()
        self.rnd_t = self.rnd.T.tocsr()

    @staticmethod
    def _row_scale(mat, deg):
        inv = np.zeros_like(deg)
        nz = deg > 0
        inv[nz] = 1.0 / deg[nz]
        return (sp.diags(inv) @ mat).tocsr()


def _forward_cached(tensors: _GraphTensors, params: ModelParams, x: np.ndarray):
    hp = hn = None
    cache = []
    for l in range(params.layers):
        if l == 0:
            ap = tensors.rp1 @ x
            an = tensors.rn1 @ x
            catp = np.hstack([x, ap])
            catn = np.hstack([x, an])
        else:
            ap = tensors.rpd @ hp + tensors.rnd @ hn
            an = tensors.rpd @ hn + tensors.rnd @ hp
            catp = np.hstack([hp, ap])
            catn = np.hstack([hn, an])
        hp = np.tanh(catp @ params.wpos[l].T)
        hn = np.tanh(catn @ params.wneg[l].T)
        cache.append((catp, catn, hp, hn))
    return EmbeddingPair(hp, hn), cache


def forward(g: SignedGraph, params: ModelParams, x: np.ndarray) -> EmbeddingPair:
    """Run the two-branch network; isolated nodes aggregate the zero vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (g.n, params.feature_dim):
        raise ValueError(f"feature shape {x.shape} != {(g.n, params.feature_dim)}")
    pair, _ = _forward_cached(_GraphTensors(g), params, x)
    return pair


def _backward(tensors: _GraphTensors, params: ModelParams, cache, d_hp, d_hn):
    """Backprop through the layer stack; returns per-layer weight gradients."""
    h = params.half_dim
    dwp = [None] * params.layers
    dwn = [None] * params.layers
    for l in range(params.layers - 1, -1, -1):
        catp, catn, hp, hn = cache[l]
        dup = d_hp * (1.0 - hp * hp)
        dun = d_hn * (1.0 - hn * hn)
        dwp[l] = dup.T @ catp
        dwn[l] = dun.T @ catn
        if l == 0:
            break
        dcatp = dup @ params.wpos[l]
        dcatn = dun @ params.wneg[l]
        dap = dcatp[:, h:]
        dan = dcatn[:, h:]
        d_hp = dcatp[:, :h] + tensors.rpd_t @ dap + tensors.rnd_t @ dan
        d_hn = dcatn[:, :h] + tensors.rnd_t @ dap + tensors.rpd_t @ dan
    return dwp, dwn


def _class_weights(samples, override: Optional[dict]) -> dict:
    if override is not None:
        return dict(override)
    counts: dict[str, int] = {}
    for _, _, c in samples:
        counts[c] = counts.get(c, 0) + 1
    total = len(samples)
    k = len(counts)
    return {c: total / (k * cnt) for c, cnt in counts.items()}


def _hinge_triples(samples):
    """Anchor-matched (anchor, edge partner, null partner) triples.

    An edge sample and a "?" sample pair up whenever they share an endpoint;
    the shared node is the anchor. Deterministic in sample order.
    """
    null_at: dict[int, list[int]] = {}
    for u, v, c in samples:
        if c == "?":
            null_at.setdefault(u, []).append(v)
            null_at.setdefault(v, []).append(u)
    pos_triples, neg_triples = [], []
    for u, v, c in samples:
        if c == "?":
            continue
        out = pos_triples if c == "+" else neg_triples
        for k in null_at.get(u, ()):
            out.append((u, v, k))
        for k in null_at.get(v, ()):
            out.append((v, u, k))
    return pos_triples, neg_triples


def _loss_grads(Z, samples, theta, lam, weights, warn_missing=True):
    """Classifier + hinge values with gradients w.r.t. Z and theta.

    Returns (ce, hinge, dZ, dTheta); `hinge` already carries the lam factor.
    Regularization is handled by the callers.
    """
    n, d = Z.shape
    dZ = np.zeros_like(Z)
    dTheta = np.zeros_like(theta)
    ce = 0.0
    count = len(samples)
    if count:
        ii = np.fromiter((min(u, v) for u, v, _ in samples), dtype=np.int64, count=count)
        jj = np.fromiter((max(u, v) for u, v, _ in samples), dtype=np.int64, count=count)
        yy = np.fromiter((_CLS_INDEX[c] for _, _, c in samples), dtype=np.int64, count=count)
        ww = np.fromiter((weights[c] for _, _, c in samples), dtype=np.float64, count=count)
        feats = np.hstack([Z[ii], Z[jj]])
        logits = feats @ theta.T
        logits -= logits.max(axis=1, keepdims=True)
        expl = np.exp(logits)
        probs = expl / expl.sum(axis=1, keepdims=True)
        picked = np.clip(probs[np.arange(count), yy], 1e-300, None)
        ce = float((ww * -np.log(picked)).sum() / count)
        grad_logits = probs.copy()
        grad_logits[np.arange(count), yy] -= 1.0
        grad_logits *= (ww / count)[:, None]
        dTheta = grad_logits.T @ feats
        dfeats = grad_logits @ theta
        np.add.at(dZ, ii, dfeats[:, :d])
        np.add.at(dZ, jj, dfeats[:, d:])
    hinge = 0.0
    pos_triples, neg_triples = _hinge_triples(samples)
    for triples, flip, name in ((pos_triples, 1.0, "(+,?)"), (neg_triples, -1.0, "(-,?)")):
        if not triples:
            if warn_missing:
                logger.warning("no %s hinge pairs in sample set; term contributes 0", name)
            continue
        a = np.array([t[0] for t in triples])
        j = np.array([t[1] for t in triples])
        k = np.array([t[2] for t in triples])
        dj = Z[a] - Z[j]
        dk = Z[a] - Z[k]
        margin = flip * ((dj * dj).sum(axis=1) - (dk * dk).sum(axis=1))
        hinge += lam * float(np.maximum(margin, 0.0).mean())
        coef = (lam / len(triples)) * (margin > 0.0)
        np.add.at(dZ, a, (coef * flip * 2.0)[:, None] * (dj - dk))
        np.add.at(dZ, j, (coef * flip * -2.0)[:, None] * dj)
        np.add.at(dZ, k, (coef * flip * 2.0)[:, None] * dk)
    return ce, hinge, dZ, dTheta


def loss(Z: np.ndarray, samples, params: ModelParams, cfg: TrainConfig) -> float:
    """Full objective value: weighted 3-class CE + lam * hinge terms + L2 reg.

    Samples are (u, v, cls) with cls in {"+", "-", "?"}; the pair feature is the
    concatenation [Z_min(u,v) || Z_max(u,v)].
    """
    weights = _class_weights(samples, cfg.class_weights)
    ce, hinge, _, _ = _loss_grads(np.asarray(Z, dtype=np.float64), samples,
                                  params.theta, cfg.lam, weights)
    reg = cfg.weight_decay * sum(float((a * a).sum()) for a in params.arrays())
    return ce + hinge + reg


def _null_pool(g: SignedGraph):
    """All non-adjacent pairs when cheap to enumerate, else None (use rejection)."""
    total = g.n * (g.n - 1) // 2
    if total - g.num_edges == 0:
        return []
    if total <= _NULL_POOL_CUTOFF:
        return [(u, v) for u in range(g.n) for v in range(u + 1, g.n) if not g.has_edge(u, v)]
    return None


def _draw_nulls(g: SignedGraph, pool, count: int, rng):
    """`count` uniformly random non-adjacent pairs (with replacement)."""
    if pool is not None:
        if not pool:
            return []
        idx = rng.integers(0, len(pool), size=count)
        return [(pool[i][0], pool[i][1], "?") for i in idx]
    out = []
    while len(out) < count:
        cand = rng.integers(0, g.n, size=(2 * count, 2))
        for u, v in cand:
            if u == v or g.has_edge(int(u), int(v)):
                continue
            a, b = (int(u), int(v)) if u < v else (int(v), int(u))
            out.append((a, b, "?"))
            if len(out) == count:
                break
    return out


def _grad_step(tensors, params, x, samples, weights, cfg, warn_missing=True):
    """One full-batch evaluation: loss value and gradients for every array."""
    pair, cache = _forward_cached(tensors, params, x)
    Z = np.hstack([pair.zpos, pair.zneg])
    ce, hinge, dZ, dTheta = _loss_grads(Z, samples, params.theta, cfg.lam, weights,
                                        warn_missing=warn_missing)
    h = params.half_dim
    dwp, dwn = _backward(tensors, params, cache, dZ[:, :h], dZ[:, h:])
    wd = cfg.weight_decay
    reg = 0.0
    for arrs, grads in ((params.wpos, dwp), (params.wneg, dwn)):
        for a, ga in zip(arrs, grads):
            ga += 2.0 * wd * a
            reg += wd * float((a * a).sum())
    dTheta = dTheta + 2.0 * wd * params.theta
    reg += wd * float((params.theta * params.theta).sum())
    return ce + hinge + reg, dwp, dwn, dTheta


def train(g: SignedGraph, cfg: TrainConfig, features: Optional[np.ndarray] = None,
          samples_from: Optional[SignedGraph] = None,
          init: Optional[ModelParams] = None) -> TrainResult:
    """Full-batch gradient descent for cfg.epochs steps; deterministic per seed.

    Messages propagate over g. Supervision comes from `samples_from` (default
    g): its edges are the labeled pairs, and "?" samples are redrawn every
    epoch as uniformly random pairs non-adjacent in it, |edges| of them. An
    augmented graph is trained with supervision from the unperturbed one so
    synthetic edges steer propagation but never become labels. Returns the
    final parameters, final embeddings and the per-epoch loss trace.
    """
    sup = samples_from if samples_from is not None else g
    if sup.n != g.n:
        raise ValueError(f"supervision graph has {sup.n} nodes, expected {g.n}")
    if sup.num_pos == 0:
        raise ValueError("training requires at least one positive edge")
    if sup.num_neg == 0:
        raise ValueError("training requires at least one negative edge")
    if features is None:
        x = synth_features(g.n, cfg.feature_dim, cfg.seed)
    else:
        x = np.asarray(features, dtype=np.float64)
        if x.shape[0] != g.n:
            raise ValueError(f"feature rows {x.shape[0]} != node count {g.n}")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(x.shape[1], cfg.embed_dim, cfg.layers, rng)
    if init is not None:
        params = init.copy()  # warm start; rng stream position stays identical
    tensors = _GraphTensors(g)
    edge_samples = [(u, v, "+" if s > 0 else "-") for u, v, s in sup.edges()]
    pool = _null_pool(sup)
    m = sup.num_edges
    counts = {"+": sup.num_pos, "-": sup.num_neg}
    if pool is None or pool:
        counts["?"] = m
    total = sum(counts.values())
    weights = cfg.class_weights or {c: total / (len(counts) * cnt) for c, cnt in counts.items()}
    lr = cfg.learning_rate
    trace = []
    for epoch in range(cfg.epochs):
        samples = edge_samples + _draw_nulls(sup, pool, m, rng)
        value, dwp, dwn, dtheta = _grad_step(tensors, params, x, samples, weights, cfg,
                                             warn_missing=epoch == 0)
        trace.append(value)
        params = ModelParams(
            [w - lr * gw for w, gw in zip(params.wpos, dwp)],
            [w - lr * gw for w, gw in zip(params.wneg, dwn)],
            params.theta - lr * dtheta,
        )
    pair, _ = _forward_cached(tensors, params, x)
    return TrainResult(params=params, embeddings=pair, loss_trace=trace)


def _params_from_flat(template: ModelParams, flat: np.ndarray) -> ModelParams:
    arrays = []
    offset = 0
    for a in template.arrays():
        arrays.append(flat[offset:offset + a.size].reshape(a.shape).copy())
        offset += a.size
    nl = template.layers
    return ModelParams(arrays[:nl], arrays[nl:2 * nl], arrays[-1])


def gradient_check(g: SignedGraph, cfg: TrainConfig, epsilon: float = 1e-5,
                   num_coords: int = 60) -> float:
    """Max relative error between analytic and central-FD gradients.

    Checks num_coords (>= 50) randomly chosen parameter coordinates on one
    frozen sample batch at a generic parameter point. Relative error is
    |g_fd - g_an| / max(|g_fd|, |g_an|, 1e-8).
    """
    if not 1e-6 <= epsilon <= 1e-4:
        raise ValueError(f"epsilon must be in [1e-6, 1e-4], got {epsilon}")
    x = synth_features(g.n, cfg.feature_dim, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    params = init_params(x.shape[1], cfg.embed_dim, cfg.layers, rng)
    # zero classifier would silence the CE -> Z path; move to a generic point
    params = ModelParams(params.wpos, params.wneg,
                         rng.uniform(-0.5, 0.5, size=params.theta.shape))
    tensors = _GraphTensors(g)
    samples = [(u, v, "+" if s > 0 else "-") for u, v, s in g.edges()]
    samples += _draw_nulls(g, _null_pool(g), max(g.num_edges, 1), rng)
    weights = _class_weights(samples, cfg.class_weights)

    _, dwp, dwn, dtheta = _grad_step(tensors, params, x, samples, weights, cfg)
    analytic = np.concatenate([a.ravel() for a in dwp + dwn + [dtheta]])
    flat = np.concatenate([a.ravel() for a in params.arrays()])

    def value_at(vec):
        p = _params_from_flat(params, vec)
        pair, _ = _forward_cached(tensors, p, x)
        Z = np.hstack([pair.zpos, pair.zneg])
        ce, hinge, _, _ = _loss_grads(Z, samples, p.theta, cfg.lam, weights)
        reg = cfg.weight_decay * sum(float((a * a).sum()) for a in p.arrays())
        return ce + hinge + reg

    picks = rng.choice(flat.size, size=min(max(num_coords, 50), flat.size), replace=False)
    worst = 0.0
    for idx in picks:
        bump = np.zeros_like(flat)
        bump[idx] = epsilon
        fd = (value_at(flat + bump) - value_at(flat - bump)) / (2.0 * epsilon)
        an = analytic[idx]
        err = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
        worst = max(worst, err)
    return worst


PARAMS_MAGIC = b"SIGAUG-PARAMS-1\n"


def save_params(params: ModelParams, path):
    """Write parameters as a versioned binary blob (magic header + arrays)."""
    with open(path, "wb") as fh:
        fh.write(PARAMS_MAGIC)
        fh.write(f"layers={params.layers}\n".encode("ascii"))
        for a in params.arrays():
            np.lib.format.write_array(fh, np.ascontiguousarray(a))


def load_params(path) -> ModelParams:
    """Read a parameter blob written by save_params; validates the magic."""
    with open(path, "rb") as fh:
        magic = fh.read(len(PARAMS_MAGIC))
        if magic != PARAMS_MAGIC:
            raise ValueError(f"{path}: not a parameter blob (bad magic {magic!r})")
        header = fh.readline().decode("ascii").strip()
        if not header.startswith("layers="):
            raise ValueError(f"{path}: malformed parameter header {header!r}")
        layers = int(header.split("=", 1)[1])
        arrays = [np.lib.format.read_array(fh) for _ in range(2 * layers + 1)]
    return ModelParams(arrays[:layers], arrays[layers:2 * layers], arrays[-1])


def save_embeddings(pair: EmbeddingPair, path):
    """One node per line: node id then the concatenated embedding values."""
    Z = concat(pair)
    with open(path, "w") as fh:
        for i, row in enumerate(Z):
            fh.write(" ".join([str(i)] + [repr(float(v)) for v in row]) + "\n")


def load_embeddings(path) -> EmbeddingPair:
    """Read an embedding text matrix back into the two branch halves."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if int(fields[0]) != len(rows):
                raise ValueError(f"{path}:{lineno}: node ids must be dense and ordered")
            rows.append([float(v) for v in fields[1:]])
    Z = np.array(rows, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] % 2:
        raise ValueError(f"{path}: expected an even embedding dimension, got shape {Z.shape}")
    half = Z.shape[1] // 2
    return EmbeddingPair(Z[:, :half].copy(), Z[:, half:].copy())


def build_k_hop_ego_tree(g: SignedGraph, root: int, k: int) -> EgoTree:
    """Unroll a node's signed neighborhood into a k-level tree.

    Every node copy at level l < k spawns a fresh copy of each source-graph
    neighbor (including the one it came from) at level l+1, connected by a tree
    edge carrying the source edge's sign. Children are created in (sign,
    source-id) order so structurally matching trees get matching positions.
    """
    if not 0 <= root < g.n:
        raise ValueError(f"root {root} out of range for n={g.n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    sources = [root]
    edges = []
    frontier = [(0, root)]
    for _level in range(k):
        nxt = []
        for tree_id, src in frontier:
            children = sorted(
                [(-1, w) for w in g.neg_neighbors(src)] + [(1, w) for w in g.pos_neighbors(src)]
            )
            for s, w in children:
                new_id = len(sources)
                sources.append(w)
                edges.append((tree_id, new_id, s))
                nxt.append((new_id, w))
        frontier = nxt
    return EgoTree(graph=SignedGraph(len(sources), edges), root=0, sources=tuple(sources))
