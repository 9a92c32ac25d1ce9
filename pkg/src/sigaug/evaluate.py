"""Metrics, the multi-run experiment protocol, sweeps, and diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import product
from typing import Optional

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from .augment import EPRConfig, augment
from .balance import MU_MAX
from .graph import SignedGraph, build_graph, load_edge_list, split_edges
from .sgnn import TrainConfig, concat, train

POS_LABEL = "pos"
NEG_LABEL = "neg"

METRIC_NAMES = ("auc", "f1_binary_avg", "neg_precision", "neg_recall", "neg_f1", "pos_f1")

REPORT_HEADER = (
    "# columns: metric,run,value",
    "# std is the sample standard deviation (ddof=1); 0.0 for a single run",
    "# auc scores are positive-class probabilities renormalized over {pos, neg}",
)


@dataclass
class ExperimentConfig:
    """Everything one evaluation needs: data, pipeline switches, and targets."""

    dataset: str
    input_format: str = "signed"
    backbone: str = "sgcn_like"
    augmentation: str = "none"
    mu: float = 0.7
    theta: float = 1.0 / 9.0
    delta: float = 0.6
    eta: int = 4
    runs: int = 5
    base_seed: int = 0
    test_fraction: float = 0.2
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.backbone != "sgcn_like":
            raise ValueError(f"unknown backbone {self.backbone!r}")
        if self.augmentation not in ("none", "sigaug"):
            raise ValueError(f"unknown augmentation {self.augmentation!r}")
        if not 0.0 <= self.mu <= MU_MAX:
            raise ValueError(f"mu must be in [0, {MU_MAX}]")
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must be in [0, 1]")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")


@dataclass
class MetricReport:
    """Per-run metric values plus any auxiliary per-run counters."""

    per_run: dict
    aux: dict = field(default_factory=dict)

    @property
    def runs(self) -> int:
        return len(next(iter(self.per_run.values()))) if self.per_run else 0

    def values(self, name: str) -> list:
        return self.per_run[name]

    def mean(self, name: str) -> float:
        return float(np.mean(self.per_run[name]))

    def std(self, name: str) -> float:
        vals = self.per_run[name]
        if len(vals) < 2:
            return 0.0
        return float(np.std(vals, ddof=1))

    def to_machine_lines(self) -> list[str]:
        lines = list(REPORT_HEADER)
        for name in METRIC_NAMES:
            if name not in self.per_run:
                continue
            for r, v in enumerate(self.per_run[name]):
                lines.append(f"{name},{r},{v!r}")
            lines.append(f"{name},mean,{self.mean(name)!r}")
            lines.append(f"{name},std,{self.std(name)!r}")
        for name in sorted(self.aux):
            for r, v in enumerate(self.aux[name]):
                lines.append(f"{name},{r},{v!r}")
        return lines

    @staticmethod
    def from_machine_lines(lines) -> "MetricReport":
        per_run: dict = {}
        aux: dict = {}
        for line in lines:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, run, value = line.split(",")
            if run in ("mean", "std"):
                continue
            target = per_run if name in METRIC_NAMES else aux
            target.setdefault(name, []).append(float(value))
        return MetricReport(per_run=per_run, aux=aux)

    def to_table(self) -> str:
        rows = [f"{'metric':<16}{'mean':>12}{'std':>12}  per-run"]
        for name in METRIC_NAMES:
            if name not in self.per_run:
                continue
            per = " ".join(f"{v:.4f}" for v in self.per_run[name])
            rows.append(f"{name:<16}{self.mean(name):>12.4f}{self.std(name):>12.4f}  {per}")
        for name in sorted(self.aux):
            per = " ".join(f"{v:g}" for v in self.aux[name])
            rows.append(f"{name:<16}{'-':>12}{'-':>12}  {per}")
        return "\n".join(rows)


def auc(scores, labels) -> float:
    """Probability that a random positive-labeled score beats a random
    negative-labeled one, ties counted half (rank-statistic form)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = list(labels)
    if len(scores) != len(labels) or len(labels) == 0:
        raise ValueError("scores and labels must be equal-length and non-empty")
    pos = np.array([lab == POS_LABEL for lab in labels])
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def classification_metrics(pred, truth) -> dict:
    """Per-class precision/recall/F1 with the 0/0 -> 0 convention."""
    pred = list(pred)
    truth = list(truth)
    if len(pred) != len(truth):
        raise ValueError("pred and truth lengths differ")
    if not pred:
        raise ValueError("empty prediction list")

    def prf(cls):
        tp = sum(1 for p, t in zip(pred, truth) if p == cls and t == cls)
        fp = sum(1 for p, t in zip(pred, truth) if p == cls and t != cls)
        fn = sum(1 for p, t in zip(pred, truth) if p != cls and t == cls)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        return prec, rec, f1

    pos_p, pos_r, pos_f1 = prf(POS_LABEL)
    neg_p, neg_r, neg_f1 = prf(NEG_LABEL)
    return {
        "f1_binary_avg": (pos_f1 + neg_f1) / 2.0,
        "neg_precision": neg_p,
        "neg_recall": neg_r,
        "neg_f1": neg_f1,
        "pos_f1": pos_f1,
    }


def predict_test_edges(Z: np.ndarray, classifier: np.ndarray, test):
    """Score held-out edges: softmax positive-class probability renormalized
    over {pos, neg} on the pair feature [Z_min || Z_max]."""
    test = list(test)
    if not test:
        raise ValueError("empty test set")
    ii = np.array([min(u, v) for u, v, _ in test])
    jj = np.array([max(u, v) for u, v, _ in test])
    feats = np.hstack([Z[ii], Z[jj]])
    logits = feats @ classifier.T
    scores = expit(logits[:, 0] - logits[:, 1])
    labels = [POS_LABEL if s > 0 else NEG_LABEL for _, _, s in test]
    return scores.tolist(), labels


def _load_dataset(cfg: ExperimentConfig) -> SignedGraph:
    with open(cfg.dataset, "rb") as fh:
        records = load_edge_list(fh, cfg.input_format)
    return build_graph(records)


def _run_once(g: SignedGraph, cfg: ExperimentConfig, seed: int):
    split = split_edges(g, cfg.test_fraction, seed)
    tc = replace(cfg.train, seed=seed)
    result = train(split.train, tc)
    aux = {}
    if cfg.augmentation == "sigaug":
        aug = augment(split.train, result.embeddings,
                      EPRConfig(theta_target=cfg.theta, delta_target=cfg.delta,
                                mu=cfg.mu, eta=cfg.eta))
        # feed the augmented graph back into the model: messages flow over the
        # perturbed topology, supervision stays on the untouched train split so
        # synthetic edges never become labels, and training continues from the
        # first-stage parameters
        result = train(aug.graph, tc, samples_from=split.train, init=result.params)
        test_pairs = {(u, v) for u, v, _ in split.test}
        hits = sum(1 for e in aug.log.entries if (e.u, e.v) in test_pairs)
        aux = {"thresholds_unmet": float(aug.thresholds_unmet),
               "test_pair_hits": float(hits)}
    Z = concat(result.embeddings)
    scores, labels = predict_test_edges(Z, result.params.theta, split.test)
    preds = [POS_LABEL if s >= 0.5 else NEG_LABEL for s in scores]
    metrics = classification_metrics(preds, labels)
    metrics["auc"] = auc(scores, labels)
    return metrics, aux


def run_experiment(cfg: ExperimentConfig, graph: Optional[SignedGraph] = None) -> MetricReport:
    """The full protocol: per run, split -> train -> (augment -> retrain) ->
    predict -> metrics, with seed = base_seed + run index; then aggregate."""
    g = graph if graph is not None else _load_dataset(cfg)
    per_run: dict = {name: [] for name in METRIC_NAMES}
    aux: dict = {}
    for r in range(cfg.runs):
        try:
            metrics, run_aux = _run_once(g, cfg, cfg.base_seed + r)
        except Exception as exc:
            raise RuntimeError(f"run {r} failed: {exc}") from exc
        for name in METRIC_NAMES:
            per_run[name].append(metrics[name])
        for name, value in run_aux.items():
            aux.setdefault(name, []).append(value)
    return MetricReport(per_run=per_run, aux=aux)


def sweep(cfg: ExperimentConfig, grid: dict, max_cells: int = 200):
    """Evaluate run_experiment over the (mu, theta, delta) grid, rows in grid
    order. Refuses grids larger than max_cells."""
    for key in ("mu", "theta", "delta"):
        if key not in grid or not grid[key]:
            raise ValueError(f"grid is missing non-empty axis {key!r}")
    cells = len(grid["mu"]) * len(grid["theta"]) * len(grid["delta"])
    if cells > max_cells:
        raise ValueError(f"grid has {cells} cells, more than the cap of {max_cells}")
    g = _load_dataset(cfg)
    rows = []
    for mu, theta, delta in product(grid["mu"], grid["theta"], grid["delta"]):
        report = run_experiment(replace(cfg, mu=mu, theta=theta, delta=delta), graph=g)
        rows.append((mu, theta, delta, report.mean("auc"), report.std("auc")))
    return rows


def boundary_diagnostics(classifier: np.ndarray) -> dict:
    """L2 norms of the positive/negative class weight vectors and their ratio
    (reported as +inf when the negative vector is zero)."""
    norm_pos = float(np.linalg.norm(classifier[0]))
    norm_neg = float(np.linalg.norm(classifier[1]))
    ratio = float("inf") if norm_neg == 0.0 else norm_pos / norm_neg
    return {"norm_pos": norm_pos, "norm_neg": norm_neg, "ratio": ratio}
