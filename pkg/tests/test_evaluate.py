import math

import numpy as np
import pytest

import sigaug as sg
from sigaug.evaluate import (ExperimentConfig, MetricReport, NEG_LABEL, POS_LABEL,
                             run_experiment, sweep)
from sigaug.sgnn import TrainConfig


def tiny_experiment(congress_path, **kw):
    defaults = dict(dataset=str(congress_path), augmentation="none", runs=1,
                    base_seed=0, train=TrainConfig(epochs=5))
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestAuc:
    def test_perfect_separation(self):
        assert sg.auc([0.9, 0.8, 0.2, 0.1], ["pos", "pos", "neg", "neg"]) == 1.0

    def test_all_ties(self):
        assert sg.auc([0.5, 0.5, 0.5, 0.5], ["pos", "neg", "pos", "neg"]) == 0.5

    def test_hand_counted_example(self):
        assert sg.auc([0.9, 0.4, 0.6, 0.1], ["pos", "neg", "pos", "neg"]) == 1.0
        # swap one pair's order: 3 of 4 (pos, neg) pairs ranked correctly,
        # plus the swapped one contributes 0
        assert sg.auc([0.9, 0.7, 0.6, 0.1], ["pos", "neg", "pos", "neg"]) == 0.75

    def test_single_class_refused(self):
        with pytest.raises(ValueError, match="both classes"):
            sg.auc([0.4, 0.6], ["pos", "pos"])

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(3)
        scores = rng.normal(size=40)
        labels = ["pos" if rng.random() < 0.5 else "neg" for _ in range(40)]
        if "pos" not in labels:
            labels[0] = "pos"
        if "neg" not in labels:
            labels[1] = "neg"
        base = sg.auc(scores, labels)
        assert sg.auc(np.exp(3 * scores), labels) == pytest.approx(base, abs=1e-12)


class TestClassificationMetrics:
    def test_perfect(self):
        m = sg.classification_metrics(["pos", "neg"], ["pos", "neg"])
        assert all(v == 1.0 for v in m.values())

    def test_all_positive_predictions(self):
        m = sg.classification_metrics(["pos"] * 4, ["pos", "pos", "neg", "neg"])
        assert m["neg_recall"] == 0.0 and m["neg_precision"] == 0.0 and m["neg_f1"] == 0.0

    def test_confusion_arithmetic(self):
        m = sg.classification_metrics(["pos", "pos", "neg", "neg"],
                                      ["pos", "neg", "neg", "neg"])
        assert m["neg_precision"] == 1.0
        assert m["neg_recall"] == pytest.approx(2 / 3)
        assert m["neg_f1"] == pytest.approx(0.8)
        assert m["f1_binary_avg"] == pytest.approx((2 / 3 + 0.8) / 2)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            sg.classification_metrics(["pos"], ["pos", "neg"])

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        pred = ["pos" if rng.random() < 0.6 else "neg" for _ in range(30)]
        truth = ["pos" if rng.random() < 0.5 else "neg" for _ in range(30)]
        base = sg.classification_metrics(pred, truth)
        perm = rng.permutation(30)
        shuffled = sg.classification_metrics([pred[i] for i in perm],
                                             [truth[i] for i in perm])
        assert shuffled == base


class TestPredictTestEdges:
    def test_symmetric_logits_give_half(self):
        Z = np.zeros((2, 4))
        theta = np.zeros((3, 8))
        scores, labels = sg.predict_test_edges(Z, theta, [(0, 1, 1)])
        assert scores == [0.5] and labels == [POS_LABEL]

    def test_aligned_classifier_scores_high(self):
        Z = np.array([[1.0, 0.0], [1.0, 0.0]])
        theta = np.zeros((3, 4))
        theta[0] = [1.0, 0.0, 1.0, 0.0]  # positive row aligned with the feature
        scores, _ = sg.predict_test_edges(Z, theta, [(0, 1, -1)])
        assert scores[0] > 0.5

    def test_three_edge_scalar_recomputation(self):
        rng = np.random.default_rng(7)
        Z = rng.normal(size=(4, 2))
        theta = rng.normal(size=(3, 4))
        test = [(0, 1, 1), (3, 2, -1), (1, 3, 1)]
        scores, labels = sg.predict_test_edges(Z, theta, test)
        for (u, v, s), got in zip(test, scores):
            i, j = min(u, v), max(u, v)
            f = list(Z[i]) + list(Z[j])
            lp = sum(a * b for a, b in zip(theta[0], f))
            ln = sum(a * b for a, b in zip(theta[1], f))
            expected = 1.0 / (1.0 + math.exp(ln - lp))
            assert got == pytest.approx(expected, rel=1e-12)
        assert labels == [POS_LABEL, NEG_LABEL, POS_LABEL]

    def test_empty_test_refused(self):
        with pytest.raises(ValueError):
            sg.predict_test_edges(np.zeros((2, 2)), np.zeros((3, 4)), [])


class TestMetricReport:
    def test_roundtrip_lossless(self):
        report = MetricReport(
            per_run={name: [0.123456789012345, 0.9] for name in
                     ("auc", "f1_binary_avg", "neg_precision", "neg_recall",
                      "neg_f1", "pos_f1")},
            aux={"thresholds_unmet": [0.0, 1.0]},
        )
        lines = report.to_machine_lines()
        parsed = MetricReport.from_machine_lines(lines)
        assert parsed.per_run == report.per_run and parsed.aux == report.aux
        assert parsed.to_machine_lines() == lines

    def test_std_conventions(self):
        report = MetricReport(per_run={"auc": [0.5]})
        assert report.std("auc") == 0.0
        report2 = MetricReport(per_run={"auc": [0.4, 0.6]})
        assert report2.std("auc") == pytest.approx(np.std([0.4, 0.6], ddof=1))
        assert min(report2.per_run["auc"]) <= report2.mean("auc") <= max(report2.per_run["auc"])


class TestRunExperiment:
    def test_deterministic(self, congress_path):
        cfg = tiny_experiment(congress_path)
        a = run_experiment(cfg)
        b = run_experiment(cfg)
        assert a.to_machine_lines() == b.to_machine_lines()

    def test_single_run_is_prefix_of_five(self, congress_path):
        one = run_experiment(tiny_experiment(congress_path, runs=1))
        five = run_experiment(tiny_experiment(congress_path, runs=5))
        for name in one.per_run:
            assert five.per_run[name][0] == one.per_run[name][0]
            assert len(five.per_run[name]) == 5

    def test_sigaug_records_aux(self, congress_path):
        rep = run_experiment(tiny_experiment(congress_path, augmentation="sigaug"))
        assert "thresholds_unmet" in rep.aux and "test_pair_hits" in rep.aux

    def test_errors_carry_run_index(self, tmp_path):
        bad = tmp_path / "no_negatives.txt"
        bad.write_text("0 1 1\n1 2 1\n2 3 1\n")
        cfg = ExperimentConfig(dataset=str(bad), runs=1, train=TrainConfig(epochs=1))
        with pytest.raises(RuntimeError, match="run 0"):
            run_experiment(cfg)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(dataset="x", augmentation="dropmessage")
        with pytest.raises(ValueError):
            ExperimentConfig(dataset="x", runs=0)
        with pytest.raises(ValueError):
            ExperimentConfig(dataset="x", mu=0.95)


class TestSweep:
    def test_single_cell_matches_run_experiment(self, congress_path):
        cfg = tiny_experiment(congress_path, augmentation="sigaug", runs=2)
        rows = sweep(cfg, {"mu": [0.7], "theta": [1 / 9], "delta": [0.6]})
        direct = run_experiment(cfg)
        assert len(rows) == 1
        assert rows[0][3] == pytest.approx(direct.mean("auc"))

    def test_rows_in_grid_order(self, congress_path):
        cfg = tiny_experiment(congress_path, augmentation="sigaug", runs=1)
        rows = sweep(cfg, {"mu": [0.1, 0.5], "theta": [1 / 9], "delta": [0.2, 0.4]})
        assert [(r[0], r[2]) for r in rows] == [(0.1, 0.2), (0.1, 0.4), (0.5, 0.2), (0.5, 0.4)]

    def test_cap_refusal(self, congress_path):
        cfg = tiny_experiment(congress_path)
        with pytest.raises(ValueError, match="8 cells"):
            sweep(cfg, {"mu": [0.1, 0.2], "theta": [0.5, 1.0], "delta": [0.2, 0.4]},
                  max_cells=4)

    def test_missing_axis(self, congress_path):
        cfg = tiny_experiment(congress_path)
        with pytest.raises(ValueError, match="delta"):
            sweep(cfg, {"mu": [0.1], "theta": [0.5], "delta": []})

    def test_perturbation_beats_identity(self, congress_path):
        cfg = tiny_experiment(congress_path, augmentation="sigaug", runs=2,
                              train=TrainConfig(epochs=30))
        rows = sweep(cfg, {"mu": [0.7], "theta": [1 / 9], "delta": [0.0, 0.6]})
        assert rows[1][3] >= rows[0][3]


class TestBoundaryDiagnostics:
    def test_equal_vectors(self):
        theta = np.ones((3, 4))
        d = sg.boundary_diagnostics(theta)
        assert d["ratio"] == pytest.approx(1.0)

    def test_zero_negative_vector(self):
        theta = np.zeros((3, 4))
        theta[0] = 1.0
        assert sg.boundary_diagnostics(theta)["ratio"] == math.inf

    def test_reports_trained_norms(self, congress_graph):
        # reported diagnostic on a trained classifier: norms are finite and
        # positive; the imbalance direction itself is not acceptance-gated
        split = sg.split_edges(congress_graph, 0.2, 0)
        res = sg.train(split.train, TrainConfig(epochs=20))
        d = sg.boundary_diagnostics(res.params.theta)
        assert d["norm_pos"] > 0 and d["norm_neg"] > 0 and np.isfinite(d["ratio"])
