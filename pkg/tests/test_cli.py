import subprocess
import sys

import pytest

import sigaug as sg
from sigaug.cli import (EXIT_COMPONENT, EXIT_IO, EXIT_OK, EXIT_USAGE,
                        format_config, parse_config_text, resolve_config)


def run_cli(*args, **kw):
    return subprocess.run([sys.executable, "-m", "sigaug", *args],
                          capture_output=True, text=True, **kw)


def parse_kv(text):
    out = {}
    for line in text.splitlines():
        if "=" in line and not line.startswith("#"):
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


BALANCED_TRI_FILE = "0 1 1\n1 2 -1\n0 2 -1\n"
C4_FILE = "0 1 1\n1 2 1\n2 3 1\n0 3 -1\n"


class TestStats:
    def test_congress_counts(self, congress_path):
        proc = run_cli("stats", "--dataset", str(congress_path), "--quiet")
        assert proc.returncode == EXIT_OK
        kv = parse_kv(proc.stdout)
        assert kv["n"] == "219" and kv["pos_edges"] == "413" and kv["neg_edges"] == "107"
        assert kv["built_n"] == "219"

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        proc = run_cli("stats", "--dataset", str(path), "--quiet")
        assert proc.returncode == EXIT_OK
        assert parse_kv(proc.stdout)["n"] == "0"

    def test_missing_file(self):
        proc = run_cli("stats", "--dataset", "/nonexistent/file.txt", "--quiet")
        assert proc.returncode == EXIT_IO

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0 1 1\nbroken\n")
        proc = run_cli("stats", "--dataset", str(path), "--quiet")
        assert proc.returncode == EXIT_IO
        assert "line 2" in proc.stderr


class TestUsage:
    def test_unknown_flag(self):
        proc = run_cli("stats", "--bogus-flag", "1")
        assert proc.returncode == EXIT_USAGE
        assert "usage" in proc.stderr.lower()

    def test_unknown_subcommand(self):
        assert run_cli("frobnicate").returncode == EXIT_USAGE


class TestBalanceCmd:
    def test_balanced_triangle_kept(self, tmp_path):
        path = tmp_path / "tri.txt"
        path.write_text(BALANCED_TRI_FILE)
        proc = run_cli("balance", "--dataset", str(path), "--mu", "0.7", "--quiet")
        assert proc.returncode == EXIT_OK
        kv = parse_kv(proc.stdout)
        assert kv["kept"] == "2" and kv["discarded"] == "0"

    def test_mu_zero_keeps_all_defined(self, tmp_path):
        path = tmp_path / "tri.txt"
        path.write_text("0 1 1\n1 2 1\n0 2 -1\n")  # unbalanced: utility 0.0
        proc = run_cli("balance", "--dataset", str(path), "--mu", "0", "--quiet")
        kv = parse_kv(proc.stdout)
        assert kv["kept"] == "1" and kv["discarded"] == "0"

    def test_eta_changes_report(self, tmp_path):
        # on the one-negative 4-cycle the negative edge closes no triangle but
        # three of four length-3 walk closures are balanced: undefined at
        # eta=3, utility 0.75 at eta=4, so the mu=0.8 verdicts differ
        path = tmp_path / "c4.txt"
        path.write_text(C4_FILE)
        run3 = run_cli("balance", "--dataset", str(path), "--eta", "3",
                       "--mu", "0.8", "--quiet")
        run4 = run_cli("balance", "--dataset", str(path), "--eta", "4",
                       "--mu", "0.8", "--quiet")
        line3 = run3.stdout.splitlines()[0]
        line4 = run4.stdout.splitlines()[0]
        assert line3.endswith("undef")
        assert line4.endswith("0.75")
        assert parse_kv(run3.stdout)["kept"] == "1"
        assert parse_kv(run4.stdout)["kept"] == "0"


class TestTrainAugmentCmds:
    def test_train_then_augment(self, tmp_path, congress_path):
        out = tmp_path / "model"
        proc = run_cli("train", "--dataset", str(congress_path), "--epochs", "3",
                       "--dim", "8", "--feature-dim", "6", "--seed", "1",
                       "--output", str(out), "--quiet")
        assert proc.returncode == EXIT_OK, proc.stderr
        emb = out.with_suffix(".emb")
        params = out.with_suffix(".params")
        assert emb.exists() and params.exists()
        assert params.read_bytes().startswith(b"SIGAUG-PARAMS-1\n")
        loaded = sg.load_params(params)
        assert loaded.embed_dim == 8

        fused = tmp_path / "augmented.txt"
        proc = run_cli("augment", "--dataset", str(congress_path),
                       "--embeddings", str(emb), "--delta", "0.2",
                       "--output", str(fused), "--log", str(tmp_path / "aug.log"),
                       "--quiet")
        assert proc.returncode == EXIT_OK, proc.stderr
        with fused.open("rb") as fh:
            g = sg.build_graph(sg.load_edge_list(fh, "signed"))
        assert g.num_edges > 0
        log_lines = (tmp_path / "aug.log").read_text().splitlines()
        assert log_lines and len(log_lines[0].split()) == 7


class TestEvaluateCmd:
    def test_deterministic_reports(self, tmp_path, congress_path):
        args = ["evaluate", "--dataset", str(congress_path), "--augmentation", "none",
                "--runs", "1", "--seed", "7", "--epochs", "3", "--dim", "8",
                "--feature-dim", "6", "--quiet"]
        a = run_cli(*args, "--output", str(tmp_path / "a.csv"))
        b = run_cli(*args, "--output", str(tmp_path / "b.csv"))
        assert a.returncode == EXIT_OK, a.stderr
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_report_parses(self, tmp_path, congress_path):
        out = tmp_path / "r.csv"
        proc = run_cli("evaluate", "--dataset", str(congress_path), "--runs", "1",
                       "--epochs", "3", "--dim", "8", "--feature-dim", "6",
                       "--output", str(out), "--quiet")
        assert proc.returncode == EXIT_OK
        report = sg.MetricReport.from_machine_lines(out.read_text().splitlines())
        assert set(report.per_run) == {"auc", "f1_binary_avg", "neg_precision",
                                       "neg_recall", "neg_f1", "pos_f1"}

    def test_component_failure_exit_code(self, tmp_path):
        bad = tmp_path / "positives_only.txt"
        bad.write_text("0 1 1\n1 2 1\n2 3 1\n")
        proc = run_cli("evaluate", "--dataset", str(bad), "--runs", "1",
                       "--epochs", "1", "--quiet")
        assert proc.returncode == EXIT_COMPONENT


class TestSweepCmd:
    def test_csv_output(self, tmp_path, congress_path):
        out = tmp_path / "sweep.csv"
        proc = run_cli("sweep", "--dataset", str(congress_path), "--runs", "1",
                       "--epochs", "3", "--dim", "8", "--feature-dim", "6",
                       "--mu-grid", "0.7", "--theta-grid", "1/9",
                       "--delta-grid", "0.2,0.4", "--output", str(out), "--quiet")
        assert proc.returncode == EXIT_OK, proc.stderr
        lines = out.read_text().splitlines()
        assert lines[0] == "mu,theta,delta,mean_auc,std"
        assert len(lines) == 3
        first = lines[1].split(",")
        assert float(first[2]) == 0.2


class TestConfigResolution:
    def test_flags_override_config_file(self, tmp_path, congress_path):
        conf = tmp_path / "run.conf"
        conf.write_text("mu = 0.5\neta = 3\n")
        proc = run_cli("balance", "--dataset", str(congress_path),
                       "--config", str(conf), "--mu", "0.9",
                       "--output", str(tmp_path / "out.txt"))
        assert proc.returncode == EXIT_OK
        kv = parse_kv(proc.stderr.replace(" = ", "="))
        assert kv["mu"] == "0.9"   # flag wins
        assert kv["eta"] == "3"    # config file beats the default

    def test_banner_round_trips(self):
        cfg = resolve_config("evaluate", {}, {"dataset": "data.txt", "theta": 1 / 9,
                                              "runs": 3})
        text = format_config(cfg)
        parsed = parse_config_text(text, "evaluate")
        assert resolve_config("evaluate", parsed, {}) == cfg

    def test_fraction_flag_syntax(self):
        cfg = resolve_config("evaluate", parse_config_text("theta = 1/9", "evaluate"), {})
        assert cfg.get("theta") == pytest.approx(1 / 9)

    def test_unknown_config_key(self):
        with pytest.raises(ValueError, match="unknown key"):
            parse_config_text("bogus = 1", "stats")

    def test_config_file_error_exit(self, tmp_path, congress_path):
        conf = tmp_path / "bad.conf"
        conf.write_text("not a key value line")
        proc = run_cli("stats", "--dataset", str(congress_path), "--config", str(conf))
        assert proc.returncode == EXIT_IO
