import json
import os

import numpy as np
import pytest

from attnclust.cli import main


def run(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A full stage-by-stage pipeline run in one temp dir."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data.tsv"
    assert run(["synth", "--classes", 3, "--docs-per-class", 8,
                "--seed", 1, "--out", data]) == 0
    out = root / "ingested"
    assert run(["ingest", "--input", data, "--min-count", 2,
                "--max-per-class", 50, "--seed", 1, "--out-dir", out]) == 0
    assert run(["train-embeddings", "--corpus", out / "corpus_train.jsonl",
                "--vocab", out / "vocab.json", "--dim", 16, "--epochs", 2,
                "--seed", 1, "--out", root / "emb.json"]) == 0
    assert run(["train-han", "--train-corpus", out / "corpus_train.jsonl",
                "--vocab", out / "vocab.json", "--embeddings", root / "emb.json",
                "--dim", 16, "--h-word", 6, "--h-sent", 6,
                "--attention-dim", 8, "--epochs", 4, "--seed", 1,
                "--out", root / "model.ckpt"]) == 0
    assert run(["encode", "--checkpoint", root / "model.ckpt",
                "--corpus", out / "corpus_cluster.jsonl",
                "--vocab", out / "vocab.json",
                "--out-prefix", root / "vectors"]) == 0
    return root, out


class TestStagePipeline:
    def test_artifacts_exist(self, workspace):
        root, out = workspace
        for name in ("vocab.json", "labels.json", "corpus_train.jsonl",
                     "corpus_cluster.jsonl", "ingest_report.json"):
            assert (out / name).exists()
        assert (root / "vectors.csv").exists()
        assert (root / "vectors.jsonl").exists()

    def test_tokenized_jsonl_schema(self, workspace):
        _, out = workspace
        line = (out / "corpus_cluster.jsonl").read_text().splitlines()[0]
        obj = json.loads(line)
        assert set(obj) == {"id", "label_id", "sentences"}
        assert isinstance(obj["sentences"][0], list)

    def test_cluster_and_evaluate(self, workspace, capsys):
        root, out = workspace
        assert run(["cluster", "--vectors", root / "vectors.csv",
                    "--algorithm", "k-means", "--k", 3, "--seed", 1,
                    "--out-prefix", root / "km"]) == 0
        assert (root / "km_assignments.csv").exists()
        diag = json.loads((root / "km_diagnostics.json").read_text())
        assert diag["algorithm"] == "kmeans" and diag["k"] == 3
        assert run(["evaluate", "--vectors", root / "vectors.csv",
                    "--assignments", root / "km_assignments.csv",
                    "--corpus", out / "corpus_cluster.jsonl",
                    "--algorithm", "k-means",
                    "--out", root / "row.csv"]) == 0
        captured = capsys.readouterr()
        assert "Algorithm,Homo" in captured.out
        assert (root / "row.csv").read_text().count("\n") == 2

    def test_cluster_sqrt_k(self, workspace):
        root, _ = workspace
        assert run(["cluster", "--vectors", root / "vectors.csv",
                    "--algorithm", "agglom", "--k", "sqrt",
                    "--out-prefix", root / "ag"]) == 0
        labels = {int(line.rsplit(",", 1)[1]) for line in
                  (root / "ag_assignments.csv").read_text().splitlines()[1:]}
        n = len((root / "vectors.csv").read_text().splitlines()) - 1
        assert len(labels) == max(1, round(np.sqrt(n)))

    def test_cluster_params_json(self, workspace):
        root, _ = workspace
        assert run(["cluster", "--vectors", root / "vectors.csv",
                    "--algorithm", "dbscan", "--params",
                    '{"eps": 1e-9, "min_samples": 2}',
                    "--out-prefix", root / "db"]) == 0
        labels = [int(line.rsplit(",", 1)[1]) for line in
                  (root / "db_assignments.csv").read_text().splitlines()[1:]]
        assert set(labels) == {-1}  # everything noise at that eps

    def test_checkpoint_vocab_guard(self, workspace, tmp_path, capsys):
        root, out = workspace
        other = tmp_path / "other"
        assert run(["synth", "--classes", 2, "--docs-per-class", 5,
                    "--seed", 9, "--out", tmp_path / "d2.tsv"]) == 0
        assert run(["ingest", "--input", tmp_path / "d2.tsv", "--min-count", 1,
                    "--out-dir", other]) == 0
        code = run(["encode", "--checkpoint", root / "model.ckpt",
                    "--corpus", other / "corpus_cluster.jsonl",
                    "--vocab", other / "vocab.json",
                    "--out-prefix", tmp_path / "v"])
        assert code == 1
        assert "vocabulary" in capsys.readouterr().err


class TestExperimentCommand:
    def test_single_variation_artifacts(self, tmp_path):
        out = tmp_path / "exp"
        assert run(["experiment", "--synthetic", "--classes", 3,
                    "--docs-per-class", 8, "--variation", "AS5",
                    "--han-epochs", 4, "--seed", 2, "--out-dir", out]) == 0
        assert (out / "AS5_table.csv").exists()
        assert (out / "AS5_table.md").exists()
        assert (out / "AS5_avg_ev_bars.svg").exists()
        assert (out / "AS5_avg_ev_bars.csv").exists()
        assert (out / "AS5_provenance.json").exists()
        assert (out / "AS5_k-means_assignments.csv").exists()

    def test_family_with_fractions_makes_line_chart(self, tmp_path):
        out = tmp_path / "fam"
        assert run(["experiment", "--synthetic", "--classes", 3,
                    "--docs-per-class", 8, "--variation", "AS",
                    "--fractions", "2,5", "--han-epochs", 3, "--seed", 0,
                    "--out-dir", out]) == 0
        assert (out / "AS2_table.csv").exists()
        assert (out / "AS5_table.csv").exists()
        assert (out / "AS_homo_k-means_line.svg").exists()
        assert (out / "AS_homo_k-means_line.csv").exists()

    def test_plain_variation(self, tmp_path):
        out = tmp_path / "plain"
        assert run(["experiment", "--synthetic", "--classes", 3,
                    "--docs-per-class", 8, "--variation", "PLAIN",
                    "--seed", 0, "--out-dir", out]) == 0
        table = (out / "PLAIN_table.csv").read_text().splitlines()
        assert len(table) == 8

    def test_ap_synthetic_gets_standin_pretrained(self, tmp_path):
        out = tmp_path / "ap"
        assert run(["experiment", "--synthetic", "--classes", 3,
                    "--docs-per-class", 8, "--variation", "AP5",
                    "--han-epochs", 3, "--seed", 0, "--out-dir", out]) == 0
        assert (out / "pretrained_vectors.txt").exists()
        assert (out / "AP5_table.csv").exists()

    def test_config_file_respected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"han_epochs": 2, "h_word": 6, "h_sent": 6,
                                   "embedding_dim": 12, "attention_dim": 8,
                                   "max_per_class": 50}))
        out = tmp_path / "cfgout"
        assert run(["experiment", "--synthetic", "--classes", 3,
                    "--docs-per-class", 8, "--variation", "AS5",
                    "--config", cfg, "--seed", 0, "--out-dir", out]) == 0
        prov = json.loads((out / "AS5_provenance.json").read_text())
        assert prov["k"] == 3

    def test_missing_input_fails_cleanly(self, tmp_path, capsys):
        code = run(["experiment", "--variation", "AS5",
                    "--out-dir", tmp_path / "x"])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_family_without_fractions_fails(self, tmp_path, capsys):
        code = run(["experiment", "--synthetic", "--variation", "AS",
                    "--out-dir", tmp_path / "x"])
        assert code == 1

    def test_stage_error_exit_code(self, tmp_path, capsys):
        code = run(["experiment", "--input", "/nonexistent.tsv",
                    "--variation", "AS5", "--out-dir", tmp_path / "x"])
        assert code == 3
        assert "stage 'load'" in capsys.readouterr().err


def test_bad_variation_code(tmp_path, capsys):
    code = run(["experiment", "--synthetic", "--variation", "ZZ9",
                "--out-dir", tmp_path / "x"])
    assert code == 1
