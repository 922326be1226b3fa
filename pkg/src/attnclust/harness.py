"""Experiment orchestration: variation runs, result tables, artifacts.

A variation is one end-to-end pipeline run: filter, stratified split, an
embedding regime (self-trained / pretrained / none for the plain baseline),
optional attention training, encoding, all seven clustering algorithms, and
a metric report per algorithm. True labels of the clustering split exist
only on this side of the fence; clustering itself sees bare point matrices.
"""

from __future__ import annotations

import contextlib
import csv
import hashlib
import json
import os
import re
import tempfile
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import baseline, clustering, corpus, embeddings, han, metrics
from .vectors import as_matrix

FAMILIES = ("AS", "AP", "PLAIN")

# row order and naming of the result tables
ALGORITHMS = ("k-means", "agglom", "dbscan", "meanshift", "birch_fn",
              "affinity", "minibkmea")

TABLE_COLUMNS = ("Algorithm", "Homo", "Comp", "V-me", "ARI", "AMI", "Silh",
                 "AvgEv")


class HarnessError(Exception):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@contextlib.contextmanager
def _stage(name):
    try:
        yield
    except HarnessError:
        raise
    except Exception as exc:
        raise HarnessError(name, exc) from exc


@dataclass
class VariationSpec:
    family: str
    fraction_tenths: int | None = None  # 1..9; None for PLAIN
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.family == "PLAIN":
            if self.fraction_tenths is not None:
                raise ValueError("PLAIN takes no fraction")
        elif not 1 <= (self.fraction_tenths or 0) <= 9:
            raise ValueError("fraction_tenths must be in 1..9")

    @property
    def code(self):
        if self.family == "PLAIN":
            return "PLAIN"
        return f"{self.family}{self.fraction_tenths}"

    @property
    def fraction(self):
        return 0.5 if self.family == "PLAIN" else self.fraction_tenths / 10.0

    @classmethod
    def parse(cls, code, seed=0):
        code = code.strip().upper()
        if code == "PLAIN":
            return cls("PLAIN", seed=seed)
        m = re.fullmatch(r"(AS|AP)([1-9])", code)
        if not m:
            raise ValueError(f"bad variation code {code!r} "
                             f"(expected AS1..AS9, AP1..AP9 or PLAIN)")
        return cls(m.group(1), int(m.group(2)), seed=seed)


@dataclass
class ExperimentConfig:
    """Everything a run needs; JSON-serializable, hashable for provenance."""
    dataset_path: str | None = None
    text_col: str = "review"
    label_col: str = "condition"
    id_col: str | None = None
    min_class_count: int = 3
    max_per_class: int = 20
    min_freq: int = 1
    max_sentences: int = 30
    max_words: int = 50
    embedding_dim: int = 100
    h_word: int = 50
    h_sent: int = 50
    attention_dim: int = 100
    han_epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 0.5
    fine_tune_embeddings: bool | None = None
    skipgram_window: int = 3
    skipgram_negatives: int = 5
    skipgram_epochs: int = 5
    skipgram_lr: float = 0.05
    doc2vec_negatives: int = 5
    doc2vec_epochs: int = 30
    doc2vec_lr: float = 0.05
    pretrained_path: str | None = None
    clustering_params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, obj):
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def config_hash(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


@dataclass
class ResultTable:
    code: str
    family: str
    fraction_tenths: int | None
    rows: list  # (algorithm name, MetricReport) in ALGORITHMS order
    diagnostics: dict  # algorithm -> clustering diagnostics
    provenance: dict
    vectors: list = field(default_factory=list, repr=False)
    assignments: dict = field(default_factory=dict, repr=False)

    def report(self, algorithm):
        for name, rep in self.rows:
            if name == algorithm:
                return rep
        raise KeyError(algorithm)


def _prepare_corpus(config, spec_seed, ratio, records=None):
    """Shared front of every pipeline: filter, split, vocab, tokenize."""
    with _stage("load"):
        if records is None:
            if config.dataset_path is None:
                raise ValueError("no dataset: pass records or set dataset_path")
            records, _ = corpus.load_records(
                config.dataset_path, text_col=config.text_col,
                label_col=config.label_col, id_col=config.id_col)
    with _stage("filter"):
        filtered = corpus.filter_classes(records, config.min_class_count,
                                         config.max_per_class, seed=spec_seed)
        label_to_id, _ = corpus.encode_labels(filtered.records)
    with _stage("split"):
        split = corpus.stratified_split(filtered, ratio, seed=spec_seed)
    with _stage("tokenize"):
        token_lists = [[w for sent in corpus.split_sentences(rec.text)
                        for w in sent] for rec in filtered.records]
        vocab = corpus.build_vocabulary(token_lists, min_freq=config.min_freq)
        docs = [corpus.tokenize_document(
                    rec.text, vocab, max_sentences=config.max_sentences,
                    max_words=config.max_words, doc_id=rec.id,
                    label=label_to_id[rec.class_label])
                for rec in filtered.records]
    train_docs = [docs[i] for i in split.training]
    cluster_docs = [docs[i] for i in split.clustering]
    return vocab, docs, train_docs, cluster_docs, len(label_to_id)


def _cluster_and_score(vectors, cluster_docs, k, config, seed):
    """Run the seven algorithms on the vectors and score each against the
    held-out class labels (the only place those labels are used)."""
    with _stage("cluster"):
        matrix, doc_ids = as_matrix(vectors)
        points = clustering.PointSet(matrix, doc_ids=doc_ids)
        x = points.points
        params = config.clustering_params
        assignments = {
            "k-means": clustering.kmeans(x, k, seed=seed,
                                         **params.get("k-means", {})),
            "agglom": clustering.agglomerative(x, k,
                                               **params.get("agglom", {})),
            "dbscan": clustering.dbscan(x, **params.get("dbscan", {})),
            "meanshift": clustering.mean_shift(x, **params.get("meanshift", {})),
            "birch_fn": clustering.birch(x, k, **params.get("birch_fn", {})),
            "affinity": clustering.affinity_propagation(
                x, **params.get("affinity", {})),
            "minibkmea": clustering.minibatch_kmeans(
                x, k, seed=seed, **params.get("minibkmea", {})),
        }
    with _stage("evaluate"):
        labels_true = [doc.label for doc in cluster_docs]
        rows = []
        diagnostics = {}
        for name in ALGORITHMS:
            assignment = assignments[name]
            pred = assignment.labels.copy()
            pred[pred == clustering.NOISE] = assignment.k_found  # noise forms
            # one extra distinct cluster for scoring
            rows.append((name, metrics.evaluate(labels_true, pred, x)))
            diagnostics[name] = {"k_found": int(assignment.k_found),
                                 **_jsonable(assignment.diagnostics)}
    return rows, diagnostics, assignments


def run_variation(spec, config, records=None):
    """One attention-clustering variation (AS or AP family) end to end."""
    if spec.family not in ("AS", "AP"):
        raise ValueError("run_variation handles AS/AP; use run_plain")
    vocab, docs, train_docs, cluster_docs, n_classes = _prepare_corpus(
        config, spec.seed, spec.fraction, records)
    with _stage("embeddings"):
        if spec.family == "AS":
            emb, _ = embeddings.train_skipgram(
                docs, vocab,
                embeddings.SkipgramConfig(
                    dim=config.embedding_dim, window=config.skipgram_window,
                    negatives=config.skipgram_negatives,
                    epochs=config.skipgram_epochs,
                    learning_rate=config.skipgram_lr, seed=spec.seed))
            mode = "self-trained"
        else:
            if config.pretrained_path is None:
                raise ValueError("AP variation needs pretrained_path")
            emb, _ = embeddings.load_pretrained(
                config.pretrained_path, vocab, config.embedding_dim,
                seed=spec.seed)
            mode = "pretrained"
    with _stage("train-han"):
        han_config = han.HanConfig(
            embedding_mode=mode, d=config.embedding_dim,
            h_word=config.h_word, h_sent=config.h_sent,
            a=config.attention_dim, classes=n_classes,
            epochs=config.han_epochs, batch_size=config.batch_size,
            learning_rate=config.learning_rate, seed=spec.seed,
            fine_tune_embeddings=config.fine_tune_embeddings)
        params, history = han.train(han_config, train_docs, emb)
    with _stage("encode"):
        vectors = han.encode_corpus(params, cluster_docs)
    k = len({doc.label for doc in cluster_docs})
    rows, diagnostics, assignments = _cluster_and_score(
        vectors, cluster_docs, k, config, spec.seed)
    provenance = {
        "variation": spec.code,
        "seed": spec.seed,
        "config_hash": config.config_hash(),
        "k": k,
        "n_classes": n_classes,
        "n_training_docs": len(train_docs),
        "n_clustering_docs": len(cluster_docs),
        "final_training_accuracy": history.accuracies[-1] if
        history.accuracies else None,
    }
    return ResultTable(spec.code, spec.family, spec.fraction_tenths,
                       rows, diagnostics, provenance, vectors, assignments)


def run_plain(config, records=None, seed=0):
    """The attention-free baseline: doc2vec-style vectors over the same
    clustering split an even (0.5) stratified split produces."""
    spec = VariationSpec("PLAIN", seed=seed)
    vocab, docs, _, cluster_docs, n_classes = _prepare_corpus(
        config, seed, spec.fraction, records)
    with _stage("doc-vectors"):
        pv_config = baseline.ParagraphVectorConfig(
            dim=2 * config.h_sent, negatives=config.doc2vec_negatives,
            epochs=config.doc2vec_epochs, learning_rate=config.doc2vec_lr,
            seed=seed)
        vectors = baseline.train_doc_vectors(cluster_docs, len(vocab),
                                             pv_config)
    k = len({doc.label for doc in cluster_docs})
    rows, diagnostics, assignments = _cluster_and_score(
        vectors, cluster_docs, k, config, seed)
    provenance = {
        "variation": "PLAIN",
        "seed": seed,
        "config_hash": config.config_hash(),
        "k": k,
        "n_classes": n_classes,
        "n_clustering_docs": len(cluster_docs),
    }
    return ResultTable("PLAIN", "PLAIN", None, rows, diagnostics, provenance,
                       vectors, assignments)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def atomic_write_text(path, text):
    """Write via a temp file in the same directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def emit_result_table(table, path, fmt="csv"):
    """Render a ResultTable with 3-decimal scores ('----' for no silhouette)."""
    lines = []
    if fmt == "csv":
        lines.append(",".join(TABLE_COLUMNS))
        for name, report in table.rows:
            lines.append(",".join([name] + metrics.report_row(report)))
    elif fmt == "markdown":
        lines.append("| " + " | ".join(TABLE_COLUMNS) + " |")
        lines.append("|" + "---|" * len(TABLE_COLUMNS))
        for name, report in table.rows:
            lines.append("| " + " | ".join([name] + metrics.report_row(report))
                         + " |")
    else:
        raise ValueError(f"unknown table format {fmt!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def parse_result_table(path):
    """Read back an emitted CSV table as (algorithm -> MetricReport)."""
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TABLE_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            name = row[0]
            homo, comp, v, ari, ami = (float(v) for v in row[1:6])
            silh = metrics.parse_score(row[6])
            avg = float(row[7])
            rows[name] = metrics.MetricReport(homo, comp, v, ari, ami, silh,
                                              silh is not None, avg)
    return rows


def save_assignments(assignment, doc_ids, path):
    lines = ["doc_id,label"]
    for doc_id, label in zip(doc_ids, assignment.labels):
        lines.append(f"{doc_id},{int(label)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def emit_variation_artifacts(table, out_dir):
    """Write the per-variation artifact set under out_dir with deterministic
    names; returns the list of paths."""
    os.makedirs(out_dir, exist_ok=True)
    code = table.code
    paths = []

    def out(name):
        paths.append(os.path.join(out_dir, name))
        return paths[-1]

    emit_result_table(table, out(f"{code}_table.csv"), "csv")
    emit_result_table(table, out(f"{code}_table.md"), "markdown")
    doc_ids = [v.doc_id for v in table.vectors]
    for name in ALGORITHMS:
        save_assignments(table.assignments[name], doc_ids,
                         out(f"{code}_{name}_assignments.csv"))
        atomic_write_text(out(f"{code}_{name}_diagnostics.json"),
                          json.dumps(table.diagnostics[name], indent=2,
                                     sort_keys=True) + "\n")
    provenance = dict(table.provenance)
    provenance["written_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    atomic_write_text(out(f"{code}_provenance.json"),
                      json.dumps(provenance, indent=2, sort_keys=True) + "\n")
    return paths
