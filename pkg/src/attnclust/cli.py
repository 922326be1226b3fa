"""Command-line interface.

Subcommands follow the pipeline stages: synth, ingest, train-embeddings,
train-han, encode, cluster, evaluate, and the all-in-one experiment runner.
Every artifact lands under an explicit output path; failures exit nonzero
with the failing stage named on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import baseline, charts, clustering, corpus, embeddings, han, harness
from .harness import ALGORITHMS, ExperimentConfig, VariationSpec
from .metrics import evaluate as evaluate_metrics
from .metrics import report_row
from .synth import generate_synthetic_records, write_records_tsv
from .vectors import as_matrix, load_vectors_csv, save_vectors_csv, \
    save_vectors_jsonl


def build_parser():
    parser = argparse.ArgumentParser(
        prog="attnclust",
        description="Attention-based text clustering pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled TSV corpus")
    p.add_argument("--classes", type=int, default=6)
    p.add_argument("--docs-per-class", type=int, default=40)
    p.add_argument("--keyword-rate", type=float, default=0.35)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("ingest",
                       help="filter, split and tokenize a tabular corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--text-col", default="review")
    p.add_argument("--label-col", default="condition")
    p.add_argument("--id-col", default=None)
    p.add_argument("--min-count", type=int, default=3)
    p.add_argument("--max-per-class", type=int, default=20)
    p.add_argument("--min-freq", type=int, default=1)
    p.add_argument("--max-sentences", type=int, default=30)
    p.add_argument("--max-words", type=int, default=50)
    p.add_argument("--fraction", type=float, default=0.5,
                   help="training fraction of the stratified split")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("train-embeddings",
                       help="self-trained or random word vectors")
    p.add_argument("--corpus", required=True, help="tokenized JSONL")
    p.add_argument("--vocab", required=True)
    p.add_argument("--mode", choices=["self", "random"], default="self")
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="embedding JSON container")
    p.add_argument("--out-text", default=None,
                   help="also write the plain-text word-vector format")

    p = sub.add_parser("train-han",
                       help="train the attention classifier on labeled docs")
    p.add_argument("--train-corpus", required=True)
    p.add_argument("--vocab", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--embeddings", help="embedding JSON container")
    src.add_argument("--pretrained", help="plain-text word-vector file")
    src.add_argument("--random-embeddings", action="store_true")
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--h-word", type=int, default=50)
    p.add_argument("--h-sent", type=int, default=50)
    p.add_argument("--attention-dim", type=int, default=100)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--fine-tune", dest="fine_tune", action="store_true",
                   default=None)
    p.add_argument("--no-fine-tune", dest="fine_tune", action="store_false")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model checkpoint path")

    p = sub.add_parser("encode",
                       help="document vectors from a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", default=None,
                   help="verify the checkpoint matches this vocabulary")
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("cluster", help="run one clustering algorithm")
    p.add_argument("--vectors", required=True, help="document-vector CSV")
    p.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    p.add_argument("--k", default="sqrt",
                   help="cluster count, or 'sqrt' for round(sqrt(n))")
    p.add_argument("--params", default="{}",
                   help="JSON object of algorithm keyword arguments")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("evaluate",
                       help="score an assignment against true labels")
    p.add_argument("--vectors", required=True)
    p.add_argument("--assignments", required=True)
    p.add_argument("--corpus", required=True,
                   help="tokenized JSONL carrying label_id")
    p.add_argument("--algorithm", default="custom",
                   help="row name for the emitted table line")
    p.add_argument("--out", default=None, help="append the CSV row here")

    p = sub.add_parser("experiment",
                       help="full variation runs with tables and charts")
    p.add_argument("--config", default=None, help="JSON ExperimentConfig file")
    p.add_argument("--input", default=None, help="tabular dataset path")
    p.add_argument("--synthetic", action="store_true",
                   help="use the built-in synthetic corpus")
    p.add_argument("--classes", type=int, default=6,
                   help="synthetic corpus classes")
    p.add_argument("--docs-per-class", type=int, default=40)
    p.add_argument("--variation", required=True,
                   help="AS2, AP9, PLAIN, or a bare family AS/AP "
                        "with --fractions")
    p.add_argument("--fractions", default=None,
                   help="comma-separated tenths, e.g. 2,5,9 (family form)")
    p.add_argument("--text-col", default=None)
    p.add_argument("--label-col", default=None)
    p.add_argument("--pretrained", default=None)
    p.add_argument("--han-epochs", type=int, default=None)
    p.add_argument("--line-metric", default="homo")
    p.add_argument("--line-algorithm", default="k-means")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    return parser


def cmd_synth(args):
    records = generate_synthetic_records(
        n_classes=args.classes, docs_per_class=args.docs_per_class,
        keyword_rate=args.keyword_rate, noise=args.noise, seed=args.seed)
    write_records_tsv(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_ingest(args):
    records, report = corpus.load_records(
        args.input, text_col=args.text_col, label_col=args.label_col,
        id_col=args.id_col)
    filtered = corpus.filter_classes(records, args.min_count,
                                     args.max_per_class, seed=args.seed)
    label_to_id, id_to_label = corpus.encode_labels(filtered.records)
    split = corpus.stratified_split(filtered, args.fraction, seed=args.seed)
    token_lists = [[w for sent in corpus.split_sentences(r.text) for w in sent]
                   for r in filtered.records]
    vocab = corpus.build_vocabulary(token_lists, min_freq=args.min_freq)
    docs = [corpus.tokenize_document(r.text, vocab,
                                     max_sentences=args.max_sentences,
                                     max_words=args.max_words, doc_id=r.id,
                                     label=label_to_id[r.class_label])
            for r in filtered.records]
    os.makedirs(args.out_dir, exist_ok=True)

    def out(name):
        return os.path.join(args.out_dir, name)

    with open(out("vocab.json"), "w", encoding="utf-8") as fh:
        json.dump(vocab.to_json(), fh)
    with open(out("labels.json"), "w", encoding="utf-8") as fh:
        json.dump(id_to_label, fh)
    corpus.save_tokenized([docs[i] for i in split.training],
                          out("corpus_train.jsonl"))
    corpus.save_tokenized([docs[i] for i in split.clustering],
                          out("corpus_cluster.jsonl"))
    with open(out("ingest_report.json"), "w", encoding="utf-8") as fh:
        json.dump({"rows": report.n_rows, "loaded": report.n_loaded,
                   "dropped_empty": report.n_dropped_empty,
                   "skipped": report.skipped,
                   "classes": filtered.class_counts,
                   "vocab_size": len(vocab),
                   "training_docs": len(split.training),
                   "clustering_docs": len(split.clustering)}, fh, indent=2,
                  sort_keys=True)
    print(f"{len(filtered.records)} records in {len(id_to_label)} classes; "
          f"{len(split.training)} train / {len(split.clustering)} cluster; "
          f"vocabulary {len(vocab)}")
    return 0


def _load_vocab(path):
    with open(path, encoding="utf-8") as fh:
        return corpus.Vocabulary.from_json(json.load(fh))


def cmd_train_embeddings(args):
    vocab = _load_vocab(args.vocab)
    docs = corpus.load_tokenized(args.corpus)
    if args.mode == "random":
        matrix = embeddings.init_random(len(vocab), args.dim, args.seed,
                                        vocab.fingerprint())
    else:
        config = embeddings.SkipgramConfig(
            dim=args.dim, window=args.window, negatives=args.negatives,
            epochs=args.epochs, learning_rate=args.lr, seed=args.seed)
        matrix, losses = embeddings.train_skipgram(docs, vocab, config)
        if losses:
            print(f"skip-gram loss {losses[0]:.4f} -> {losses[-1]:.4f} "
                  f"over {len(losses)} epochs")
    embeddings.save_matrix_json(matrix, args.out)
    if args.out_text:
        embeddings.save_word_vectors(matrix, vocab, args.out_text)
    print(f"wrote {matrix.vocab_size}x{matrix.dim} matrix to {args.out}")
    return 0


def cmd_train_han(args):
    vocab = _load_vocab(args.vocab)
    docs = corpus.load_tokenized(args.train_corpus)
    labels = {d.label for d in docs}
    if None in labels:
        print("error: training corpus has unlabeled documents",
              file=sys.stderr)
        return 1
    classes = max(labels) + 1
    if args.embeddings:
        matrix = embeddings.load_matrix_json(args.embeddings,
                                             expected_vocab_hash=vocab.fingerprint())
        mode = "self-trained"
    elif args.pretrained:
        matrix, coverage = embeddings.load_pretrained(
            args.pretrained, vocab, args.dim, seed=args.seed)
        mode = "pretrained"
        print(f"pretrained coverage {coverage:.1%}")
    else:
        matrix = embeddings.init_random(len(vocab), args.dim, args.seed,
                                        vocab.fingerprint())
        mode = "random"
    config = han.HanConfig(
        embedding_mode=mode, d=matrix.dim, h_word=args.h_word,
        h_sent=args.h_sent, a=args.attention_dim, classes=classes,
        epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.lr, seed=args.seed,
        fine_tune_embeddings=args.fine_tune)
    params, history = han.train(config, docs, matrix)
    han.save_checkpoint(params, config, args.out)
    if history.losses:
        print(f"loss {history.losses[0]:.4f} -> {history.losses[-1]:.4f}; "
              f"final training accuracy {history.accuracies[-1]:.1%}")
    print(f"checkpoint written to {args.out}")
    return 0


def cmd_encode(args):
    expected = _load_vocab(args.vocab).fingerprint() if args.vocab else None
    params, _ = han.load_checkpoint(args.checkpoint,
                                    expected_vocab_hash=expected)
    docs = corpus.load_tokenized(args.corpus)
    vectors = han.encode_corpus(params, docs)
    save_vectors_csv(vectors, args.out_prefix + ".csv")
    save_vectors_jsonl(vectors, args.out_prefix + ".jsonl")
    print(f"encoded {len(vectors)} documents "
          f"(dim {vectors[0].values.shape[0]})")
    return 0


def cmd_cluster(args):
    vectors = load_vectors_csv(args.vectors)
    matrix, doc_ids = as_matrix(vectors)
    params = json.loads(args.params)
    k = clustering.estimate_k_sqrt(len(matrix)) if args.k == "sqrt" \
        else int(args.k)
    fns = {
        "k-means": lambda: clustering.kmeans(matrix, k, seed=args.seed,
                                             **params),
        "agglom": lambda: clustering.agglomerative(matrix, k, **params),
        "dbscan": lambda: clustering.dbscan(matrix, **params),
        "meanshift": lambda: clustering.mean_shift(matrix, **params),
        "birch_fn": lambda: clustering.birch(matrix, k, **params),
        "affinity": lambda: clustering.affinity_propagation(matrix, **params),
        "minibkmea": lambda: clustering.minibatch_kmeans(matrix, k,
                                                         seed=args.seed,
                                                         **params),
    }
    assignment = fns[args.algorithm]()
    harness.save_assignments(assignment, doc_ids,
                             args.out_prefix + "_assignments.csv")
    diag = {"k_found": int(assignment.k_found),
            **harness._jsonable(assignment.diagnostics)}
    harness.atomic_write_text(args.out_prefix + "_diagnostics.json",
                              json.dumps(diag, indent=2, sort_keys=True) + "\n")
    print(f"{args.algorithm}: {assignment.k_found} clusters "
          f"({int((assignment.labels == clustering.NOISE).sum())} noise)")
    return 0


def cmd_evaluate(args):
    vectors = load_vectors_csv(args.vectors)
    matrix, doc_ids = as_matrix(vectors)
    docs = {d.doc_id: d for d in corpus.load_tokenized(args.corpus)}
    missing = [i for i in doc_ids if i not in docs]
    if missing:
        print(f"error: {len(missing)} vector ids missing from corpus "
              f"(e.g. {missing[0]!r})", file=sys.stderr)
        return 1
    labels_true = [docs[i].label for i in doc_ids]
    assigned = {}
    with open(args.assignments, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != ["doc_id", "label"]:
            print(f"error: {args.assignments} is not an assignment CSV",
                  file=sys.stderr)
            return 1
        for line in fh:
            doc_id, label = line.rsplit(",", 1)
            assigned[doc_id] = int(label)
    labels_pred = np.array([assigned[i] for i in doc_ids])
    labels_pred[labels_pred == clustering.NOISE] = labels_pred.max() + 1
    report = evaluate_metrics(labels_true, labels_pred, matrix)
    row = ",".join([args.algorithm] + report_row(report))
    print(",".join(harness.TABLE_COLUMNS))
    print(row)
    if args.out:
        exists = os.path.exists(args.out)
        with open(args.out, "a", encoding="utf-8") as fh:
            if not exists:
                fh.write(",".join(harness.TABLE_COLUMNS) + "\n")
            fh.write(row + "\n")
    return 0


def _experiment_records(args, config):
    if args.synthetic:
        return generate_synthetic_records(n_classes=args.classes,
                                          docs_per_class=args.docs_per_class,
                                          seed=args.seed)
    if args.input is None and config.dataset_path is None:
        raise ValueError("experiment needs --input, --synthetic, or a "
                         "dataset_path in --config")
    return None  # harness loads from config.dataset_path


def _ensure_pretrained(config, records, out_dir, seed):
    """Synthetic AP runs without an external vector file get a stand-in
    trained on the full corpus text."""
    path = os.path.join(out_dir, "pretrained_vectors.txt")
    filtered = corpus.filter_classes(records, config.min_class_count,
                                     config.max_per_class, seed=seed)
    token_lists = [[w for sent in corpus.split_sentences(r.text) for w in sent]
                   for r in filtered.records]
    vocab = corpus.build_vocabulary(token_lists, min_freq=config.min_freq)
    docs = [corpus.tokenize_document(r.text, vocab, doc_id=r.id)
            for r in filtered.records]
    sg = embeddings.SkipgramConfig(dim=config.embedding_dim,
                                   window=config.skipgram_window,
                                   negatives=config.skipgram_negatives,
                                   epochs=config.skipgram_epochs,
                                   learning_rate=config.skipgram_lr,
                                   seed=seed + 10_000)
    matrix, _ = embeddings.train_skipgram(docs, vocab, sg)
    embeddings.save_word_vectors(matrix, vocab, path)
    print(f"no --pretrained given; wrote a corpus-trained stand-in to {path}")
    return path


def cmd_experiment(args):
    config = ExperimentConfig.from_file(args.config) if args.config \
        else ExperimentConfig()
    if args.input:
        config.dataset_path = args.input
    if args.text_col:
        config.text_col = args.text_col
    if args.label_col:
        config.label_col = args.label_col
    if args.pretrained:
        config.pretrained_path = args.pretrained
    if args.han_epochs is not None:
        config.han_epochs = args.han_epochs

    code = args.variation.strip().upper()
    if code in ("AS", "AP"):
        if not args.fractions:
            print("error: family form needs --fractions", file=sys.stderr)
            return 1
        tenths = [int(t) for t in args.fractions.split(",")]
        specs = [VariationSpec(code, t, seed=args.seed) for t in tenths]
    else:
        specs = [VariationSpec.parse(code, seed=args.seed)]

    os.makedirs(args.out_dir, exist_ok=True)
    records = _experiment_records(args, config)
    needs_pretrained = any(s.family == "AP" for s in specs)
    if needs_pretrained and config.pretrained_path is None:
        if not args.synthetic:
            print("error: AP variations need --pretrained", file=sys.stderr)
            return 1
        config.pretrained_path = _ensure_pretrained(config, records,
                                                    args.out_dir, args.seed)

    tables = []
    for spec in specs:
        if spec.family == "PLAIN":
            table = harness.run_plain(config, records=records, seed=args.seed)
        else:
            table = harness.run_variation(spec, config, records=records)
        harness.emit_variation_artifacts(table, args.out_dir)
        charts.emit_charts([table], "avg_ev_bars",
                           os.path.join(args.out_dir,
                                        f"{table.code}_avg_ev_bars.svg"))
        tables.append(table)
        print(f"{table.code}: table and charts written to {args.out_dir}")
    families = {t.family for t in tables if t.family != "PLAIN"}
    if len(tables) > 1 and len(families) == 1:
        family = families.pop()
        line_path = os.path.join(
            args.out_dir,
            f"{family}_{args.line_metric}_{args.line_algorithm}_line.svg")
        charts.emit_charts(tables, "metric_line", line_path,
                           metric=args.line_metric,
                           algorithm=args.line_algorithm)
        print(f"line chart written to {line_path}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "train-embeddings": cmd_train_embeddings,
    "train-han": cmd_train_han,
    "encode": cmd_encode,
    "cluster": cmd_cluster,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except harness.HarnessError as exc:
        print(f"error at stage {exc.stage!r}: {exc.cause}", file=sys.stderr)
        return 3
    except (corpus.CorpusError, embeddings.EmbeddingError,
            clustering.ClusteringError, han.CheckpointError,
            han.TrainingDiverged, baseline.BaselineError, charts.ChartError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
