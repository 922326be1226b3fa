"""Synthetic labeled corpus generator.

Stands in for a real review dataset at desk scale: each class owns a small
keyword vocabulary, all classes share a filler vocabulary, and a noise knob
occasionally swaps in another class's keyword. Generator labels double as
clustering ground truth.
"""

from __future__ import annotations

import csv

import numpy as np

from .corpus import RawRecord


def generate_synthetic_records(n_classes=6, docs_per_class=40, seed=0,
                               keywords_per_class=6, n_fillers=50,
                               sentences=(2, 4), words=(4, 9),
                               keyword_rate=0.35, noise=0.05):
    """Labeled RawRecords with class-specific keywords planted among fillers.

    Each word slot draws a keyword with probability keyword_rate (from the
    doc's own class, or with probability `noise` from a random other class)
    and a shared filler otherwise. Deterministic under seed.
    """
    if n_classes < 2 or docs_per_class < 1:
        raise ValueError("need at least 2 classes and 1 doc per class")
    rng = np.random.default_rng(seed)
    keywords = [[f"key{c:02d}w{k}" for k in range(keywords_per_class)]
                for c in range(n_classes)]
    fillers = [f"fill{i:03d}" for i in range(n_fillers)]
    records = []
    doc_id = 0
    for cls in range(n_classes):
        for _ in range(docs_per_class):
            n_sents = int(rng.integers(sentences[0], sentences[1] + 1))
            sents = []
            for _ in range(n_sents):
                n_words = int(rng.integers(words[0], words[1] + 1))
                out = []
                for _ in range(n_words):
                    if rng.random() < keyword_rate:
                        source = cls
                        if noise > 0 and rng.random() < noise:
                            others = [c for c in range(n_classes) if c != cls]
                            source = others[int(rng.integers(len(others)))]
                        out.append(keywords[source][
                            int(rng.integers(keywords_per_class))])
                    else:
                        out.append(fillers[int(rng.integers(n_fillers))])
                sents.append(" ".join(out))
            records.append(RawRecord(f"doc{doc_id:04d}",
                                     ". ".join(sents) + ".",
                                     f"class{cls:02d}"))
            doc_id += 1
    return records


def write_records_tsv(records, path, text_col="review", label_col="condition"):
    """Write RawRecords in the tabular format the ingest pipeline reads."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(["id", text_col, label_col])
        for rec in records:
            writer.writerow([rec.id, rec.text, rec.class_label])
