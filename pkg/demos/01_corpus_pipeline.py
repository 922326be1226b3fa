"""Corpus pipeline walkthrough: load, filter, split, tokenize.

Generates a small synthetic labeled TSV, then runs it through the same
ingestion steps the experiment harness uses and prints what happens to the
data at each stage.
"""

import tempfile

from attnclust.corpus import (
    build_vocabulary,
    filter_classes,
    load_records,
    split_sentences,
    stratified_split,
    tokenize_document,
)
from attnclust.synth import generate_synthetic_records, write_records_tsv

# A toy corpus: 4 classes, deliberately unbalanced by dropping records.
records = generate_synthetic_records(n_classes=4, docs_per_class=30, seed=7)
records = records[:2] + records[30:]  # class 0 keeps only 2 records

with tempfile.NamedTemporaryFile(suffix=".tsv", delete=False) as tmp:
    write_records_tsv(records, tmp.name)
    path = tmp.name

records, report = load_records(path)
print(f"loaded {report.n_loaded} rows ({report.n_dropped_empty} dropped)")

# classes under 3 records disappear, classes over 20 are capped
filtered = filter_classes(records, min_count=3, max_per_class=20, seed=0)
print("class counts after filtering:", filtered.class_counts)

split = stratified_split(filtered, ratio=0.5, seed=0)
print(f"stratified split: {len(split.training)} training / "
      f"{len(split.clustering)} clustering")

# vocabulary ids are ordered by frequency, then alphabetically
token_lists = [[w for sent in split_sentences(r.text) for w in sent]
               for r in filtered.records]
vocab = build_vocabulary(token_lists, min_freq=1)
print(f"vocabulary: {len(vocab)} entries; most frequent:",
      vocab.id_to_token[2:7])

doc = tokenize_document(filtered.records[0].text, vocab, doc_id="demo")
print("first document, first sentence as ids:", doc.sentences[0])
print("decoded back:", vocab.decode(doc.sentences[0]))
