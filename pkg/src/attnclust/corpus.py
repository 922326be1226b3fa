"""Corpus loading, filtering, stratified splitting and tokenization.

Documents are kept in a two-level form (sentences of word ids) so that the
word/sentence hierarchy survives all the way into the encoder. Everything in
this module is a pure function of its inputs plus an explicit seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import random
import re
from collections import Counter
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

PAD_ID = 0
OOV_ID = 1
PAD_TOKEN = "<pad>"
OOV_TOKEN = "<oov>"

_SENTENCE_SPLIT = re.compile(r"[.!?]+")
_EDGE_STRIP = re.compile(r"^[^0-9a-z]+|[^0-9a-z]+$")


class CorpusError(Exception):
    """Raised for unusable input files or empty results."""


@dataclass
class RawRecord:
    id: str
    text: str
    class_label: str
    extra: dict = field(default_factory=dict)


@dataclass
class LoadReport:
    n_rows: int = 0
    n_loaded: int = 0
    n_dropped_empty: int = 0
    skipped: list = field(default_factory=list)  # (line_no, reason)


@dataclass
class FilteredCorpus:
    records: list
    class_counts: dict


@dataclass
class SplitPair:
    training: list  # record indices into the filtered corpus
    clustering: list


@dataclass
class TokenizedDocument:
    doc_id: str
    sentences: list  # list of list of token ids
    label: int | None = None


def load_records(path, text_col="review", label_col="condition", id_col=None,
                 delimiter=None):
    """Read a delimited text file with a header row into RawRecords.

    Returns (records, LoadReport). Rows whose text or label cell is empty
    after trimming are dropped and counted; rows missing either cell
    entirely are skipped with their line number. The delimiter defaults to
    tab for ``.tsv`` files and comma otherwise.
    """
    if delimiter is None:
        delimiter = "\t" if str(path).lower().endswith(".tsv") else ","
    report = LoadReport()
    records = []
    seen_ids = set()
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        if reader.fieldnames is None:
            raise CorpusError(f"{path}: empty file, no header row")
        for col in (text_col, label_col):
            if col not in reader.fieldnames:
                raise CorpusError(
                    f"{path}: column {col!r} not in header {reader.fieldnames}")
        if id_col is not None and id_col not in reader.fieldnames:
            raise CorpusError(f"{path}: column {id_col!r} not in header")
        for row in reader:
            report.n_rows += 1
            line_no = reader.line_num
            text = row.get(text_col)
            label = row.get(label_col)
            if text is None or label is None:
                report.skipped.append((line_no, "row shorter than header"))
                continue
            text = text.strip()
            label = label.strip()
            if not text or not label:
                report.n_dropped_empty += 1
                continue
            rec_id = row[id_col].strip() if id_col else str(report.n_rows - 1)
            if rec_id in seen_ids:
                raise CorpusError(f"{path}: duplicate record id {rec_id!r} "
                                  f"at line {line_no}")
            seen_ids.add(rec_id)
            extra = {k: v for k, v in row.items()
                     if k not in (text_col, label_col, id_col) and k is not None}
            records.append(RawRecord(rec_id, text, label, extra))
    report.n_loaded = len(records)
    return records, report


def filter_classes(records, min_count=3, max_per_class=20, seed=0):
    """Drop classes with fewer than min_count records and cap large classes.

    Classes above max_per_class are downsampled uniformly without
    replacement using the seed; retained records keep their input order.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if max_per_class < min_count:
        raise ValueError("max_per_class must be >= min_count")
    by_class = {}
    for i, rec in enumerate(records):
        by_class.setdefault(rec.class_label, []).append(i)
    keep = set()
    rng = random.Random(seed)
    for label in sorted(by_class):
        idxs = by_class[label]
        if len(idxs) < min_count:
            continue
        if len(idxs) > max_per_class:
            idxs = rng.sample(idxs, max_per_class)
        keep.update(idxs)
    retained = [rec for i, rec in enumerate(records) if i in keep]
    if not retained:
        raise CorpusError("no class survived filtering")
    counts = Counter(rec.class_label for rec in retained)
    return FilteredCorpus(retained, dict(counts))


def stratified_split(corpus, ratio, seed=0):
    """Split a FilteredCorpus into training/clustering index lists per class.

    Within each class the records are shuffled with the seed and the first
    round(ratio * count) go to training, ties rounding up (toward training).
    A single-record class cannot be split; its record goes to the clustering
    half and a warning is logged.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    by_class = {}
    for i, rec in enumerate(corpus.records):
        by_class.setdefault(rec.class_label, []).append(i)
    rng = random.Random(seed)
    training, clustering = [], []
    for label in sorted(by_class):
        idxs = list(by_class[label])
        rng.shuffle(idxs)
        if len(idxs) == 1:
            log.warning("class %r has a single record; sent to clustering split",
                        label)
            clustering.extend(idxs)
            continue
        n_train = int(ratio * len(idxs) + 0.5)
        training.extend(idxs[:n_train])
        clustering.extend(idxs[n_train:])
    training.sort()
    clustering.sort()
    return SplitPair(training, clustering)


def split_sentences(text):
    """Segment text into sentences of normalized word tokens.

    Sentences end at runs of ``.``, ``!`` or ``?``. Words are lowercased,
    whitespace-split, and stripped of non-alphanumeric edge characters;
    words that vanish entirely are dropped, as are empty sentences.
    """
    sentences = []
    for chunk in _SENTENCE_SPLIT.split(text.lower()):
        words = []
        for raw in chunk.split():
            word = _EDGE_STRIP.sub("", raw)
            if word:
                words.append(word)
        if words:
            sentences.append(words)
    return sentences


@dataclass
class Vocabulary:
    token_to_id: dict
    id_to_token: list
    freqs: dict

    def __len__(self):
        return len(self.id_to_token)

    def encode(self, token):
        return self.token_to_id.get(token, OOV_ID)

    def decode(self, ids):
        return [self.id_to_token[i] for i in ids]

    def fingerprint(self):
        """Stable hex digest of the id -> token assignment."""
        blob = "\x00".join(self.id_to_token).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def to_json(self):
        return {"tokens": self.id_to_token[2:],
                "freqs": [self.freqs[t] for t in self.id_to_token[2:]]}

    @classmethod
    def from_json(cls, obj):
        id_to_token = [PAD_TOKEN, OOV_TOKEN] + list(obj["tokens"])
        freqs = dict(zip(obj["tokens"], obj["freqs"]))
        return cls({t: i for i, t in enumerate(id_to_token)}, id_to_token, freqs)


def build_vocabulary(token_lists, min_freq=1):
    """Build a Vocabulary from an iterable of token lists.

    Ids 0 and 1 are reserved for PAD and OOV. Remaining ids are assigned by
    descending frequency, ties broken by token string, so two builds of the
    same corpus agree exactly. Tokens under min_freq are excluded.
    """
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    freqs = Counter()
    for tokens in token_lists:
        freqs.update(tokens)
    if not freqs:
        raise CorpusError("empty corpus: no tokens to build a vocabulary from")
    kept = sorted((t for t, c in freqs.items() if c >= min_freq),
                  key=lambda t: (-freqs[t], t))
    id_to_token = [PAD_TOKEN, OOV_TOKEN] + kept
    token_to_id = {t: i for i, t in enumerate(id_to_token)}
    return Vocabulary(token_to_id, id_to_token, {t: freqs[t] for t in kept})


def tokenize_document(text, vocab, max_sentences=30, max_words=50,
                      doc_id="", label=None):
    """Turn raw text into a TokenizedDocument of vocabulary ids.

    Unknown words map to the OOV id; sentences and words beyond the limits
    are truncated. Text that yields no tokens at all becomes the degenerate
    single-sentence document [[OOV]].
    """
    if max_sentences < 1 or max_words < 1:
        raise ValueError("limits must be >= 1")
    sentences = []
    for words in split_sentences(text)[:max_sentences]:
        sentences.append([vocab.encode(w) for w in words[:max_words]])
    if not sentences:
        sentences = [[OOV_ID]]
    return TokenizedDocument(doc_id, sentences, label)


def encode_labels(records):
    """Dense 0-based class ids by sorted label string.

    Returns (label_to_id, id_to_label) over the distinct labels present.
    """
    labels = sorted({rec.class_label for rec in records})
    return {lab: i for i, lab in enumerate(labels)}, labels


def save_tokenized(docs, path):
    """Write TokenizedDocuments as line-delimited JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({"id": doc.doc_id, "label_id": doc.label,
                                 "sentences": doc.sentences}) + "\n")


def load_tokenized(path):
    """Read TokenizedDocuments from line-delimited JSON."""
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{line_no}: bad JSON: {exc}") from exc
            docs.append(TokenizedDocument(str(obj["id"]), obj["sentences"],
                                          obj.get("label_id")))
    return docs
