"""Word embedding acquisition: random, self-trained skip-gram, or from file.

The self-trained path is plain skip-gram with negative sampling, run
single-threaded so a seed fully determines the result. The returned matrix
always keeps row 0 (PAD) at zero.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .corpus import PAD_ID

log = logging.getLogger(__name__)


class EmbeddingError(Exception):
    pass


@dataclass
class EmbeddingMatrix:
    vectors: np.ndarray  # (V, d) float64, row PAD_ID all zeros
    dim: int
    vocab_hash: str = ""

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.dim:
            raise EmbeddingError(f"expected (V, {self.dim}) matrix, "
                                 f"got {self.vectors.shape}")

    @property
    def vocab_size(self):
        return self.vectors.shape[0]

    def validate(self):
        if not np.all(np.isfinite(self.vectors)):
            raise EmbeddingError("embedding matrix contains non-finite entries")
        if np.any(self.vectors[PAD_ID] != 0.0):
            raise EmbeddingError("PAD row must stay zero")


@dataclass
class SkipgramConfig:
    dim: int = 100
    window: int = 3
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if min(self.dim, self.window, self.negatives + 1, self.epochs + 1) < 1:
            raise ValueError("all SkipgramConfig fields must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def init_random(vocab_size, dim, seed, vocab_hash=""):
    """Uniform init in [-0.5/d, 0.5/d] with the PAD row zeroed."""
    if vocab_size < 2:
        raise ValueError("vocab_size must be >= 2 (PAD and OOV)")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    scale = 0.5 / dim
    vectors = rng.uniform(-scale, scale, size=(vocab_size, dim))
    vectors[PAD_ID] = 0.0
    return EmbeddingMatrix(vectors, dim, vocab_hash)


def _token_counts(docs, vocab_size):
    counts = np.zeros(vocab_size, dtype=np.int64)
    for doc in docs:
        for sent in doc.sentences:
            for tok in sent:
                counts[tok] += 1
    return counts


def _negative_table(counts):
    """Unigram^0.75 sampling distribution as a cumulative array."""
    probs = counts.astype(np.float64) ** 0.75
    probs[PAD_ID] = 0.0
    total = probs.sum()
    if total <= 0:
        raise EmbeddingError("no tokens to sample negatives from")
    return np.cumsum(probs / total)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def train_skipgram(docs, vocab, config):
    """Train skip-gram with negative sampling on tokenized documents.

    Center/context pairs are taken within `config.window` positions inside a
    sentence; negatives are drawn from the unigram^0.75 distribution. The
    learning rate decays linearly to 1e-4 of its start value over all
    updates. Returns (center-word EmbeddingMatrix, per-epoch mean loss).

    With epochs=0 the seeded initialization is returned untouched.
    """
    vocab_size = len(vocab)
    vocab_hash = vocab.fingerprint()
    if config.epochs == 0:
        return init_random(vocab_size, config.dim, config.seed, vocab_hash), []

    counts = _token_counts(docs, vocab_size)
    if int((counts > 0).sum()) < 2:
        raise EmbeddingError("corpus has fewer than 2 distinct tokens")
    cumdist = _negative_table(counts)

    rng = np.random.default_rng(config.seed)
    w_in = init_random(vocab_size, config.dim, config.seed).vectors
    w_out = np.zeros((vocab_size, config.dim))

    pairs = []
    for doc in docs:
        for sent in doc.sentences:
            for i, center in enumerate(sent):
                lo = max(0, i - config.window)
                hi = min(len(sent), i + config.window + 1)
                for j in range(lo, hi):
                    if j != i:
                        pairs.append((center, sent[j]))
    if not pairs:
        raise EmbeddingError("no training pairs: all sentences have one token")
    pairs = np.asarray(pairs, dtype=np.int64)

    total_updates = config.epochs * len(pairs)
    done = 0
    losses = []
    for _ in range(config.epochs):
        order = rng.permutation(len(pairs))
        epoch_loss = 0.0
        for idx in order:
            center, context = pairs[idx]
            lr = config.learning_rate * max(1.0 - done / total_updates, 1e-4)
            done += 1
            negs = np.searchsorted(cumdist, rng.random(config.negatives))
            targets = np.concatenate(([context], negs))
            labels = np.zeros(len(targets))
            labels[0] = 1.0
            v = w_in[center]
            u = w_out[targets]
            act = _sigmoid(u @ v)
            epoch_loss += -np.log(np.clip(np.where(labels == 1.0, act, 1.0 - act),
                                          1e-12, None)).sum()
            g = (labels - act) * lr
            w_in[center] = v + g @ u
            w_out[targets] += np.outer(g, v)
        losses.append(epoch_loss / len(pairs))
    w_in[PAD_ID] = 0.0
    return EmbeddingMatrix(w_in, config.dim, vocab_hash), losses


def save_word_vectors(matrix, vocab, path, header=True):
    """Write the plain-text word-vector format: ``token v1 v2 ... vd`` lines.

    Reserved PAD/OOV rows are not written. An optional first line carries
    ``V d`` counts.
    """
    tokens = vocab.id_to_token[2:]
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(tokens)} {matrix.dim}\n")
        for offset, token in enumerate(tokens):
            row = matrix.vectors[offset + 2]
            fh.write(token + " " + " ".join(repr(float(x)) for x in row) + "\n")


def save_matrix_json(matrix, path):
    """Embedding checkpoint: JSON container {dim, vocab_hash, rows}."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"dim": matrix.dim, "vocab_hash": matrix.vocab_hash,
                   "rows": matrix.vectors.tolist()}, fh)


def load_matrix_json(path, expected_vocab_hash=None):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    matrix = EmbeddingMatrix(np.array(obj["rows"], dtype=np.float64),
                             int(obj["dim"]), obj.get("vocab_hash", ""))
    if (expected_vocab_hash is not None
            and matrix.vocab_hash != expected_vocab_hash):
        raise EmbeddingError(f"{path}: embedding matrix was built for a "
                             f"different vocabulary")
    matrix.validate()
    return matrix


def load_pretrained(path, vocab, dim_expected, seed=0):
    """Fill an EmbeddingMatrix from a text word-vector file.

    Format: one line per word, ``token v1 v2 ... vd``. A first line of two
    integers is treated as a ``V d`` header and skipped. Vocabulary tokens
    absent from the file get seeded random rows. Returns
    (EmbeddingMatrix, coverage ratio over non-reserved tokens).
    """
    matrix = init_random(len(vocab), dim_expected, seed, vocab.fingerprint())
    found = set()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise EmbeddingError(f"cannot read {path}: {exc}") from exc
    with fh:
        for line_no, line in enumerate(fh):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if line_no == 0 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                    continue  # header
                except ValueError:
                    pass
            token, values = parts[0], parts[1:]
            if len(values) != dim_expected:
                raise EmbeddingError(
                    f"{path}:{line_no + 1}: {len(values)} values for "
                    f"{token!r}, expected {dim_expected}")
            tok_id = vocab.token_to_id.get(token)
            if tok_id is None or tok_id <= 1:  # reserved rows stay as seeded
                continue
            if tok_id in found:
                warnings.warn(f"duplicate vector for {token!r}; keeping the "
                              f"first occurrence", stacklevel=2)
                continue
            matrix.vectors[tok_id] = np.array(values, dtype=np.float64)
            found.add(tok_id)
    n_real = len(vocab) - 2  # excluding PAD and OOV
    coverage = len(found) / n_real if n_real else 0.0
    matrix.validate()
    log.info("pretrained coverage: %d/%d tokens (%.1f%%)",
             len(found), n_real, 100 * coverage)
    return matrix, coverage
