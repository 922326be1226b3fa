"""Plain (attention-free) document representations.

`train_paragraph_vectors` is a distributed-bag-of-words paragraph vector
model: each document vector is trained to predict the words it contains
against negative samples, with no word-order modeling. It is the
representation used by the plain-clustering pipeline; `mean_embedding_vector`
is a cheaper diagnostic baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import PAD_ID
from .embeddings import _negative_table, _sigmoid, _token_counts
from .vectors import DocumentVector


class BaselineError(Exception):
    pass


@dataclass
class ParagraphVectorConfig:
    dim: int = 100
    negatives: int = 5
    epochs: int = 20
    learning_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if min(self.dim, self.negatives, self.epochs + 1) < 1:
            raise ValueError("dim and negatives must be positive, epochs >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class ParagraphVectorParams:
    doc_matrix: np.ndarray   # (N, d)
    word_matrix: np.ndarray  # (V, d) output vectors
    config: ParagraphVectorConfig
    noise_cumdist: np.ndarray | None = None  # corpus negative-sampling CDF


def _init_doc_matrix(n_docs, dim, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.5 / dim, 0.5 / dim, size=(n_docs, dim))


def train_paragraph_vectors(docs, vocab_size, config):
    """DBOW training over tokenized documents.

    Returns (ParagraphVectorParams, per-epoch mean loss). Zero epochs leave
    the seeded initialization untouched.
    """
    if len(docs) < 2:
        raise BaselineError("need at least 2 documents")
    doc_matrix = _init_doc_matrix(len(docs), config.dim, config.seed)
    word_matrix = np.zeros((vocab_size, config.dim))
    params = ParagraphVectorParams(doc_matrix, word_matrix, config)
    if config.epochs == 0:
        return params, []

    counts = _token_counts(docs, vocab_size)
    cumdist = _negative_table(counts)
    params.noise_cumdist = cumdist
    examples = []
    for doc_idx, doc in enumerate(docs):
        for sent in doc.sentences:
            for tok in sent:
                if tok != PAD_ID:
                    examples.append((doc_idx, tok))
    if not examples:
        raise BaselineError("no tokens to train on")
    examples = np.asarray(examples, dtype=np.int64)

    rng = np.random.default_rng(config.seed)
    total = config.epochs * len(examples)
    done = 0
    losses = []
    for _ in range(config.epochs):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        for idx in order:
            doc_idx, word = examples[idx]
            lr = config.learning_rate * max(1.0 - done / total, 1e-4)
            done += 1
            negs = np.searchsorted(cumdist, rng.random(config.negatives))
            targets = np.concatenate(([word], negs))
            labels = np.zeros(len(targets))
            labels[0] = 1.0
            d = doc_matrix[doc_idx]
            u = word_matrix[targets]
            act = _sigmoid(u @ d)
            epoch_loss += -np.log(np.clip(np.where(labels == 1.0, act, 1.0 - act),
                                          1e-12, None)).sum()
            g = (labels - act) * lr
            doc_matrix[doc_idx] = d + g @ u
            word_matrix[targets] += np.outer(g, d)
        losses.append(epoch_loss / len(examples))
    return params, losses


def train_doc_vectors(docs, vocab_size, config):
    """Convenience wrapper: one DocumentVector per input doc, order kept."""
    params, _ = train_paragraph_vectors(docs, vocab_size, config)
    return [DocumentVector(doc.doc_id, params.doc_matrix[i])
            for i, doc in enumerate(docs)]


def infer_doc_vector(params, doc, steps=50, seed=0):
    """Vector for an unseen document with the word matrix frozen.

    Runs the DBOW objective on a fresh doc vector only.
    """
    rng = np.random.default_rng(seed)
    tokens = [tok for sent in doc.sentences for tok in sent if tok != PAD_ID]
    if not tokens:
        raise BaselineError(f"document {doc.doc_id!r} has no usable tokens")
    cfg = params.config
    vec = rng.uniform(-0.5 / cfg.dim, 0.5 / cfg.dim, size=cfg.dim)
    if params.noise_cumdist is not None:
        cumdist = params.noise_cumdist
    else:
        counts = np.bincount(tokens, minlength=params.word_matrix.shape[0])
        cumdist = _negative_table(counts)
    for step in range(steps):
        lr = cfg.learning_rate * max(1.0 - step / steps, 0.05)
        for word in tokens:
            negs = np.searchsorted(cumdist, rng.random(cfg.negatives))
            targets = np.concatenate(([word], negs))
            labels = np.zeros(len(targets))
            labels[0] = 1.0
            u = params.word_matrix[targets]
            act = _sigmoid(u @ vec)
            vec = vec + ((labels - act) * lr) @ u
    return DocumentVector(doc.doc_id, vec)


def mean_embedding_vector(doc, emb):
    """Unweighted mean of the word vectors over all non-PAD tokens."""
    ids = [tok for sent in doc.sentences for tok in sent if tok != PAD_ID]
    if not ids:
        raise BaselineError(f"document {doc.doc_id!r} is all padding")
    return DocumentVector(doc.doc_id, emb.vectors[ids].mean(axis=0))
