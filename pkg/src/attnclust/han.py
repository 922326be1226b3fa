"""Hierarchical attention document encoder and classifier.

Words are encoded per sentence by a Bi-LSTM and pooled with word-level
attention into sentence vectors; those are encoded by a second Bi-LSTM and
pooled with sentence-level attention into a single document vector, which
feeds a softmax classifier during training. The document vector (taken just
before the classifier) is the representation handed to clustering.

Documents are processed unpadded, one at a time; a mini-batch gradient is the
mean of its per-document gradients, so results are bit-reproducible for a
given seed.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from .corpus import PAD_ID
from .embeddings import EmbeddingMatrix
from .neural import (
    AttentionParams,
    LstmCellParams,
    NeuralError,
    ParamStore,
    attention_backward,
    attention_forward,
    bilstm_backward,
    bilstm_forward,
    dense_softmax_xent,
    init_attention_params,
    init_lstm_params,
    softmax,
    xavier_uniform,
    zero_attention_grads,
    zero_lstm_grads,
)
from .vectors import DocumentVector

CHECKPOINT_MAGIC = b"ATTNHAN1"
CHECKPOINT_VERSION = 1

EMBEDDING_MODES = ("random", "self-trained", "pretrained")


class TrainingDiverged(Exception):
    def __init__(self, epoch):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


class CheckpointError(Exception):
    pass


@dataclass
class HanConfig:
    embedding_mode: str = "self-trained"
    d: int = 100
    h_word: int = 50
    h_sent: int = 50
    a: int = 100
    classes: int = 2
    epochs: int = 40
    batch_size: int = 16
    learning_rate: float = 0.5
    seed: int = 0
    fine_tune_embeddings: bool | None = None  # None: on unless pretrained
    clip_norm: float = 5.0
    lr_halve_every: int = 100

    def __post_init__(self):
        if self.embedding_mode not in EMBEDDING_MODES:
            raise ValueError(f"unknown embedding mode {self.embedding_mode!r}")
        if min(self.d, self.h_word, self.h_sent, self.a, self.batch_size) < 1:
            raise ValueError("dimensions and batch_size must be positive")
        if self.classes < 2:
            raise ValueError("need at least 2 classes")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.fine_tune_embeddings is None:
            self.fine_tune_embeddings = self.embedding_mode != "pretrained"


@dataclass
class HanParams:
    embedding: EmbeddingMatrix
    word_fwd: LstmCellParams
    word_bwd: LstmCellParams
    word_attn: AttentionParams
    sent_fwd: LstmCellParams
    sent_bwd: LstmCellParams
    sent_attn: AttentionParams
    W_c: np.ndarray
    b_c: np.ndarray

    @property
    def doc_dim(self):
        return 2 * self.sent_fwd.hidden_size


@dataclass
class HanGrads:
    embedding: np.ndarray
    word_fwd: LstmCellParams
    word_bwd: LstmCellParams
    word_attn: AttentionParams
    sent_fwd: LstmCellParams
    sent_bwd: LstmCellParams
    sent_attn: AttentionParams
    W_c: np.ndarray
    b_c: np.ndarray


@dataclass
class TrainingHistory:
    losses: list = field(default_factory=list)
    accuracies: list = field(default_factory=list)


def init_han_params(config, embeddings):
    """Fresh parameters around a copy of the given embedding matrix."""
    if embeddings.dim != config.d:
        raise NeuralError(f"embedding dim {embeddings.dim} != config.d {config.d}")
    rng = np.random.default_rng(config.seed)
    emb = EmbeddingMatrix(embeddings.vectors.copy(), embeddings.dim,
                          embeddings.vocab_hash)
    return HanParams(
        embedding=emb,
        word_fwd=init_lstm_params(rng, config.d, config.h_word),
        word_bwd=init_lstm_params(rng, config.d, config.h_word),
        word_attn=init_attention_params(rng, 2 * config.h_word, config.a),
        sent_fwd=init_lstm_params(rng, 2 * config.h_word, config.h_sent),
        sent_bwd=init_lstm_params(rng, 2 * config.h_word, config.h_sent),
        sent_attn=init_attention_params(rng, 2 * config.h_sent, config.a),
        W_c=xavier_uniform(rng, (config.classes, 2 * config.h_sent),
                           2 * config.h_sent, config.classes),
        b_c=np.zeros(config.classes),
    )


def zero_han_grads(params, include_embedding):
    emb = (np.zeros_like(params.embedding.vectors) if include_embedding
           else None)
    return HanGrads(
        embedding=emb,
        word_fwd=zero_lstm_grads(params.word_fwd),
        word_bwd=zero_lstm_grads(params.word_bwd),
        word_attn=zero_attention_grads(params.word_attn),
        sent_fwd=zero_lstm_grads(params.sent_fwd),
        sent_bwd=zero_lstm_grads(params.sent_bwd),
        sent_attn=zero_attention_grads(params.sent_attn),
        W_c=np.zeros_like(params.W_c),
        b_c=np.zeros_like(params.b_c),
    )


def _named_tensors(params):
    """Fixed (name, tensor) order shared by the store and the checkpoint."""
    pairs = [("embedding", params.embedding.vectors)]
    for prefix in ("word_fwd", "word_bwd", "sent_fwd", "sent_bwd"):
        cell = getattr(params, prefix)
        pairs += [(f"{prefix}.W", cell.W), (f"{prefix}.U", cell.U),
                  (f"{prefix}.b", cell.b)]
    for prefix in ("word_attn", "sent_attn"):
        attn = getattr(params, prefix)
        pairs += [(f"{prefix}.W", attn.W), (f"{prefix}.b", attn.b),
                  (f"{prefix}.u", attn.u)]
    pairs += [("classifier.W", params.W_c), ("classifier.b", params.b_c)]
    return pairs


def make_param_store(params, grads):
    """Register every trainable tensor (embedding only when its grad exists)."""
    store = ParamStore()
    grad_map = dict(_named_tensors_of_grads(grads))
    for name, tensor in _named_tensors(params):
        if name == "embedding" and grads.embedding is None:
            continue
        store.register(name, tensor, grad_map[name])
    return store


def _named_tensors_of_grads(grads):
    pairs = [("embedding", grads.embedding)]
    for prefix in ("word_fwd", "word_bwd", "sent_fwd", "sent_bwd"):
        cell = getattr(grads, prefix)
        pairs += [(f"{prefix}.W", cell.W), (f"{prefix}.U", cell.U),
                  (f"{prefix}.b", cell.b)]
    for prefix in ("word_attn", "sent_attn"):
        attn = getattr(grads, prefix)
        pairs += [(f"{prefix}.W", attn.W), (f"{prefix}.b", attn.b),
                  (f"{prefix}.u", attn.u)]
    pairs += [("classifier.W", grads.W_c), ("classifier.b", grads.b_c)]
    return pairs


# ---------------------------------------------------------------------------
# Forward / backward over one document


def _forward_doc(params, doc):
    vocab_size = params.embedding.vocab_size
    sent_vecs = []
    word_weights = []
    caches = []
    for sent in doc.sentences:
        ids = np.asarray(sent, dtype=np.intp)
        if ids.size == 0:
            raise NeuralError(f"document {doc.doc_id!r} has an empty sentence")
        if ids.min() < 0 or ids.max() >= vocab_size:
            raise NeuralError(f"document {doc.doc_id!r} has token ids outside "
                              f"the {vocab_size}-row embedding")
        X = params.embedding.vectors[ids]
        states, bi_cache = bilstm_forward(X, params.word_fwd, params.word_bwd)
        pooled, weights, att_cache = attention_forward(states, params.word_attn)
        sent_vecs.append(pooled)
        word_weights.append(weights)
        caches.append((ids, bi_cache, att_cache))
    S = np.stack(sent_vecs)
    sent_states, sent_bi_cache = bilstm_forward(S, params.sent_fwd,
                                                params.sent_bwd)
    doc_vec, sent_weights, sent_att_cache = attention_forward(
        sent_states, params.sent_attn)
    cache = (caches, sent_bi_cache, sent_att_cache)
    return doc_vec, word_weights, sent_weights, cache


def _backward_doc(params, grads, cache, d_doc_vec):
    caches, sent_bi_cache, sent_att_cache = cache
    d_states = attention_backward(d_doc_vec, sent_att_cache, params.sent_attn,
                                  grads.sent_attn)
    dS = bilstm_backward(d_states, sent_bi_cache, params.sent_fwd,
                         params.sent_bwd, grads.sent_fwd, grads.sent_bwd)
    for s, (ids, bi_cache, att_cache) in enumerate(caches):
        d_word_states = attention_backward(dS[s], att_cache, params.word_attn,
                                           grads.word_attn)
        dX = bilstm_backward(d_word_states, bi_cache, params.word_fwd,
                             params.word_bwd, grads.word_fwd, grads.word_bwd)
        if grads.embedding is not None:
            np.add.at(grads.embedding, ids, dX)


def forward_classify(params, doc):
    """Classify one document.

    Returns (probabilities, DocumentVector, word attention weights per
    sentence, sentence attention weights).
    """
    doc_vec, word_weights, sent_weights, _ = _forward_doc(params, doc)
    probs = softmax(params.W_c @ doc_vec + params.b_c)
    return probs, DocumentVector(doc.doc_id, doc_vec), word_weights, sent_weights


def doc_loss_and_grads(params, grads, doc):
    """Cross-entropy loss of one labeled document; accumulates all gradients.

    Returns (loss, predicted class).
    """
    doc_vec, _, _, cache = _forward_doc(params, doc)
    probs, loss, (dv, dW_c, db_c) = dense_softmax_xent(
        doc_vec, doc.label, params.W_c, params.b_c)
    grads.W_c += dW_c
    grads.b_c += db_c
    _backward_doc(params, grads, cache, dv)
    return float(loss), int(np.argmax(probs))


def train(config, docs, embeddings):
    """Mini-batch gradient descent on the classification loss.

    Gradients are averaged per batch, clipped to config.clip_norm, and the
    learning rate is halved every config.lr_halve_every epochs. Raises
    TrainingDiverged if the loss goes non-finite.
    """
    if not docs:
        raise ValueError("no training documents")
    for doc in docs:
        if doc.label is None or not 0 <= doc.label < config.classes:
            raise ValueError(f"document {doc.doc_id!r} label {doc.label!r} "
                             f"not in [0, {config.classes})")
    params = init_han_params(config, embeddings)
    history = TrainingHistory()
    if config.epochs == 0:
        return params, history

    grads = zero_han_grads(params, config.fine_tune_embeddings)
    store = make_param_store(params, grads)
    rng = np.random.default_rng(config.seed)
    n = len(docs)
    for epoch in range(config.epochs):
        lr = config.learning_rate * 0.5 ** (epoch // config.lr_halve_every)
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_correct = 0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            store.zero_grads()
            for i in batch:
                loss, pred = doc_loss_and_grads(params, grads, docs[i])
                epoch_loss += loss
                n_correct += pred == docs[i].label
            if not np.isfinite(epoch_loss):
                raise TrainingDiverged(epoch)
            for name in store.names():
                store.grad(name)[...] /= len(batch)
            if grads.embedding is not None:
                grads.embedding[PAD_ID] = 0.0
            store.clip_grads(config.clip_norm)
            store.sgd_step(lr)
        history.losses.append(epoch_loss / n)
        history.accuracies.append(n_correct / n)
    return params, history


def encode_corpus(params, docs):
    """Document vectors for each doc, classifier head unused, order kept."""
    out = []
    for doc in docs:
        doc_vec, _, _, _ = _forward_doc(params, doc)
        out.append(DocumentVector(doc.doc_id, doc_vec))
    return out


# ---------------------------------------------------------------------------
# Checkpointing


def save_checkpoint(params, config, path):
    """Single-file container: magic, JSON header, then raw little-endian f8."""
    tensors = _named_tensors(params)
    header = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "vocab_hash": params.embedding.vocab_hash,
        "tensors": [{"name": name, "shape": list(t.shape)}
                    for name, t in tensors],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, tensor in tensors:
            fh.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())


def load_checkpoint(path, expected_vocab_hash=None):
    """Read a checkpoint back; returns (HanParams, HanConfig).

    Raises CheckpointError on truncation, version mismatch, or (when
    expected_vocab_hash is given) a vocabulary fingerprint mismatch.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc
    if len(raw) < len(CHECKPOINT_MAGIC) + 8 or not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file")
    offset = len(CHECKPOINT_MAGIC)
    (header_len,) = struct.unpack_from("<Q", raw, offset)
    offset += 8
    if offset + header_len > len(raw):
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[offset:offset + header_len])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    offset += header_len
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version "
                              f"{header.get('version')!r}")
    if (expected_vocab_hash is not None
            and header["vocab_hash"] != expected_vocab_hash):
        raise CheckpointError(
            f"{path}: checkpoint was trained with a different vocabulary "
            f"({header['vocab_hash'][:12]}... != {expected_vocab_hash[:12]}...)")
    config = HanConfig(**header["config"])
    arrays = {}
    for spec in header["tensors"]:
        size = int(np.prod(spec["shape"])) if spec["shape"] else 1
        nbytes = size * 8
        if offset + nbytes > len(raw):
            raise CheckpointError(f"{path}: truncated tensor data at "
                                  f"{spec['name']!r}")
        arrays[spec["name"]] = np.frombuffer(
            raw, dtype="<f8", count=size, offset=offset
        ).astype(np.float64).reshape(spec["shape"])
        offset += nbytes
    try:
        params = _params_from_arrays(arrays, config, header["vocab_hash"])
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing tensor {exc}") from exc
    return params, config


def _params_from_arrays(arrays, config, vocab_hash):
    def cell(prefix):
        return LstmCellParams(arrays[f"{prefix}.W"], arrays[f"{prefix}.U"],
                              arrays[f"{prefix}.b"])

    def attn(prefix):
        return AttentionParams(arrays[f"{prefix}.W"], arrays[f"{prefix}.b"],
                               arrays[f"{prefix}.u"])

    emb = EmbeddingMatrix(arrays["embedding"], config.d, vocab_hash)
    return HanParams(emb, cell("word_fwd"), cell("word_bwd"),
                     attn("word_attn"), cell("sent_fwd"), cell("sent_bwd"),
                     attn("sent_attn"), arrays["classifier.W"],
                     arrays["classifier.b"])
