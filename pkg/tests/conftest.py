import numpy as np
import pytest

from attnclust.corpus import build_vocabulary, split_sentences, tokenize_document


def make_blobs3():
    """60 points, 3 tight Gaussian blobs in 2D, fixed seed; returns
    (points, generator labels)."""
    rng = np.random.default_rng(42)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    points = np.concatenate(
        [c + rng.normal(0.0, 0.5, size=(20, 2)) for c in centers])
    labels = np.repeat([0, 1, 2], 20)
    return points, labels


@pytest.fixture(scope="session")
def blobs3():
    return make_blobs3()


def planted_keyword_texts(n_per_class=10, seed=0, keywords=("alphaword", "betaword"),
                          n_fillers=12, sentence_len=5):
    """2-class texts where a single keyword decides the class; fillers are
    shared. Every sentence has the same length (the keyword replaces a
    filler) so attention weights are comparable across tokens.
    Returns (texts, labels)."""
    rng = np.random.default_rng(seed)
    fillers = [f"filler{i}" for i in range(n_fillers)]
    texts, labels = [], []
    for cls, keyword in enumerate(keywords):
        for _ in range(n_per_class):
            sentences = []
            n_sents = rng.integers(2, 4)
            key_sent = rng.integers(n_sents)
            for s in range(n_sents):
                words = [fillers[i]
                         for i in rng.integers(0, n_fillers, size=sentence_len)]
                if s == key_sent:
                    words[int(rng.integers(sentence_len))] = keyword
                sentences.append(" ".join(words))
            texts.append(". ".join(sentences) + ".")
            labels.append(cls)
    return texts, labels


def tokenized_corpus(texts, labels=None):
    """Vocabulary + TokenizedDocuments for a list of raw texts."""
    vocab = build_vocabulary(
        [[w for sent in split_sentences(t) for w in sent] for t in texts])
    docs = []
    for i, text in enumerate(texts):
        label = None if labels is None else labels[i]
        docs.append(tokenize_document(text, vocab, doc_id=f"doc{i}", label=label))
    return vocab, docs


@pytest.fixture()
def planted_corpus():
    texts, labels = planted_keyword_texts()
    vocab, docs = tokenized_corpus(texts, labels)
    return vocab, docs
