"""Word vectors three ways: random, self-trained, loaded from a file.

Trains skip-gram with negative sampling on a corpus with one strongly
associated word pair and shows the association emerging, then round-trips
the matrix through the portable text format.
"""

import tempfile

import numpy as np

from attnclust.corpus import build_vocabulary, split_sentences, tokenize_document
from attnclust.embeddings import (
    SkipgramConfig,
    init_random,
    load_pretrained,
    save_word_vectors,
    train_skipgram,
)


def cosine(u, v):
    return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))


texts = ["thunder lightning."] * 40 + ["calm sea breeze.", "breeze sea calm."] * 15
vocab = build_vocabulary([[w for s in split_sentences(t) for w in s]
                          for t in texts])
docs = [tokenize_document(t, vocab, doc_id=str(i)) for i, t in enumerate(texts)]

random_matrix = init_random(len(vocab), dim=32, seed=0)
config = SkipgramConfig(dim=32, window=2, negatives=5, epochs=10,
                        learning_rate=0.1, seed=0)
trained, losses = train_skipgram(docs, vocab, config)

a, b = vocab.encode("thunder"), vocab.encode("lightning")
print(f"cosine(thunder, lightning)  random: "
      f"{cosine(random_matrix.vectors[a], random_matrix.vectors[b]):+.3f}")
print(f"cosine(thunder, lightning) trained: "
      f"{cosine(trained.vectors[a], trained.vectors[b]):+.3f}")
print(f"loss per pair: {losses[0]:.3f} -> {losses[-1]:.3f}")

# the text format other tools publish word vectors in
with tempfile.NamedTemporaryFile(suffix=".txt", delete=False) as tmp:
    save_word_vectors(trained, vocab, tmp.name)
    reloaded, coverage = load_pretrained(tmp.name, vocab, dim_expected=32)
print(f"reloaded from text file with coverage {coverage:.0%}; "
      f"identical: {np.allclose(reloaded.vectors, trained.vectors)}")
