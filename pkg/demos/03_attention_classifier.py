"""Train the hierarchical attention classifier and read its attention.

Every document's class is decided by a single planted keyword among shared
filler words. After training, the word-attention weights should pile onto
the keywords, and the extracted document vectors should separate by class.
"""

import numpy as np

from attnclust.corpus import build_vocabulary, split_sentences, tokenize_document
from attnclust.embeddings import init_random
from attnclust.han import HanConfig, encode_corpus, forward_classify, train

rng = np.random.default_rng(4)
KEYWORDS = ("sunny", "stormy")
FILLERS = [f"word{i}" for i in range(10)]

texts, labels = [], []
for cls, keyword in enumerate(KEYWORDS):
    for _ in range(12):
        sents = []
        for s in range(2):
            words = [FILLERS[i] for i in rng.integers(0, len(FILLERS), 5)]
            if s == 0:
                words[int(rng.integers(5))] = keyword
            sents.append(" ".join(words))
        texts.append(". ".join(sents) + ".")
        labels.append(cls)

vocab = build_vocabulary([[w for s in split_sentences(t) for w in s]
                          for t in texts])
docs = [tokenize_document(t, vocab, doc_id=f"d{i}", label=labels[i])
        for i, t in enumerate(texts)]

config = HanConfig(embedding_mode="self-trained", d=16, h_word=8, h_sent=8,
                   a=10, classes=2, epochs=80, batch_size=6,
                   learning_rate=0.5, seed=0)
emb = init_random(len(vocab), config.d, seed=0, vocab_hash=vocab.fingerprint())
params, history = train(config, docs, emb)
print(f"training accuracy after {config.epochs} epochs: "
      f"{history.accuracies[-1]:.0%}")

# where does the attention go for one document of each class?
for doc in (docs[0], docs[12]):
    probs, vec, word_weights, sent_weights = forward_classify(params, doc)
    print(f"\ndoc {doc.doc_id} (class {doc.label}), "
          f"p = {np.round(probs, 3)}")
    for sent, weights in zip(doc.sentences, word_weights):
        ranked = sorted(zip(vocab.decode(sent), weights),
                        key=lambda p: -p[1])
        print("  " + "  ".join(f"{w}:{a:.2f}" for w, a in ranked[:3]))

# document vectors separate by class even before clustering
vectors = encode_corpus(params, docs)
matrix = np.stack([v.values for v in vectors])
centroid = {c: matrix[np.array(labels) == c].mean(0) for c in (0, 1)}
gap = np.linalg.norm(centroid[0] - centroid[1])
spread = matrix.std()
print(f"\nclass-centroid distance {gap:.2f} vs coordinate spread {spread:.2f}")
