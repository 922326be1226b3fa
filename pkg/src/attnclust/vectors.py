"""Document vectors and their on-disk formats (CSV and line-delimited JSON)."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np


@dataclass
class DocumentVector:
    doc_id: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)


def save_vectors_csv(vectors, path):
    """Write rows of ``doc_id, v_0, ..., v_{d-1}`` with a header."""
    if not vectors:
        raise ValueError("no vectors to save")
    dim = vectors[0].values.shape[0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id"] + [f"v_{i}" for i in range(dim)])
        for vec in vectors:
            writer.writerow([vec.doc_id] + [repr(float(x)) for x in vec.values])


def load_vectors_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "doc_id":
            raise ValueError(f"{path}: not a document-vector CSV")
        return [DocumentVector(row[0], np.array([float(x) for x in row[1:]]))
                for row in reader]


def save_vectors_jsonl(vectors, path):
    with open(path, "w", encoding="utf-8") as fh:
        for vec in vectors:
            fh.write(json.dumps({"doc_id": vec.doc_id,
                                 "values": [float(x) for x in vec.values]}) + "\n")


def load_vectors_jsonl(path):
    vectors = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                vectors.append(DocumentVector(str(obj["doc_id"]),
                                              np.array(obj["values"])))
    return vectors


def as_matrix(vectors):
    """Stack DocumentVectors into an (n, d) float64 array plus the id list."""
    ids = [vec.doc_id for vec in vectors]
    return np.stack([vec.values for vec in vectors]).astype(np.float64), ids
