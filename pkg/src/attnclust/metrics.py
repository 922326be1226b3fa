"""Cluster validation metrics and their aggregate.

External metrics (homogeneity, completeness, V-measure, ARI, AMI) are
computed from an exact integer contingency table; silhouette is the internal
one, Euclidean, and is ABSENT (None) rather than an error when undefined.
`average_evaluation` averages all six scores, falling back to the five
defined ones when silhouette is absent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


@dataclass
class ContingencyTable:
    counts: np.ndarray       # (R, C) int64, true class x predicted cluster
    row_labels: list
    col_labels: list
    a: np.ndarray            # row marginals (true classes)
    b: np.ndarray            # column marginals (predicted clusters)
    n: int


def contingency_table(labels_true, labels_pred):
    """Exact co-occurrence counts between two labelings of the same items."""
    labels_true = list(labels_true)
    labels_pred = list(labels_pred)
    if len(labels_true) != len(labels_pred):
        raise ValueError("label sequences differ in length")
    if not labels_true:
        raise ValueError("empty labelings")
    rows = sorted(set(labels_true))
    cols = sorted(set(labels_pred))
    r_index = {v: i for i, v in enumerate(rows)}
    c_index = {v: i for i, v in enumerate(cols)}
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for t, p in zip(labels_true, labels_pred):
        counts[r_index[t], c_index[p]] += 1
    return ContingencyTable(counts, rows, cols, counts.sum(axis=1),
                            counts.sum(axis=0), int(counts.sum()))


def _entropy(marginals, n):
    p = marginals[marginals > 0] / n
    return float(-(p * np.log(p)).sum())


def harmonic_v(homo, comp):
    """V-measure from its two components: 2hc/(h+c), 0 when both vanish."""
    if homo + comp == 0.0:
        return 0.0
    return 2.0 * homo * comp / (homo + comp)


def homogeneity_completeness_v(table):
    """Conditional-entropy metrics; V is the harmonic mean of the other two.

    Degenerate conventions: a zero-entropy side scores 1, and V is 0 when
    homogeneity + completeness is 0.
    """
    n = table.n
    h_true = _entropy(table.a, n)
    h_pred = _entropy(table.b, n)
    nz = table.counts > 0
    nij = table.counts[nz].astype(np.float64)
    ai = np.broadcast_to(table.a[:, None], table.counts.shape)[nz]
    bj = np.broadcast_to(table.b[None, :], table.counts.shape)[nz]
    h_true_given_pred = float(-(nij / n * np.log(nij / bj)).sum())
    h_pred_given_true = float(-(nij / n * np.log(nij / ai)).sum())
    homo = 1.0 if h_true == 0.0 else 1.0 - h_true_given_pred / h_true
    comp = 1.0 if h_pred == 0.0 else 1.0 - h_pred_given_true / h_pred
    return homo, comp, harmonic_v(homo, comp)


def _comb2(x):
    return x * (x - 1) / 2.0


def adjusted_rand_index(table):
    """Rand index corrected for chance under fixed marginals.

    Returns 1.0 in the degenerate case where the maximum equals the expected
    index (both partitions trivial in the same way).
    """
    sum_ij = _comb2(table.counts.astype(np.float64)).sum()
    sum_a = _comb2(table.a.astype(np.float64)).sum()
    sum_b = _comb2(table.b.astype(np.float64)).sum()
    pairs = _comb2(float(table.n))
    if pairs == 0:
        return 1.0
    expected = sum_a * sum_b / pairs
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        return 1.0
    return float((sum_ij - expected) / (maximum - expected))


def mutual_information(table):
    n = table.n
    nz = table.counts > 0
    nij = table.counts[nz].astype(np.float64)
    ai = np.broadcast_to(table.a[:, None], table.counts.shape)[nz]
    bj = np.broadcast_to(table.b[None, :], table.counts.shape)[nz]
    return float((nij / n * np.log(n * nij / (ai * bj))).sum())


def expected_mutual_information(table):
    """Exact E[MI] under the hypergeometric permutation model.

    Sums, for every (class, cluster) cell, the MI contribution of every
    feasible cell count weighted by its hypergeometric probability.
    """
    n = table.n
    emi = 0.0
    lg = gammaln
    for ai in table.a:
        for bj in table.b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.float64)
            log_pmf = (lg(ai + 1) + lg(bj + 1) + lg(n - ai + 1) + lg(n - bj + 1)
                       - lg(n + 1) - lg(nij + 1) - lg(ai - nij + 1)
                       - lg(bj - nij + 1) - lg(n - ai - bj + nij + 1))
            term = nij / n * np.log(n * nij / (float(ai) * float(bj)))
            emi += float((term * np.exp(log_pmf)).sum())
    return emi


def adjusted_mutual_info(table):
    """AMI with the arithmetic-mean normalization.

    (MI - E[MI]) / (mean(H(true), H(pred)) - E[MI]); 0 when the denominator
    vanishes.
    """
    mi = mutual_information(table)
    emi = expected_mutual_information(table)
    h_true = _entropy(table.a, table.n)
    h_pred = _entropy(table.b, table.n)
    denom = 0.5 * (h_true + h_pred) - emi
    if abs(denom) < 1e-14:
        return 0.0
    return float((mi - emi) / denom)


def silhouette_score(points, labels):
    """Mean silhouette over all points, or None when it is undefined.

    Undefined means fewer than 2 distinct clusters or every point in its own
    cluster. Points in singleton clusters score 0, as do points whose a and
    b are both 0 (coincident clusters).
    """
    x = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    n = x.shape[0]
    if labels.shape[0] != n:
        raise ValueError("labels do not cover the points")
    uniq = np.unique(labels)
    if len(uniq) < 2 or len(uniq) == n:
        return None
    # direct differences, row by row: the expanded |x|^2+|y|^2-2xy form loses
    # too much precision for near-coincident points
    d = np.empty((n, n))
    for i in range(n):
        d[i] = np.linalg.norm(x - x[i], axis=1)
    masks = [labels == lab for lab in uniq]
    sizes = [int(m.sum()) for m in masks]
    scores = np.zeros(n)
    for ci, mask in enumerate(masks):
        idx = np.flatnonzero(mask)
        if sizes[ci] == 1:
            continue  # singleton scores 0
        a = d[np.ix_(idx, mask)].sum(axis=1) / (sizes[ci] - 1)
        b = np.full(len(idx), np.inf)
        for cj, other in enumerate(masks):
            if cj == ci:
                continue
            b = np.minimum(b, d[np.ix_(idx, other)].mean(axis=1))
        denom = np.maximum(a, b)
        cluster_scores = np.zeros(len(idx))
        pos = denom > 0
        cluster_scores[pos] = (b[pos] - a[pos]) / denom[pos]
        scores[idx] = cluster_scores
    return float(scores.mean())


def average_evaluation(homo, comp, v, ari, ami, silhouette):
    """Mean of the six scores; mean of the five defined ones without silhouette.

    Returns (average, silhouette_defined).
    """
    if silhouette is None:
        return (homo + comp + v + ari + ami) / 5.0, False
    return (homo + comp + v + ari + ami + silhouette) / 6.0, True


@dataclass
class MetricReport:
    homo: float
    comp: float
    v_measure: float
    ari: float
    ami: float
    silhouette: float | None
    silhouette_defined: bool
    avg_ev: float


def evaluate(labels_true, labels_pred, points=None):
    """All metrics for one clustering; silhouette only when points are given."""
    table = contingency_table(labels_true, labels_pred)
    homo, comp, v = homogeneity_completeness_v(table)
    ari = adjusted_rand_index(table)
    ami = adjusted_mutual_info(table)
    silh = silhouette_score(points, labels_pred) if points is not None else None
    avg, defined = average_evaluation(homo, comp, v, ari, ami, silh)
    return MetricReport(homo, comp, v, ari, ami, silh, defined, avg)


ABSENT = "----"


def format_score(value):
    """3-decimal fixed point without a leading zero: 0.498 -> '.498'."""
    if value is None:
        return ABSENT
    s = f"{value:.3f}"
    if s == "-0.000":
        s = "0.000"
    if s.startswith("0."):
        s = s[1:]
    elif s.startswith("-0."):
        s = "-" + s[2:]
    return s


def parse_score(text):
    if text == ABSENT:
        return None
    return float(text)


def report_row(report):
    """The report as formatted strings, table column order."""
    return [format_score(report.homo), format_score(report.comp),
            format_score(report.v_measure), format_score(report.ari),
            format_score(report.ami), format_score(report.silhouette),
            format_score(report.avg_ev)]
