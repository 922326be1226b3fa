"""Clustering algorithms over document vectors (Euclidean throughout).

Seven algorithms share one output shape: a ClusterAssignment whose non-noise
labels always form a contiguous 0..k_found-1 range (noise is -1). Algorithms
taking an explicit cluster count repair empty clusters by reseeding from the
farthest point, so they return exactly k non-empty clusters whenever the
input has at least k distinct points. All of them are deterministic given
(input, parameters, seed).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

NOISE = -1


class ClusteringError(Exception):
    pass


@dataclass
class PointSet:
    """An (n, m) point matrix with optional per-row document ids; no labels."""
    points: np.ndarray
    doc_ids: list | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise ClusteringError("points must be a non-empty 2-D array")
        if not np.all(np.isfinite(self.points)):
            raise ClusteringError("points contain non-finite values")
        if self.doc_ids is not None and len(self.doc_ids) != len(self.points):
            raise ClusteringError("doc_ids length != number of points")


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    k_found: int
    diagnostics: dict = field(default_factory=dict)


def _as_points(points):
    if isinstance(points, PointSet):
        return points.points
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ClusteringError("expected an (n, m) point array")
    return x


def _finalize(labels, diagnostics):
    """Relabel non-noise clusters to 0..k-1 in order of first appearance."""
    labels = np.asarray(labels, dtype=np.int64)
    mapping = {}
    out = np.full(labels.shape, NOISE, dtype=np.int64)
    for i, lab in enumerate(labels):
        if lab == NOISE:
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return ClusterAssignment(out, len(mapping), diagnostics)


def _pairwise_sq(x, y=None):
    y = x if y is None else y
    d2 = (np.sum(x * x, axis=1)[:, None] + np.sum(y * y, axis=1)[None, :]
          - 2.0 * x @ y.T)
    return np.maximum(d2, 0.0)


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = _pairwise_sq(x, centers[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:  # fewer distinct points than centers so far
            centers[j] = x[rng.integers(n)]
        else:
            centers[j] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, _pairwise_sq(x, centers[j:j + 1]).ravel())
    return centers


def _repair_empty(x, centers, d2, labels):
    """Reseed any empty cluster from the currently farthest point."""
    assigned = d2[np.arange(len(x)), labels]
    for j in range(centers.shape[0]):
        if np.any(labels == j):
            continue
        far = int(np.argmax(assigned))
        centers[j] = x[far]
        d2[:, j] = _pairwise_sq(x, centers[j:j + 1]).ravel()
        labels = np.argmin(d2, axis=1)
        assigned = d2[np.arange(len(x)), labels]
    return labels


def kmeans(points, k, n_init=10, max_iter=300, seed=None):
    """Lloyd iterations from k-means++ seeding, best of n_init restarts.

    Restarts are compared by final inertia, ties by restart index. The
    per-iteration inertia trace of the winning restart is available under
    diagnostics["inertia_history"] and is non-increasing by construction.
    """
    x = _as_points(points)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ClusteringError(f"k={k} not in [1, {n}]")
    rng = np.random.default_rng(seed)
    best = None
    for restart in range(n_init):
        centers = _kmeanspp(x, k, rng)
        prev = None
        history = []
        iterations = 0
        converged = False
        for _ in range(max_iter):
            iterations += 1
            d2 = _pairwise_sq(x, centers)
            labels = np.argmin(d2, axis=1)
            labels = _repair_empty(x, centers, d2, labels)
            inertia = float(d2[np.arange(n), labels].sum())
            history.append(inertia)
            if prev is not None and np.array_equal(labels, prev):
                converged = True
                break
            prev = labels
            for j in range(k):
                centers[j] = x[labels == j].mean(axis=0)
        if best is None or history[-1] < best[0]:
            best = (history[-1], labels, centers.copy(), history, iterations,
                    converged)
    inertia, labels, centers, history, iterations, converged = best
    return _finalize(labels, {
        "algorithm": "kmeans", "k": k, "inertia": inertia,
        "inertia_history": history, "iterations": iterations,
        "converged": converged, "n_init": n_init,
    })


def minibatch_kmeans(points, k, batch_size=32, max_iter=100, seed=None):
    """k-means with streaming mini-batch updates (per-centroid rate 1/count).

    Batches are drawn without replacement, so batch_size >= n degenerates to
    full-batch passes. A final full assignment (with empty-cluster repair)
    produces the labels.
    """
    x = _as_points(points)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ClusteringError(f"k={k} not in [1, {n}]")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(x, k, rng)
    counts = np.zeros(k)
    for _ in range(max_iter):
        batch = rng.choice(n, size=min(batch_size, n), replace=False)
        assign = np.argmin(_pairwise_sq(x[batch], centers), axis=1)
        for row, c in zip(batch, assign):
            counts[c] += 1.0
            centers[c] += (x[row] - centers[c]) / counts[c]
    d2 = _pairwise_sq(x, centers)
    labels = np.argmin(d2, axis=1)
    labels = _repair_empty(x, centers, d2, labels)
    inertia = float(d2[np.arange(n), labels].sum())
    return _finalize(labels, {
        "algorithm": "minibatch_kmeans", "k": k, "batch_size": batch_size,
        "iterations": max_iter, "inertia": inertia, "converged": True,
    })


_LINKAGES = ("ward", "complete", "average")


def agglomerative(points, k, linkage="ward"):
    """Bottom-up merging until k clusters remain.

    Lance-Williams updates over a stored dissimilarity matrix (squared
    Euclidean for ward, Euclidean otherwise); ties pick the smallest (i, j)
    pair, where a merged cluster keeps the smallest index of its members.
    """
    x = _as_points(points)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ClusteringError(f"k={k} not in [1, {n}]")
    if linkage not in _LINKAGES:
        raise ClusteringError(f"linkage must be one of {_LINKAGES}")
    d = _pairwise_sq(x)
    if linkage != "ward":
        d = np.sqrt(d)
    np.fill_diagonal(d, np.inf)
    sizes = np.ones(n)
    members = [[i] for i in range(n)]
    active = n
    while active > k:
        # row-major argmin finds the lexicographically smallest tied pair
        i, j = np.unravel_index(np.argmin(d), d.shape)
        if i > j:
            i, j = j, i
        ni, nj = sizes[i], sizes[j]
        if linkage == "ward":
            nk = sizes
            new = ((ni + nk) * d[i] + (nj + nk) * d[j] - nk * d[i, j]) \
                / (ni + nj + nk)
        elif linkage == "complete":
            new = np.maximum(d[i], d[j])
        else:
            new = (ni * d[i] + nj * d[j]) / (ni + nj)
        d[i] = new
        d[:, i] = new
        d[i, i] = np.inf
        d[j] = np.inf
        d[:, j] = np.inf
        sizes[i] = ni + nj
        members[i].extend(members[j])
        members[j] = None
        active -= 1
    labels = np.empty(n, dtype=np.int64)
    lab = 0
    for i in range(n):
        if members[i] is not None:
            labels[members[i]] = lab
            lab += 1
    return _finalize(labels, {"algorithm": "agglomerative", "k": k,
                              "linkage": linkage, "converged": True})


def _kth_neighbor_distances(x, kth):
    d = np.sqrt(_pairwise_sq(x))
    d.sort(axis=1)
    kth = min(kth, d.shape[1] - 1)
    return d[:, kth]  # column 0 is the self-distance


def default_dbscan_eps(points, min_samples=4):
    """Largest distance to the min_samples-th nearest neighbor.

    At this radius every point reaches min_samples neighbors, so no point is
    density-starved; on well-separated data dbscan then recovers connected
    groups with no noise.
    """
    x = _as_points(points)
    return float(np.max(_kth_neighbor_distances(x, min_samples)))


def dbscan(points, eps=None, min_samples=4):
    """Density clustering with core/border/noise semantics.

    The eps-neighborhood includes the point itself; border points join the
    first cluster that reaches them in scan order; unreachable points stay
    NOISE. eps defaults to default_dbscan_eps of the input.
    """
    x = _as_points(points)
    n = x.shape[0]
    if min_samples < 1:
        raise ClusteringError("min_samples must be >= 1")
    if eps is None:
        eps = default_dbscan_eps(x, min_samples)
    if eps <= 0:
        raise ClusteringError("eps must be positive")
    d = np.sqrt(_pairwise_sq(x))
    within = d <= eps
    neighbor_lists = [np.flatnonzero(within[i]) for i in range(n)]
    core = np.array([len(nb) >= min_samples for nb in neighbor_lists])
    labels = np.full(n, NOISE, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] != NOISE:
            continue
        labels[i] = cluster
        queue = [i]
        while queue:
            p = queue.pop()
            for q in neighbor_lists[p]:
                if labels[q] == NOISE:
                    labels[q] = cluster
                    if core[q]:
                        queue.append(q)
        cluster += 1
    return _finalize(labels, {
        "algorithm": "dbscan", "eps": float(eps), "min_samples": min_samples,
        "n_core": int(core.sum()), "n_noise": int((labels == NOISE).sum()),
        "converged": True,
    })


def default_mean_shift_bandwidth(points):
    """Half the median pairwise distance."""
    x = _as_points(points)
    if x.shape[0] < 2:
        return 1.0
    d = np.sqrt(_pairwise_sq(x))
    iu = np.triu_indices(x.shape[0], k=1)
    return float(np.median(d[iu]) / 2.0)


def mean_shift(points, bandwidth=None, max_iter=300):
    """Flat-kernel mode seeking started from every point.

    Converged modes lying within bandwidth/2 of an earlier mode are merged;
    each point is labeled by its nearest surviving mode.
    """
    x = _as_points(points)
    n = x.shape[0]
    if bandwidth is None:
        bandwidth = default_mean_shift_bandwidth(x)
    if bandwidth <= 0:
        raise ClusteringError("bandwidth must be positive")
    tol = 1e-3 * bandwidth
    modes = x.copy()
    live = np.ones(n, dtype=bool)
    iterations = 0
    for _ in range(max_iter):
        if not live.any():
            break
        iterations += 1
        d2 = _pairwise_sq(modes[live], x)
        inside = d2 <= bandwidth * bandwidth
        counts = inside.sum(axis=1)
        shifted = np.where(counts[:, None] > 0,
                           (inside @ x) / np.maximum(counts, 1)[:, None],
                           modes[live])
        moved = np.linalg.norm(shifted - modes[live], axis=1)
        modes[live] = shifted
        still = np.zeros(n, dtype=bool)
        still[np.flatnonzero(live)[moved >= tol]] = True
        live = still
    kept = []
    for i in range(n):
        if all(np.linalg.norm(modes[i] - modes[j]) > bandwidth / 2.0
               for j in kept):
            kept.append(i)
    centers = modes[kept]
    labels = np.argmin(_pairwise_sq(x, centers), axis=1)
    return _finalize(labels, {
        "algorithm": "mean_shift", "bandwidth": float(bandwidth),
        "iterations": iterations, "k_modes": len(kept),
        "converged": not live.any(),
    })


# ---------------------------------------------------------------------------
# BIRCH


@dataclass
class ClusteringFeature:
    """(n, linear sum, squared sum) summary of a set of points."""
    n: int
    ls: np.ndarray
    ss: float

    @classmethod
    def of_point(cls, x):
        return cls(1, x.copy(), float(x @ x))

    def add(self, other):
        return ClusteringFeature(self.n + other.n, self.ls + other.ls,
                                 self.ss + other.ss)

    @property
    def centroid(self):
        return self.ls / self.n

    @property
    def radius(self):
        c = self.centroid
        return math.sqrt(max(self.ss / self.n - float(c @ c), 0.0))


class _CFEntry:
    __slots__ = ("cf", "child", "point_ids")

    def __init__(self, cf, child=None):
        self.cf = cf
        self.child = child
        self.point_ids = []  # filled only for leaf entries


class _CFNode:
    __slots__ = ("is_leaf", "entries")

    def __init__(self, is_leaf):
        self.is_leaf = is_leaf
        self.entries = []


def _closest_entry(node, x):
    dists = [np.linalg.norm(e.cf.centroid - x) for e in node.entries]
    return int(np.argmin(dists))


def _split_node(node):
    """Split an overfull node around its two farthest entries."""
    cents = np.stack([e.cf.centroid for e in node.entries])
    d2 = _pairwise_sq(cents)
    i, j = np.unravel_index(np.argmax(d2), d2.shape)
    left = _CFNode(node.is_leaf)
    right = _CFNode(node.is_leaf)
    for idx, entry in enumerate(node.entries):
        di = d2[idx, i]
        dj = d2[idx, j]
        (left if di <= dj else right).entries.append(entry)
    return left, right


def _node_cf(node):
    cf = node.entries[0].cf
    for e in node.entries[1:]:
        cf = cf.add(e.cf)
    return cf


def _insert(node, x, point_id, threshold, branching):
    """Insert a point; returns (entry_a, entry_b) if the node split, else None."""
    if node.is_leaf:
        if node.entries:
            idx = _closest_entry(node, x)
            entry = node.entries[idx]
            merged = entry.cf.add(ClusteringFeature.of_point(x))
            if merged.radius <= threshold:
                entry.cf = merged
                entry.point_ids.append(point_id)
                return None
        fresh = _CFEntry(ClusteringFeature.of_point(x))
        fresh.point_ids.append(point_id)
        node.entries.append(fresh)
    else:
        idx = _closest_entry(node, x)
        entry = node.entries[idx]
        split = _insert(entry.child, x, point_id, threshold, branching)
        if split is None:
            entry.cf = _node_cf(entry.child)
            return None
        node.entries.pop(idx)
        node.entries.extend(split)
    if len(node.entries) > branching:
        left, right = _split_node(node)
        return (_CFEntry(_node_cf(left), left), _CFEntry(_node_cf(right), right))
    return None


def _leaf_entries(node):
    if node.is_leaf:
        return list(node.entries)
    out = []
    for e in node.entries:
        out.extend(_leaf_entries(e.child))
    return out


def default_birch_threshold(points):
    """An eighth of the median pairwise distance.

    Small enough that a heavy subcluster cannot swallow far-away points
    through RMS-radius dilution; the global step does the real merging.
    """
    x = _as_points(points)
    if x.shape[0] < 2:
        return 0.5
    d = np.sqrt(_pairwise_sq(x))
    iu = np.triu_indices(x.shape[0], k=1)
    return float(max(np.median(d[iu]) / 8.0, 1e-12))


def birch(points, k, threshold=None, branching=50):
    """CF-tree insertion, then ward agglomeration of leaf-subcluster centroids.

    Each point is labeled through the subcluster that absorbed it. If fewer
    subclusters than k emerge, k is clamped (and recorded in diagnostics).
    threshold defaults to default_birch_threshold of the input.
    """
    x = _as_points(points)
    n = x.shape[0]
    if threshold is None:
        threshold = default_birch_threshold(x)
    if threshold <= 0:
        raise ClusteringError("threshold must be positive")
    if branching < 2:
        raise ClusteringError("branching factor must be >= 2")
    if not 1 <= k <= n:
        raise ClusteringError(f"k={k} not in [1, {n}]")
    root = _CFNode(is_leaf=True)
    for i in range(n):
        split = _insert(root, x[i], i, threshold, branching)
        if split is not None:
            new_root = _CFNode(is_leaf=False)
            new_root.entries.extend(split)
            root = new_root
    leaves = _leaf_entries(root)
    k_eff = min(k, len(leaves))
    if k_eff < k:
        log.warning("birch: only %d subclusters for k=%d; clamping",
                    len(leaves), k)
    centroids = np.stack([e.cf.centroid for e in leaves])
    sub_labels = agglomerative(centroids, k_eff, linkage="ward").labels
    labels = np.empty(n, dtype=np.int64)
    for entry, lab in zip(leaves, sub_labels):
        labels[entry.point_ids] = lab
    return _finalize(labels, {
        "algorithm": "birch", "k": k, "k_used": k_eff,
        "threshold": float(threshold), "branching": branching,
        "n_subclusters": len(leaves), "converged": True,
    })


def affinity_propagation(points, damping=0.9, max_iter=200,
                         convergence_iter=15, preference=None):
    """Responsibility/availability message passing on s(i,j) = -|xi-xj|^2.

    The preference (self-similarity) defaults to the median off-diagonal
    similarity; exemplars emerge rather than being requested. The update
    rules contain no randomness, so results are deterministic. If the
    message passing never produces a positive exemplar score, the single
    best-scoring point is used (flagged as non-converged).
    """
    x = _as_points(points)
    n = x.shape[0]
    if not 0.5 <= damping < 1.0:
        raise ClusteringError("damping must be in [0.5, 1)")
    if n == 1:
        return _finalize([0], {"algorithm": "affinity_propagation",
                               "iterations": 0, "converged": True,
                               "exemplars": [0]})
    s = -_pairwise_sq(x)
    off = s[~np.eye(n, dtype=bool)]
    pref = float(np.median(off)) if preference is None else preference
    np.fill_diagonal(s, pref)
    r = np.zeros((n, n))
    a = np.zeros((n, n))
    rows = np.arange(n)
    exemplars_prev = None
    stable = 0
    converged = False
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        # responsibilities
        asum = a + s
        top = asum.argmax(axis=1)
        first = asum[rows, top]
        asum[rows, top] = -np.inf
        second = asum.max(axis=1)
        r_new = s - first[:, None]
        r_new[rows, top] = s[rows, top] - second
        r = damping * r + (1.0 - damping) * r_new
        # availabilities
        rp = np.maximum(r, 0.0)
        np.fill_diagonal(rp, r.diagonal())
        col = rp.sum(axis=0)
        a_new = col[None, :] - rp
        diag = a_new.diagonal().copy()
        a_new = np.minimum(a_new, 0.0)
        np.fill_diagonal(a_new, diag)
        a = damping * a + (1.0 - damping) * a_new
        exemplars = np.flatnonzero((a + r).diagonal() > 0)
        if exemplars_prev is not None and np.array_equal(exemplars,
                                                         exemplars_prev):
            stable += 1
            if stable >= convergence_iter and len(exemplars) > 0:
                converged = True
                break
        else:
            stable = 0
        exemplars_prev = exemplars
    exemplars = np.flatnonzero((a + r).diagonal() > 0)
    if len(exemplars) == 0:
        exemplars = np.array([int(np.argmax((a + r).diagonal()))])
        converged = False
    labels = exemplars[np.argmax(s[:, exemplars], axis=1)]
    labels[exemplars] = exemplars
    if not converged:
        log.warning("affinity_propagation did not converge in %d iterations",
                    max_iter)
    return _finalize(labels, {
        "algorithm": "affinity_propagation", "damping": damping,
        "preference": pref, "iterations": iterations, "converged": converged,
        "exemplars": [int(e) for e in exemplars],
    })


def estimate_k_sqrt(n):
    """Square-root heuristic for the number of clusters."""
    if n < 1:
        raise ClusteringError("n must be >= 1")
    return max(1, round(math.sqrt(n)))
