"""k-means under the amplitude distance, with elbow selection and vote-based consensus.

Centroids are Karcher means of their members, so every distance respects the
phase-invariant metric. Restarts are combined by averaging binary
co-assignment matrices and thresholding the vote frequencies.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import EmptyDatasetError
from .registration import amplitude_distance, pairwise_distance_matrix
from .stats import karcher_mean
from .trajectory import TsrvcPair

log = logging.getLogger(__name__)

#: Karcher settings for centroid updates; centroids do not need PCA-grade polish
CENTROID_KARCHER = dict(max_iter=15, tol=1e-3, polish_tol=1e-5, polish_max_iter=25)


@dataclass
class ClusterResult:
    """One k-means partition: labels, Karcher centroids, and the averaged error."""

    assignments: np.ndarray
    centroids: list[TsrvcPair]
    asse: float
    k: int
    restarts_used: int = 1

    def members(self, label: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.assignments == label)]

    def to_dict(self) -> dict:
        from .trajectory import integrate

        return {
            "k": int(self.k),
            "assignments": [int(a) for a in self.assignments],
            "clusters": [self.members(c) for c in range(self.k)],
            "centroid_trajectories": [
                np.asarray(integrate(c).samples, dtype=float).tolist() for c in self.centroids
            ],
            "asse": float(self.asse),
            "restarts_used": int(self.restarts_used),
        }


@dataclass
class CoAssignmentMatrix:
    """Vote frequencies: entry (i, j) is how often items i and j shared a cluster."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("co-assignment matrix must be square")
        self.matrix = m


def _distances_to_centroid(dataset, centroid, **kwargs) -> np.ndarray:
    return np.array([amplitude_distance(centroid, item, **kwargs).distance for item in dataset])


def _assignment_distances(dataset, centroids, **kwargs) -> np.ndarray:
    """Distance matrix (n, k) from every item to every centroid."""
    return np.stack([_distances_to_centroid(dataset, c, **kwargs) for c in centroids], axis=1)


def _asse(dist_to_own: np.ndarray) -> float:
    return float(np.mean(dist_to_own ** 2))


def kmeans(dataset, k: int, seed: int = 0, max_iter: int = 20,
           init: list[TsrvcPair] | None = None, dist_matrix: np.ndarray | None = None,
           **kwargs) -> ClusterResult:
    """Lloyd iterations under the amplitude distance with Karcher-mean centroids.

    Initial centroids are ``k`` dataset items drawn without replacement from a
    seeded generator (or ``init`` when given). Empty clusters are reseeded with
    the globally worst-fit item. Returns the best configuration seen, so the
    reported ASSE never exceeds that of the initial assignment.
    """
    n = len(dataset)
    if n == 0:
        raise EmptyDatasetError("cannot cluster an empty dataset")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")

    if init is not None:
        centroids = list(init)
        dists = _assignment_distances(dataset, centroids, **kwargs)
    else:
        rng = np.random.default_rng(seed)
        chosen = rng.choice(n, size=k, replace=False)
        centroids = [dataset[i] for i in chosen]
        if dist_matrix is not None:
            dists = dist_matrix[:, chosen]
        else:
            dists = _assignment_distances(dataset, centroids, **kwargs)

    assignments = np.argmin(dists, axis=1)
    best = None
    for _ in range(max_iter):
        # fix empty clusters before updating centroids
        for c in range(k):
            if not np.any(assignments == c):
                own = dists[np.arange(n), assignments]
                worst = int(np.argmax(own))
                assignments[worst] = c
                dists[worst, :] = np.inf
                dists[worst, c] = 0.0

        asse = _asse(dists[np.arange(n), assignments])
        if best is None or asse < best[0] - 1e-12:
            best = (asse, assignments.copy(), list(centroids))

        centroids = []
        for c in range(k):
            members = [dataset[i] for i in np.flatnonzero(assignments == c)]
            if len(members) == 1:
                centroids.append(members[0])
            else:
                centroids.append(karcher_mean(members, **CENTROID_KARCHER).mean)
        dists = _assignment_distances(dataset, centroids, **kwargs)
        new_assignments = np.argmin(dists, axis=1)
        if np.array_equal(new_assignments, assignments):
            asse = _asse(dists[np.arange(n), assignments])
            if best is None or asse < best[0] - 1e-12:
                best = (asse, assignments.copy(), list(centroids))
            break
        assignments = new_assignments

    asse, assignments, centroids = best
    return ClusterResult(assignments=assignments, centroids=centroids, asse=asse, k=k)


def elbow_curve(dataset, k_values, restarts: int = 3, seed: int = 0,
                **kwargs) -> list[tuple[int, float]]:
    """Best ASSE per k, warm-starting each k from the previous best partition.

    The warm start adds the worst-fit item as a new centroid, which makes the
    returned curve non-increasing in k.
    """
    k_values = sorted(set(int(k) for k in k_values))
    n = len(dataset)
    if any(k < 1 or k > n for k in k_values):
        raise ValueError(f"k values must lie in [1, {n}]")
    dist_matrix = pairwise_distance_matrix(dataset, **kwargs) if n >= 2 else None
    out = []
    prev = None
    for k in k_values:
        best = None
        for r in range(restarts):
            result = kmeans(dataset, k, seed=seed + 1000 * r, dist_matrix=dist_matrix, **kwargs)
            if best is None or result.asse < best.asse:
                best = result
        if prev is not None and prev.k < k:
            warm = _warm_start(dataset, prev, k, **kwargs)
            if warm is not None and warm.asse < best.asse:
                best = warm
        if prev is not None and best.asse > prev.asse:
            best = ClusterResult(prev.assignments.copy(), list(prev.centroids), prev.asse, k)
        out.append((k, best.asse))
        prev = best
    return out


def _warm_start(dataset, prev: ClusterResult, k: int, **kwargs):
    """Grow a partition to ``k`` clusters by promoting the worst-fit items to centroids."""
    centroids = list(prev.centroids)
    dists = _assignment_distances(dataset, centroids, **kwargs)
    while len(centroids) < k:
        own = dists[np.arange(len(dataset)), np.argmin(dists, axis=1)]
        worst = int(np.argmax(own))
        centroids.append(dataset[worst])
        dists = np.hstack([dists, _distances_to_centroid(dataset, dataset[worst], **kwargs)[:, None]])
    return kmeans(dataset, k, init=centroids, **kwargs)


def co_assignment(assignments: np.ndarray) -> np.ndarray:
    a = np.asarray(assignments)
    return (a[:, None] == a[None, :]).astype(float)


def consensus(dataset, k: int, runs: int = 10, seed: int = 0,
              **kwargs) -> tuple[ClusterResult, CoAssignmentMatrix]:
    """Vote-based k-means: average co-assignment over seeded runs, then re-partition.

    The averaged matrix is thresholded at 0.5 and its connected components are
    reconciled to exactly k clusters (merging the smallest into its nearest
    neighbor, splitting the largest with a fresh k-means on the subgroup).
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    n = len(dataset)
    dist_matrix = pairwise_distance_matrix(dataset, **kwargs) if n >= 2 else np.zeros((1, 1))
    votes = np.zeros((n, n))
    results = []
    for r in range(runs):
        result = kmeans(dataset, k, seed=seed + r, dist_matrix=dist_matrix, **kwargs)
        results.append(result)
        votes += co_assignment(result.assignments)
    votes /= runs

    labels = _components(votes >= 0.5)
    labels = _reconcile(dataset, labels, k, dist_matrix, seed, **kwargs)

    centroids = []
    for c in range(k):
        members = [dataset[i] for i in np.flatnonzero(labels == c)]
        centroids.append(members[0] if len(members) == 1
                         else karcher_mean(members, **CENTROID_KARCHER).mean)
    dists = _assignment_distances(dataset, centroids, **kwargs)
    asse = _asse(dists[np.arange(n), labels])
    final = ClusterResult(assignments=labels, centroids=centroids, asse=asse, k=k,
                          restarts_used=runs)
    return final, CoAssignmentMatrix(votes)


def _components(adjacency: np.ndarray) -> np.ndarray:
    """Connected-component labels of a boolean adjacency matrix."""
    n = adjacency.shape[0]
    labels = np.full(n, -1, dtype=int)
    current = 0
    for start in range(n):
        if labels[start] >= 0:
            continue
        stack = [start]
        labels[start] = current
        while stack:
            node = stack.pop()
            for nxt in np.flatnonzero(adjacency[node]):
                if labels[nxt] < 0:
                    labels[nxt] = current
                    stack.append(nxt)
        current += 1
    return labels


def _reconcile(dataset, labels: np.ndarray, k: int, dist_matrix: np.ndarray,
               seed: int, **kwargs) -> np.ndarray:
    """Force a component labeling to exactly k clusters."""
    labels = labels.copy()

    def relabel(a):
        _, inv = np.unique(a, return_inverse=True)
        return inv

    labels = relabel(labels)
    while labels.max() + 1 > k:
        sizes = np.bincount(labels)
        smallest = int(np.argmin(sizes))
        members = np.flatnonzero(labels == smallest)
        others = np.flatnonzero(labels != smallest)
        # merge into the component with the closest average distance
        avg = {}
        for c in np.unique(labels[others]):
            rows = np.flatnonzero(labels == c)
            avg[c] = float(np.mean(dist_matrix[np.ix_(members, rows)]))
        target = min(avg, key=avg.get)
        labels[members] = target
        labels = relabel(labels)
    while labels.max() + 1 < k:
        sizes = np.bincount(labels)
        largest = int(np.argmax(sizes))
        members = np.flatnonzero(labels == largest)
        sub = [dataset[i] for i in members]
        split = kmeans(sub, 2, seed=seed, **kwargs)
        new_label = labels.max() + 1
        labels[members[np.asarray(split.assignments) == 1]] = new_label
        labels = relabel(labels)
    return labels


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two partitions of the same items."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise ValueError("label vectors must have the same length")
    n = a.size
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ua.size, ub.size), dtype=int)
    np.add.at(table, (ia, ib), 1)
    sum_cells = sum(comb(int(x), 2) for x in table.ravel())
    sum_rows = sum(comb(int(x), 2) for x in table.sum(axis=1))
    sum_cols = sum(comb(int(x), 2) for x in table.sum(axis=0))
    total = comb(n, 2)
    expected = sum_rows * sum_cols / total if total else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))
