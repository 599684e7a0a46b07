"""Neighbourhood metrics: AvgkNN, LOF and improved precision/recall.

All neighbour searches are exact, Euclidean, and break distance ties by the
lower point index.
"""

from __future__ import annotations

import numpy as np

LRD_FLOOR = 1e-12
_CHUNK = 1024


def pairwise_distances(a, b):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijd,ijd->ij", diff, diff))


def _rows_knn(D, k):
    kth = np.partition(D, k - 1, axis=1)[:, k - 1 : k]
    idx = np.empty((len(D), k), dtype=int)
    tied = (D <= kth).sum(axis=1) > k
    if np.any(~tied):
        rows = np.nonzero(~tied)[0]
        sub = D[rows]
        cand = np.argpartition(sub, k - 1, axis=1)[:, :k]
        # order candidates by (distance, index)
        cand.sort(axis=1)
        cd = np.take_along_axis(sub, cand, axis=1)
        idx[rows] = np.take_along_axis(cand, np.argsort(cd, axis=1, kind="stable"), axis=1)
    for r in np.nonzero(tied)[0]:
        idx[r] = np.argsort(D[r], kind="stable")[:k]
    return np.take_along_axis(D, idx, axis=1), idx


def knn(queries, reference, k: int, exclude_self: bool = False):
    """``k`` nearest reference points of each query: ``(distances, indices)``, both ``(n, k)``.

    With ``exclude_self`` the queries must be the reference set itself and
    each point's own index is skipped.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    reference = np.atleast_2d(np.asarray(reference, dtype=float))
    avail = len(reference) - (1 if exclude_self else 0)
    if k < 1 or k > avail:
        raise ValueError(f"k={k} needs 1 <= k <= {avail} (number of available neighbours)")
    dists = np.empty((len(queries), k))
    idx = np.empty((len(queries), k), dtype=int)
    for s in range(0, len(queries), _CHUNK):
        D = pairwise_distances(queries[s:s + _CHUNK], reference)
        if exclude_self:
            rows = np.arange(len(D))
            D[rows, s + rows] = np.inf
        dists[s:s + _CHUNK], idx[s:s + _CHUNK] = _rows_knn(D, k)
    return dists, idx


def avg_knn(points, k: int = 5, reference=None):
    """Mean distance to the ``k`` nearest neighbours (self excluded).

    With ``reference`` the neighbours are taken from that set instead.
    Higher means sparser surroundings.
    """
    if reference is None:
        d, _ = knn(points, points, k, exclude_self=True)
    else:
        d, _ = knn(points, reference, k)
    return d.mean(axis=1)


def _lrd(nbr_dist, nbr_idx, k_distance):
    reach = np.maximum(nbr_dist, k_distance[nbr_idx])
    return 1.0 / np.maximum(reach.mean(axis=1), LRD_FLOOR)


def lof(points, k: int = 20, reference=None):
    """Local Outlier Factor.

    Without ``reference`` this is the classic within-batch LOF. With it, each
    point is scored against the reference set (novelty style): neighbours,
    k-distances and neighbour densities all come from the reference, whose own
    statistics are computed with self excluded.

    Reachability means are floored at ``1e-12``, so a batch of identical
    points has LOF 1 everywhere.
    """
    ref = points if reference is None else reference
    rd, ri = knn(ref, ref, k, exclude_self=True)
    k_distance = rd[:, -1]
    ref_lrd = _lrd(rd, ri, k_distance)
    if reference is None:
        qd, qi, q_lrd = rd, ri, ref_lrd
    else:
        qd, qi = knn(points, ref, k)
        q_lrd = _lrd(qd, qi, k_distance)
    return ref_lrd[qi].mean(axis=1) / q_lrd


def improved_precision_recall(real, generated, k: int = 5):
    """Manifold-ball precision and recall.

    A point is covered by a set if it lies within distance ``<=`` of some
    member's k-th-nearest-neighbour radius (radius computed within that set,
    self excluded). Precision is the covered fraction of ``generated`` by
    ``real``; recall swaps the roles.
    """
    real = np.atleast_2d(np.asarray(real, dtype=float))
    generated = np.atleast_2d(np.asarray(generated, dtype=float))
    return _coverage(generated, real, k), _coverage(real, generated, k)


def _coverage(queries, support, k):
    radii = knn(support, support, k, exclude_self=True)[0][:, -1]
    hit = np.zeros(len(queries), dtype=bool)
    for s in range(0, len(queries), _CHUNK):
        D = pairwise_distances(queries[s:s + _CHUNK], support)
        hit[s:s + _CHUNK] = np.any(D <= radii[None, :], axis=1)
    return float(hit.mean())


def histogram(values, bins: int = 50):
    """Equal-width density histogram over ``[min, max]``: ``(edges, densities)``."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise ValueError("empty input")
    if bins < 1:
        raise ValueError("bins must be positive")
    return np.histogram(values, bins=bins, density=True)[::-1]
