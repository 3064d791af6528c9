# -*- coding: utf-8 -*-
"""kmeans.py

Classic k-means: k-means++ seeding, Lloyd iterations and seeded restarts.
Used both as the KM baseline and to cluster autoencoder bottlenecks during
pretraining.
"""
from collections import namedtuple

import numpy as np

from damic import InputError, ShapeError


KmeansResult = namedtuple(
    "KmeansResult",
    "centroids labels inertia iterations empty_clusters")

KmeansConfig = namedtuple("KmeansConfig", "max_iter tol restarts seed")
KmeansConfig.__new__.__defaults__ = (300, 1e-6, 10, 0)


class Centroids(object):

    """k cluster means stored as a k x dim matrix."""

    def __init__(self, means):
        self.means = np.array(means, dtype=np.float64)
        if self.means.ndim != 2 or self.means.shape[0] < 1:
            raise ShapeError("Centroids must be a non-empty k x dim matrix")

    @property
    def k(self):
        return self.means.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    def permuted(self, order):
        return Centroids(self.means[list(order)])

    def __repr__(self):
        return "Centroids(k={}, dim={})".format(self.k, self.dim)


def _check(X, k):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError("X must be an n x dim matrix")
    if k < 1:
        raise InputError("k must be at least 1")
    if X.shape[0] < k:
        raise InputError(
            "Cannot find {} clusters in {} points".format(k, X.shape[0]))
    return X


def pairwise_sq_distances(X, means):
    """n x k matrix of squared distances, one column per mean."""
    return np.column_stack([np.sum((X - c) ** 2, axis=1) for c in means])


def kmeanspp_init(X, k, seed):
    """Choose k distinct data points by squared-distance-weighted sampling."""
    X = _check(X, k)
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    while len(chosen) < k:
        weights = d2.copy()
        weights[chosen] = 0.0
        total = weights.sum()
        if total > 0:
            idx = int(rng.choice(n, p=weights / total))
        else:
            # Only duplicates of chosen points remain
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(remaining))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return Centroids(X[chosen])


def lloyd_step(X, C):
    """One assignment + mean update.

    Ties go to the lowest cluster index; an empty cluster keeps its mean.

    :returns: (labels, new centroids, inertia of the labels under the new means)
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != C.dim:
        raise ShapeError(
            "Data dimension {} does not match centroid dimension {}"
            .format(X.shape[-1], C.dim))
    labels = np.argmin(pairwise_sq_distances(X, C.means), axis=1)
    means = C.means.copy()
    for i in range(C.k):
        mask = labels == i
        if mask.any():
            means[i] = X[mask].mean(axis=0)
    inertia = float(np.sum((X - means[labels]) ** 2))
    return labels, Centroids(means), inertia


def run_lloyd(X, C, max_iter=300, tol=1e-6):
    """Iterate Lloyd steps from C until the relative improvement drops below tol."""
    previous = np.inf
    iterations = 0
    labels = None
    inertia = np.inf
    for iterations in range(1, max_iter + 1):
        labels, C, inertia = lloyd_step(X, C)
        if inertia == 0.0:
            break
        if np.isfinite(previous) and (previous - inertia) < tol * previous:
            break
        previous = inertia
    empty = C.k - len(np.unique(labels))
    return KmeansResult(C, labels, inertia, iterations, empty)


def kmeans_fit(X, k, cfg=None):
    """Best-inertia k-means over seeded k-means++ restarts.

    Restart r is seeded with cfg.seed + r.
    """
    cfg = cfg or KmeansConfig()
    X = _check(X, k)
    best = None
    for r in range(max(cfg.restarts, 1)):
        C0 = kmeanspp_init(X, k, cfg.seed + r)
        result = run_lloyd(X, C0, cfg.max_iter, cfg.tol)
        if best is None or result.inertia < best.inertia:
            best = result
    return best
