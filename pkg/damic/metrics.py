# -*- coding: utf-8 -*-
"""metrics.py

Clustering evaluation against ground-truth classes: normalized mutual
information, adjusted Rand index and Hungarian-matched accuracy.

All three are computed from the class x cluster contingency table and are
invariant to any relabeling of the predicted clusters.
"""
from collections import namedtuple, OrderedDict

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment

from damic import InputError


NMI_AVERAGES = ('geometric', 'arithmetic')

ContingencyTable = namedtuple("ContingencyTable", "counts n")


def _check_labels(true_labels, pred_labels):
    true_labels = np.asarray(true_labels)
    pred_labels = np.asarray(pred_labels)
    if true_labels.ndim != 1 or pred_labels.ndim != 1:
        raise InputError("Label vectors must be one-dimensional")
    if true_labels.shape[0] != pred_labels.shape[0]:
        raise InputError(
            "Label vectors differ in length ({} vs {})"
            .format(true_labels.shape[0], pred_labels.shape[0]))
    if true_labels.size and (true_labels.min() < 0 or pred_labels.min() < 0):
        raise InputError("Labels must be non-negative integers")
    return true_labels.astype(np.int64), pred_labels.astype(np.int64)


def contingency(true_labels, pred_labels):
    """counts[a][b] = number of points with class a and cluster b."""
    true_labels, pred_labels = _check_labels(true_labels, pred_labels)
    n = true_labels.shape[0]
    if n == 0:
        return ContingencyTable(np.zeros((0, 0), dtype=np.int64), 0)
    shape = (true_labels.max() + 1, pred_labels.max() + 1)
    counts = sparse.coo_matrix(
        (np.ones(n, dtype=np.int64), (true_labels, pred_labels)),
        shape=shape).toarray()
    return ContingencyTable(counts, n)


def _entropy(marginal, n):
    p = marginal[marginal > 0] / float(n)
    return float(-np.sum(p * np.log(p)))


def _same_partition(counts):
    """True when the table is a permutation: one non-zero cell per used row and column."""
    nz = counts > 0
    rows = nz.sum(axis=1)
    cols = nz.sum(axis=0)
    return bool(np.all(rows[rows > 0] == 1) and np.all(cols[cols > 0] == 1))


def mutual_info(table):
    counts, n = table
    rows, cols = np.nonzero(counts)
    nij = counts[rows, cols].astype(np.float64)
    a = counts.sum(axis=1)[rows].astype(np.float64)
    b = counts.sum(axis=0)[cols].astype(np.float64)
    mi = np.sum(nij / n * (np.log(nij) + np.log(n) - np.log(a) - np.log(b)))
    return max(float(mi), 0.0)


def nmi(true_labels, pred_labels, average='geometric'):
    """Mutual information normalized by the geometric (or arithmetic) mean entropy.

    Two single-cluster partitions score 1; if only one of them has zero
    entropy the score is 0.
    """
    if average not in NMI_AVERAGES:
        raise InputError(
            "Unknown NMI average '{}'. Valid choices are {}"
            .format(average, ", ".join(NMI_AVERAGES)))
    table = contingency(true_labels, pred_labels)
    counts, n = table
    if n == 0:
        return 1.0
    h_true = _entropy(counts.sum(axis=1), n)
    h_pred = _entropy(counts.sum(axis=0), n)
    if h_true == 0.0 and h_pred == 0.0:
        return 1.0
    if h_true == 0.0 or h_pred == 0.0:
        return 0.0
    if _same_partition(counts):
        return 1.0
    if average == 'geometric':
        denom = np.sqrt(h_true * h_pred)
    else:
        denom = (h_true + h_pred) / 2.0
    return float(min(max(mutual_info(table) / denom, 0.0), 1.0))


def _comb2(values):
    values = values.astype(np.int64)
    return float(np.sum(values * (values - 1) // 2))


def ari(true_labels, pred_labels):
    """Adjusted Rand index from pair counts."""
    counts, n = contingency(true_labels, pred_labels)
    if n < 2:
        return 1.0
    sum_cells = _comb2(counts.ravel())
    sum_true = _comb2(counts.sum(axis=1))
    sum_pred = _comb2(counts.sum(axis=0))
    total = float(n) * (n - 1) / 2.0
    expected = sum_true * sum_pred / total
    maximum = (sum_true + sum_pred) / 2.0
    if maximum == expected:
        # Both partitions are a single cluster, or both are all singletons
        return 1.0
    return float((sum_cells - expected) / (maximum - expected))


def acc(true_labels, pred_labels):
    """Fraction of points matched under the best cluster -> class mapping."""
    counts, n = contingency(true_labels, pred_labels)
    if n == 0:
        return 1.0
    rows, cols = linear_sum_assignment(counts, maximize=True)
    return float(counts[rows, cols].sum()) / n


def evaluate(true_labels, pred_labels, average='geometric'):
    """NMI, ARI and ACC as an ordered record."""
    return OrderedDict([
        ('nmi', nmi(true_labels, pred_labels, average)),
        ('ari', ari(true_labels, pred_labels)),
        ('acc', acc(true_labels, pred_labels)),
    ])


def agreement(labels_a, labels_b):
    """Fraction of points on which two labelings coincide exactly."""
    labels_a, labels_b = _check_labels(labels_a, labels_b)
    if labels_a.size == 0:
        return 1.0
    return float(np.mean(labels_a == labels_b))
