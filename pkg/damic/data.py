# -*- coding: utf-8 -*-
"""data.py

Datasets and the ways to get them:

- gen_synthetic:        Gaussian blobs in a low-dimensional latent space, pushed
                        through a random nonlinear map into the observed space
- load_idx:             IDX image/label file pairs (MNIST, Fashion-MNIST)
- load_dense_csv:       comma-separated feature rows, optionally labelled
- load_sparse_triplets: (row, col, value) triplets, e.g. tf-idf matrices
- save_dataset / load_dataset: the binary container

Every loader returns a Dataset with features in [0, 1].
"""
import csv
import gzip
import struct
from collections import namedtuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.special import expit

from damic import (
    ConfigError,
    ConsistencyError,
    DataError,
    FormatError,
    InputError,
)
from damic.container import read_container, write_container
from damic.utils import seeded_rng

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049


class Dataset(object):

    """A data matrix with optional integer labels.

    :param feature_range: how X was normalized, e.g. {'kind': 'scale', 'scale': 255}
    or {'kind': 'minmax', 'min': [...], 'max': [...]}
    """

    def __init__(self, X, labels=None, name="", feature_range=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise FormatError("A dataset needs a 2-d matrix, got shape {}".format(X.shape))
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (X.shape[0],):
                raise ConsistencyError(
                    "{} labels for {} points".format(labels.shape[0], X.shape[0]))
        self.X = X
        self.labels = labels
        self.name = name
        self.feature_range = feature_range or {'kind': 'none'}

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def has_labels(self):
        return self.labels is not None

    def __len__(self):
        return self.n

    def __repr__(self):
        return "Dataset({!r}, n={}, d={}, labelled={})".format(
            self.name, self.n, self.d, self.has_labels)


_SyntheticSpec = namedtuple(
    "SyntheticSpec", "n_per_cluster means sigma obs_dim w_seed noise_seed")


class SyntheticSpec(_SyntheticSpec):

    """Parameters of the synthetic benchmark."""

    def __new__(cls, n_per_cluster=1000,
                means=((1.8, 1.8), (1.8, -1.8), (-1.8, 1.8), (-1.8, -1.8)),
                sigma=0.7, obs_dim=100, w_seed=0, noise_seed=1):
        means = tuple(tuple(float(v) for v in m) for m in means)
        self = super(SyntheticSpec, cls).__new__(
            cls, n_per_cluster, means, sigma, obs_dim, w_seed, noise_seed)
        self.validate()
        return self

    def validate(self):
        if self.n_per_cluster < 1:
            raise ConfigError("n_per_cluster must be at least 1")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive, got {}".format(self.sigma))
        if self.obs_dim < 2:
            raise ConfigError("obs_dim must be at least 2, got {}".format(self.obs_dim))
        if not self.means or len(set(len(m) for m in self.means)) != 1:
            raise ConfigError("Cluster means must all have the same dimension")

    @property
    def latent_dim(self):
        return len(self.means[0])


def observe(V, W):
    """x = sigmoid(W v) squared, elementwise."""
    return expit(np.asarray(V, dtype=np.float64).dot(W.T)) ** 2


def gen_synthetic(spec=None, latent=None):
    """Sample the synthetic dataset.

    :param spec: a SyntheticSpec (defaults apply when None)
    :param latent: fixed latent points to observe instead of sampling; the
    result is unlabelled
    :returns: (Dataset, latent points)
    """
    spec = spec or SyntheticSpec()
    W = seeded_rng(spec.w_seed).standard_normal((spec.obs_dim, spec.latent_dim))
    if latent is not None:
        V = np.atleast_2d(np.asarray(latent, dtype=np.float64))
        if V.shape[1] != spec.latent_dim:
            raise InputError(
                "Latent points must have {} coordinates".format(spec.latent_dim))
        return Dataset(observe(V, W), name="synthetic"), V

    rng = seeded_rng(spec.noise_seed)
    blocks = []
    for mean in spec.means:
        blocks.append(mean + spec.sigma * rng.standard_normal(
            (spec.n_per_cluster, spec.latent_dim)))
    V = np.vstack(blocks)
    labels = np.repeat(np.arange(len(spec.means)), spec.n_per_cluster)
    dataset = Dataset(observe(V, W), labels, name="synthetic",
                      feature_range={'kind': 'none'})
    return dataset, V


def _read_bytes(path):
    opener = gzip.open if str(path).endswith('.gz') else open
    try:
        with opener(path, 'rb') as handle:
            return handle.read()
    except (IOError, OSError, EOFError) as e:
        raise DataError("Could not read {}: {}".format(path, e))


def _idx_header(raw, path, magic, n_dims):
    size = 4 * (1 + n_dims)
    if len(raw) < size:
        raise FormatError("{} is truncated in its header".format(path))
    fields = struct.unpack('>' + 'I' * (1 + n_dims), raw[:size])
    if fields[0] != magic:
        raise FormatError(
            "Bad magic number {:#010x} in {} (expected {:#010x})"
            .format(fields[0], path, magic))
    return fields[1:], size


def _idx_payload(raw, path, offset, count):
    if len(raw) - offset != count:
        what = "truncated" if len(raw) - offset < count else "longer than its header says"
        raise FormatError("{} is {}".format(path, what))
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=offset)


def load_idx(images_path, labels_path=None):
    """Read an IDX image file (and optionally its label file).

    Pixels are flattened row-major and divided by 255. Files ending in .gz are
    decompressed on the fly.
    """
    raw = _read_bytes(images_path)
    (n, rows, cols), offset = _idx_header(raw, images_path, IDX_IMAGE_MAGIC, 3)
    pixels = _idx_payload(raw, images_path, offset, n * rows * cols)
    X = pixels.reshape(n, rows * cols).astype(np.float64) / 255.0

    labels = None
    if labels_path is not None:
        raw = _read_bytes(labels_path)
        (n_labels,), offset = _idx_header(raw, labels_path, IDX_LABEL_MAGIC, 1)
        if n_labels != n:
            raise ConsistencyError(
                "{} has {} images but {} has {} labels"
                .format(images_path, n, labels_path, n_labels))
        labels = _idx_payload(raw, labels_path, offset, n).astype(np.int64)
    return Dataset(X, labels, name=str(images_path),
                   feature_range={'kind': 'scale', 'scale': 255.0})


def minmax_normalize(X):
    """Scale every feature to [0, 1]; constant features map to 0.

    :returns: (normalized X, (mins, maxs))
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        return X.copy(), (np.zeros(X.shape[1]), np.zeros(X.shape[1]))
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    span = hi - lo
    scale = np.where(span > 0, span, 1.0)
    Xn = np.where(span > 0, (X - lo) / scale, 0.0)
    return np.clip(Xn, 0.0, 1.0), (lo, hi)


def _normalized(X, labels, name, normalize):
    if not normalize:
        return Dataset(X, labels, name=name)
    Xn, (lo, hi) = minmax_normalize(X)
    return Dataset(Xn, labels, name=name, feature_range={
        'kind': 'minmax', 'min': lo.tolist(), 'max': hi.tolist()})


def _parse_float(text, path, lineno):
    try:
        value = float(text)
    except ValueError:
        raise FormatError("{}, line {}: '{}' is not a number".format(path, lineno, text))
    if not np.isfinite(value):
        raise FormatError("{}, line {}: non-finite value".format(path, lineno))
    return value


def _parse_int(text, path, lineno):
    try:
        return int(text.strip())
    except ValueError:
        raise FormatError("{}, line {}: '{}' is not an integer".format(path, lineno, text))


def _csv_rows(path):
    try:
        with open(path, 'r') as handle:
            for lineno, row in enumerate(csv.reader(handle), start=1):
                if not row or row[0].lstrip().startswith('#'):
                    continue
                yield lineno, row
    except (IOError, OSError) as e:
        raise DataError("Could not read {}: {}".format(path, e))


def load_dense_csv(path, has_labels=False, normalize=True):
    """Read one point per line; with `has_labels` the first column is the label."""
    rows, labels = [], []
    width = None
    for lineno, row in _csv_rows(path):
        if has_labels:
            labels.append(_parse_int(row[0], path, lineno))
            row = row[1:]
        values = [_parse_float(v, path, lineno) for v in row]
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise FormatError(
                "{}, line {}: expected {} values, found {}"
                .format(path, lineno, width, len(values)))
        rows.append(values)
    if not rows or not width:
        raise FormatError("{} contains no data".format(path))
    X = np.array(rows, dtype=np.float64)
    return _normalized(X, labels if has_labels else None, str(path), normalize)


def save_dense_csv(path, dataset):
    """Write a dataset so that load_dense_csv reads back the same floats."""
    try:
        with open(path, 'w') as out:
            writer = csv.writer(out, lineterminator='\n')
            for i, row in enumerate(dataset.X):
                values = [repr(float(v)) for v in row]
                if dataset.has_labels:
                    values.insert(0, str(int(dataset.labels[i])))
                writer.writerow(values)
    except (IOError, OSError) as e:
        raise DataError("Could not write {}: {}".format(path, e))


def load_labels(path):
    """One integer label per line."""
    return np.array([_parse_int(row[0], path, lineno)
                     for lineno, row in _csv_rows(path)], dtype=np.int64)


def load_sparse_triplets(path, dims, labels_path=None, normalize=True):
    """Read a sparse matrix stored as 0-based `row,col,value` lines.

    Repeated (row, col) entries are summed.

    :param dims: (n_rows, n_cols) of the full matrix
    """
    n_rows, n_cols = dims
    rows, cols, vals = [], [], []
    for lineno, record in _csv_rows(path):
        if len(record) != 3:
            raise FormatError(
                "{}, line {}: expected row,col,value".format(path, lineno))
        r = _parse_int(record[0], path, lineno)
        c = _parse_int(record[1], path, lineno)
        if not (0 <= r < n_rows and 0 <= c < n_cols):
            raise FormatError(
                "{}, line {}: index ({}, {}) outside a {}x{} matrix"
                .format(path, lineno, r, c, n_rows, n_cols))
        rows.append(r)
        cols.append(c)
        vals.append(_parse_float(record[2], path, lineno))
    X = coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols),
                   dtype=np.float64).toarray()
    labels = load_labels(labels_path) if labels_path is not None else None
    if labels is not None and len(labels) != n_rows:
        raise ConsistencyError(
            "{} has {} labels for {} rows".format(labels_path, len(labels), n_rows))
    return _normalized(X, labels, str(path), normalize)


def subsample(dataset, n, seed):
    """A seeded subset of n points, kept in their original order."""
    if n > dataset.n:
        raise InputError(
            "Cannot draw {} points from a dataset of {}".format(n, dataset.n))
    idx = np.sort(seeded_rng(seed).choice(dataset.n, size=n, replace=False))
    labels = dataset.labels[idx] if dataset.has_labels else None
    return Dataset(dataset.X[idx], labels, dataset.name, dataset.feature_range)


def save_dataset(path, dataset):
    blocks = [('X', dataset.X)]
    if dataset.has_labels:
        blocks.append(('labels', dataset.labels))
    write_container(path, 'dataset', {
        'name': dataset.name,
        'feature_range': dataset.feature_range,
    }, blocks)


def load_dataset(path):
    header, blocks = read_container(path, kind='dataset')
    if 'X' not in blocks:
        raise FormatError("{} has no data matrix".format(path))
    meta = header['meta']
    return Dataset(blocks['X'], blocks.get('labels'), meta.get('name', ''),
                   meta.get('feature_range'))
