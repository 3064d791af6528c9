"""Plain-text run outputs: assignments, training history, metric records and
expert probes. All files are comma-separated or `name = value` text so they
can be read by other tools."""
import csv
from collections import OrderedDict, namedtuple

import numpy as np

from damic import ConsistencyError, DataError, FormatError, message

Assignments = namedtuple("Assignments", "labels P H")


def _fmt(value):
    return repr(float(value))


def _open(path, mode='r'):
    try:
        return open(path, mode)
    except (IOError, OSError) as e:
        raise DataError("Could not open {}: {}".format(path, e))


def save_assignments(path, labels, P, H):
    """One row per point: index, hard label, k probabilities, embedding."""
    labels = np.asarray(labels)
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    H = np.atleast_2d(np.asarray(H, dtype=np.float64))
    if not (len(labels) == P.shape[0] == H.shape[0]):
        raise ConsistencyError(
            "Got {} labels, {} probability rows and {} embeddings"
            .format(len(labels), P.shape[0], H.shape[0]))
    header = (['index', 'label'] +
              ['p{}'.format(i) for i in range(P.shape[1])] +
              ['h{}'.format(i) for i in range(H.shape[1])])
    with _open(path, 'w') as out:
        writer = csv.writer(out, lineterminator='\n')
        writer.writerow(header)
        for i in range(len(labels)):
            writer.writerow([i, int(labels[i])] +
                            [_fmt(v) for v in P[i]] + [_fmt(v) for v in H[i]])
    message("Assignments written to " + str(path))


def read_assignments(path):
    with _open(path) as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("{} is empty".format(path))
        if header[:2] != ['index', 'label']:
            raise FormatError("{} is not an assignments file".format(path))
        k = sum(1 for h in header if h.startswith('p'))
        labels, P, H = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(
                    "{}, line {}: expected {} fields".format(path, lineno, len(header)))
            try:
                labels.append(int(row[1]))
                P.append([float(v) for v in row[2:2 + k]])
                H.append([float(v) for v in row[2 + k:]])
            except ValueError:
                raise FormatError("{}, line {}: bad value".format(path, lineno))
    m = len(header) - 2 - k
    return Assignments(np.array(labels, dtype=np.int64),
                       np.array(P, dtype=np.float64).reshape(-1, k),
                       np.array(H, dtype=np.float64).reshape(-1, m))


def save_history(path, history):
    """epoch,loss,active and, when ground truth was available, nmi,ari,acc."""
    with_metrics = any(r.nmi is not None for r in history.records)
    header = ['epoch', 'loss', 'active']
    if with_metrics:
        header += ['nmi', 'ari', 'acc']
    with _open(path, 'w') as out:
        writer = csv.writer(out, lineterminator='\n')
        writer.writerow(header)
        for r in history.records:
            row = [r.epoch, _fmt(r.loss), r.active]
            if with_metrics:
                row += [_fmt(r.nmi), _fmt(r.ari), _fmt(r.acc)]
            writer.writerow(row)


def write_metrics(path, record):
    """Write `name = value` lines; floats are rounded to 6 decimals."""
    with _open(path, 'w') as out:
        for name, value in record.items():
            if isinstance(value, (float, np.floating)):
                value = "{:.6f}".format(value)
            out.write("{} = {}\n".format(name, value))


def read_metrics(path):
    record = OrderedDict()
    with _open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            if '=' not in line:
                raise FormatError("{}, line {}: expected name = value".format(path, lineno))
            name, value = [s.strip() for s in line.split('=', 1)]
            try:
                record[name] = int(value)
            except ValueError:
                try:
                    record[name] = float(value)
                except ValueError:
                    record[name] = value
    return record


def save_probe(path, probe):
    """One row per expert: its gate probability, its error and its reconstruction."""
    recon = np.asarray(probe.reconstructions)
    with _open(path, 'w') as out:
        writer = csv.writer(out, lineterminator='\n')
        writer.writerow(['expert', 'posterior', 'error'] +
                        ['x{}'.format(j) for j in range(recon.shape[1])])
        for i in range(recon.shape[0]):
            writer.writerow([i, _fmt(probe.posterior[i]), _fmt(probe.errors[i])] +
                            [_fmt(v) for v in recon[i]])
