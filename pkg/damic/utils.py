import os
import errno

import numpy as np
from click import progressbar

__all__ = [
    "mkdirp",
    "chunks",
    "minibatches",
    "specfile",
    "fmtkv",
    "parse_int_list",
]


def mkdirp(path):
    """Create a directory unless it already exists, using EAFP methods."""
    try:
        os.makedirs(path)
    except OSError as e:
        if e.errno != errno.EEXIST:
            raise


def is_nonempty_dir(path):
    return os.path.isdir(path) and len(os.listdir(path)) > 0


def chunks(l, n):
    for i in range(0, len(l), n):
        yield l[i:i + n]


def minibatches(n, batch_size, rng, show_progress=False, label=None):
    """Yield index arrays covering a seeded permutation of range(n).

    :param n: the number of samples
    :param batch_size: the size of each batch (the last one may be smaller)
    :param rng: numpy Generator that draws the permutation
    :param show_progress: show a progress bar
    :param label: the label to show on the progress bar
    """
    order = rng.permutation(n)
    batches = list(chunks(order, batch_size))
    if show_progress and len(batches) > 1:
        with progressbar(batches, label=label or "") as bar:
            for batch in bar:
                yield batch
    else:
        for batch in batches:
            yield batch


def specfile(name):
    """Return the path to a specfile shipped with the package."""
    return os.path.join(os.path.dirname(__file__), 'specfiles', name + '.yaml')


def fmtkv(k, v):
    """Pretty-print a key-value pair."""
    set_stat_line = "{key:.<16}: {val: >10s}"
    num_fmt_str = "{:,G}"
    if not isinstance(v, str):
        v = num_fmt_str.format(v)
    return set_stat_line.format(key=k, val=v)


def parse_int_list(text):
    """'1024, 256' -> (1024, 256); an empty string gives ()."""
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    text = str(text).strip()
    if not text:
        return ()
    return tuple(int(v) for v in text.replace(";", ",").split(","))


def seeded_rng(seed, *streams):
    return np.random.default_rng([seed] + list(streams))
