# -*- coding: utf-8 -*-
"""config.py

RunConfig holds every parameter of a run. The keys, their types, defaults and
help texts are declared once in specfiles/config.yaml; config files are flat
`key = value` text:

    # a comment
    k = 10
    ae_hidden = 500,500,2000
    mode = full

The fully resolved configuration is written back in the same format, so a run
directory's config.cfg can be fed to another run unchanged.
"""
import os
from collections import OrderedDict
from configparser import ConfigParser, Error as ParserError

import yaml

from damic import ConfigError, DataError
from damic.data import (
    SyntheticSpec,
    gen_synthetic,
    load_dataset,
    load_dense_csv,
    load_idx,
    load_sparse_triplets,
    subsample,
)
from damic.train import TrainConfig
from damic.utils import parse_int_list, specfile

_SECTION = 'damic'
_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')

# Keys holding file paths, resolved against the config file's directory
PATH_KEYS = ('data_path', 'labels_path', 'model_path')


def read_options():
    """The declared options, in specfile order (without `_meta`)."""
    with open(specfile('config')) as handle:
        opts = yaml.safe_load(handle)
    return OrderedDict((k, v) for k, v in opts.items() if k != '_meta')


def parse_points(text):
    """'3,3; 3,-3' -> ((3.0, 3.0), (3.0, -3.0))"""
    if isinstance(text, (list, tuple)):
        return tuple(tuple(float(v) for v in p) for p in text)
    points = [p for p in str(text).split(';') if p.strip()]
    return tuple(tuple(float(v) for v in p.split(',')) for p in points)


def _fmt_points(points):
    return "; ".join(",".join(repr(v) for v in p) for p in points)


def _convert(name, kind, raw):
    if not isinstance(raw, str):
        raw = str(raw).lower() if isinstance(raw, bool) else str(raw)
    raw = raw.strip()
    try:
        if kind == 'int':
            return int(raw)
        if kind == 'float':
            return float(raw)
        if kind == 'bool':
            if raw.lower() in _TRUE:
                return True
            if raw.lower() in _FALSE:
                return False
            raise ValueError(raw)
        if kind == 'intlist':
            return parse_int_list(raw)
        if kind == 'points':
            return parse_points(raw)
        return raw
    except ValueError:
        raise ConfigError(
            "Invalid value '{}' for {} (expected {})".format(raw, name, kind))


def _render(kind, value):
    if kind == 'bool':
        return 'true' if value else 'false'
    if kind == 'intlist':
        return ",".join(str(v) for v in value)
    if kind == 'points':
        return _fmt_points(value)
    if kind == 'float':
        return repr(float(value))
    return str(value)


class RunConfig(object):

    """A resolved run configuration: defaults < config file < overrides."""

    def __init__(self, values=None, base_dir=None):
        self.options = read_options()
        self.base_dir = base_dir or os.curdir
        self.values = OrderedDict(
            (name, _convert(name, opt['type'], opt['default']))
            for name, opt in self.options.items())
        self.update(values or {})

    @classmethod
    def from_file(cls, path=None, overrides=None):
        """Read a config file (None gives the defaults) and apply overrides."""
        values = {}
        base_dir = None
        if path is not None:
            values = read_config_file(path)
            base_dir = os.path.dirname(os.path.abspath(path))
        values.update(dict((k, v) for k, v in (overrides or {}).items()
                           if v is not None))
        return cls(values, base_dir)

    def update(self, values):
        unknown = set(values) - set(self.options)
        if unknown:
            raise ConfigError(
                "Unknown config key(s): " + ", ".join(sorted(unknown)))
        for name, raw in values.items():
            self.values[name] = _convert(name, self.options[name]['type'], raw)
        self.validate()

    def validate(self):
        for name, opt in self.options.items():
            choices = opt.get('choices')
            if choices and self.values[name] not in choices:
                raise ConfigError(
                    "Invalid {} '{}'. Valid choices are {}"
                    .format(name, self.values[name], ", ".join(choices)))
        if self.sample_size < 0:
            raise ConfigError("sample_size cannot be negative")
        if self.source == 'synthetic':
            self.synthetic_spec()
        elif not self.data_path:
            raise ConfigError("source = {} needs a data_path".format(self.source))
        if self.source == 'triplets' and (self.n_rows < 1 or self.n_cols < 1):
            raise ConfigError("source = triplets needs n_rows and n_cols")
        if not self.ablation_seeds:
            raise ConfigError("ablation_seeds needs at least one seed")
        self.to_train_config()

    def __getattr__(self, name):
        values = self.__dict__.get('values')
        if values is not None and name in values:
            return values[name]
        raise AttributeError(name)

    def as_dict(self):
        return OrderedDict(self.values)

    def replace(self, **kwargs):
        values = self.as_dict()
        values.update(kwargs)
        return RunConfig(values, self.base_dir)

    def to_train_config(self):
        names = [name for name, _ in TrainConfig.defaults]
        return TrainConfig(**dict((n, self.values[n]) for n in names))

    def synthetic_spec(self):
        w_seed = self.w_seed if self.w_seed >= 0 else 2 * self.seed
        noise_seed = self.noise_seed if self.noise_seed >= 0 else 2 * self.seed + 1
        return SyntheticSpec(self.n_per_cluster, self.means, self.sigma,
                             self.obs_dim, w_seed, noise_seed)

    def resolve(self, path):
        if not path:
            return None
        return os.path.join(self.base_dir, os.path.expanduser(path))

    def load_dataset(self):
        """Generate or read the configured dataset, subsampled if requested."""
        if self.source == 'synthetic':
            dataset, _ = gen_synthetic(self.synthetic_spec())
        elif self.source == 'idx':
            dataset = load_idx(self.resolve(self.data_path),
                               self.resolve(self.labels_path))
        elif self.source == 'csv':
            dataset = load_dense_csv(self.resolve(self.data_path), self.has_labels)
        elif self.source == 'triplets':
            dataset = load_sparse_triplets(
                self.resolve(self.data_path), (self.n_rows, self.n_cols),
                self.resolve(self.labels_path))
        else:
            dataset = load_dataset(self.resolve(self.data_path))
        if self.sample_size:
            dataset = subsample(dataset, self.sample_size, self.seed)
        return dataset

    def dump(self):
        """Render every key; paths are written absolute so the echo can be
        read from any directory."""
        lines = []
        for name, opt in self.options.items():
            value = self.values[name]
            if name in PATH_KEYS and value:
                value = os.path.abspath(self.resolve(value))
            lines.append("{} = {}".format(name, _render(opt['type'], value)))
        return "\n".join(lines) + "\n"

    def write(self, path):
        try:
            with open(path, 'w') as out:
                out.write(self.dump())
        except (IOError, OSError) as e:
            raise DataError("Could not write {}: {}".format(path, e))


def read_config_file(path):
    """Read a flat `key = value` file into a dict of raw strings."""
    parser = ConfigParser(interpolation=None, inline_comment_prefixes=None)
    parser.optionxform = str
    try:
        with open(path) as handle:
            text = handle.read()
    except (IOError, OSError) as e:
        raise ConfigError("Could not read config file {}: {}".format(path, e))
    try:
        parser.read_string(u"[{}]\n{}".format(_SECTION, text), source=str(path))
    except ParserError as e:
        raise ConfigError("Malformed config file {}: {}".format(path, e))
    return OrderedDict(parser.items(_SECTION))


def default_config_text():
    """A commented config file listing every key at its default."""
    out = []
    section = None
    for name, opt in read_options().items():
        if opt['section'] != section:
            section = opt['section']
            out.append("\n## {}\n".format(section))
        help_text = " ".join(str(opt['help']).split())
        out.append("# {}".format(help_text))
        default = _convert(name, opt['type'], opt['default'])
        out.append("{} = {}".format(name, _render(opt['type'], default)))
    return "\n".join(out).lstrip() + "\n"
