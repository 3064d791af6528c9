# -*- coding: utf-8 -*-
"""container.py

A small self-describing binary container for models and datasets.

Layout:
    magic        6 bytes, b"DAMIC\\0"
    header size  unsigned 32-bit little-endian integer
    header       UTF-8 JSON: format version, kind, metadata and the name,
                 dtype and shape of every block
    blocks       raw little-endian arrays ('<f8' or '<i8'), in header order

Reading a container checks the format version with the same major.minor rule
used for run ledgers. Round trips are bit-exact.
"""
import json
import struct
from collections import OrderedDict

import numpy as np
import semantic_version as semver

from damic import FormatError, DataError
from damic.model import AutoencoderBank, DamicModel, GateNetwork
from damic.nn import Activation, AffineLayer, BatchNormLayer, MultiLayerNet

MAGIC = b"DAMIC\x00"
FORMAT_VERSION = "1.0.0"
_DTYPES = {'f8': '<f8', 'i8': '<i8'}


def check_format_version(version):
    """Raise a FormatError unless `version` shares major.minor with ours."""
    ours = semver.Version(FORMAT_VERSION)
    spec = semver.SimpleSpec('>={0}.{1}.0,<{0}.{2}.0'.format(
        ours.major, ours.minor, ours.minor + 1))
    try:
        theirs = semver.Version(version)
    except (TypeError, ValueError):
        raise FormatError("Invalid container version tag '{}'".format(version))
    if theirs not in spec:
        raise FormatError(
            "Container version {} is incompatible with reader version {}"
            .format(theirs, ours))


def write_container(path, kind, meta, blocks):
    """Write named arrays and metadata to `path`.

    :param kind: 'model' or 'dataset'
    :param meta: JSON-serializable metadata
    :param blocks: iterable of (name, array); integer arrays are stored as i8
    """
    descriptors = []
    payloads = []
    for name, array in blocks:
        array = np.asarray(array)
        code = 'i8' if np.issubdtype(array.dtype, np.integer) else 'f8'
        data = np.ascontiguousarray(array, dtype=_DTYPES[code])
        descriptors.append({'name': name, 'dtype': code, 'shape': list(data.shape)})
        payloads.append(data.tobytes())
    header = json.dumps({
        'version': FORMAT_VERSION,
        'kind': kind,
        'meta': meta,
        'blocks': descriptors,
    }, sort_keys=True).encode('utf-8')
    try:
        with open(path, 'wb') as out:
            out.write(MAGIC)
            out.write(struct.pack('<I', len(header)))
            out.write(header)
            for payload in payloads:
                out.write(payload)
    except (IOError, OSError) as e:
        raise DataError("Could not write {}: {}".format(path, e))


def read_container(path, kind=None):
    """:returns: (header dict, OrderedDict of name -> array)"""
    try:
        with open(path, 'rb') as handle:
            raw = handle.read()
    except (IOError, OSError) as e:
        raise DataError("Could not read {}: {}".format(path, e))
    if raw[:len(MAGIC)] != MAGIC:
        raise FormatError("{} is not a damic container".format(path))
    offset = len(MAGIC)
    if len(raw) < offset + 4:
        raise FormatError("{} is truncated".format(path))
    size, = struct.unpack('<I', raw[offset:offset + 4])
    offset += 4
    try:
        header = json.loads(raw[offset:offset + size].decode('utf-8'))
    except ValueError:
        raise FormatError("{} has a corrupt header".format(path))
    offset += size
    if not isinstance(header, dict) or not isinstance(header.get('blocks'), list):
        raise FormatError("{} has a malformed header".format(path))
    check_format_version(header.get('version', ''))
    if kind is not None and header.get('kind') != kind:
        raise FormatError(
            "{} holds a {}, not a {}".format(path, header.get('kind'), kind))
    blocks = OrderedDict()
    for desc in header['blocks']:
        try:
            dtype = np.dtype(_DTYPES[desc['dtype']])
            count = int(np.prod(desc['shape'], dtype=np.int64))
            name = desc['name']
        except (KeyError, TypeError, ValueError):
            raise FormatError("{} has a malformed block entry".format(path))
        end = offset + count * dtype.itemsize
        if end > len(raw):
            raise FormatError("{} is truncated in block {}".format(path, name))
        array = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
        blocks[name] = array.reshape(desc['shape']).astype(dtype.newbyteorder('='))
        offset = end
    if offset != len(raw):
        raise FormatError("{} has trailing bytes".format(path))
    return header, blocks


def _layer_blocks(prefix, net):
    for i, layer in enumerate(net.layers):
        for name, array in zip(layer.param_names + layer.buffer_names,
                               layer.params() + layer.buffers()):
            yield "{}.{}.{}".format(prefix, i, name), array


def _rebuild_layer(desc, prefix, blocks):
    try:
        if desc['kind'] == 'affine':
            return AffineLayer(blocks[prefix + '.weight'], blocks[prefix + '.bias'])
        if desc['kind'] == 'batchnorm':
            layer = BatchNormLayer(desc['features'], desc['momentum'], desc['epsilon'])
            for name in layer.param_names + layer.buffer_names:
                setattr(layer, name, blocks[prefix + '.' + name].copy())
            return layer
        if desc['kind'] == 'activation':
            return Activation(desc['name'])
    except KeyError as e:
        raise FormatError("Missing parameter block {}".format(e))
    raise FormatError("Unknown layer kind '{}'".format(desc['kind']))


def _rebuild_net(descs, prefix, blocks, encoder_depth=None):
    layers = [_rebuild_layer(desc, "{}.{}".format(prefix, i), blocks)
              for i, desc in enumerate(descs)]
    return MultiLayerNet(layers, encoder_depth=encoder_depth)


def save_model(path, model, config=None):
    """Persist a model with its architecture descriptor.

    :param config: optional training configuration to store alongside
    """
    meta = {
        'k': model.k,
        'd': model.d,
        'gate_body': model.gate.body.describe(),
        'gate_head': model.gate.head.describe(),
        'experts': [e.describe() for e in model.bank],
        'encoder_depth': [e.encoder_depth for e in model.bank],
        'config': config or {},
    }
    blocks = list(_layer_blocks('gate.body', model.gate.body))
    blocks += [('gate.head.weight', model.gate.head.weight),
               ('gate.head.bias', model.gate.head.bias)]
    for i, expert in enumerate(model.bank):
        blocks += list(_layer_blocks('expert{}'.format(i), expert))
    write_container(path, 'model', meta, blocks)


def load_model(path):
    """:returns: (model, stored config dict)"""
    header, blocks = read_container(path, kind='model')
    meta = header['meta']
    try:
        body = _rebuild_net(meta['gate_body'], 'gate.body', blocks)
        head = AffineLayer(blocks['gate.head.weight'], blocks['gate.head.bias'])
        experts = [
            _rebuild_net(desc, 'expert{}'.format(i), blocks, depth)
            for i, (desc, depth) in enumerate(
                zip(meta['experts'], meta['encoder_depth']))]
    except KeyError as e:
        raise FormatError("Model container is missing {}".format(e))
    return DamicModel(GateNetwork(body, head), AutoencoderBank(experts)), meta['config']
