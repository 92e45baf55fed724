import hashlib
import json
import os
from collections import OrderedDict

import numpy as np

from .numerics import Tensor
from .exceptions import CheckpointVersionError, MissingFileError, ConfigError
from .tokenizer import Vocab
from .transducer import TransducerConfig, TransducerModel
from .adapters import AdapterConfig, ContextualAdapters

'''
Checkpoints are directories holding manifest.json (format version,
kind, config, and one {name, shape, offset, length} entry per tensor)
and params.bin, the tensors back to back as little-endian float64.
'''

CHECKPOINT_VERSION = 1
MANIFEST = 'manifest.json'
BLOB = 'params.bin'


def params_checksum(params):
    '''sha256 over every tensor's name, shape and bytes, in dict order.'''
    h = hashlib.sha256()
    for name, t in params.items():
        h.update(name.encode('utf-8'))
        h.update(repr(tuple(t.shape)).encode('ascii'))
        h.update(np.ascontiguousarray(t.data, dtype='<f8').tobytes())
    return h.hexdigest()


def save_checkpoint(path, kind, config, params, extra=None):
    os.makedirs(path, exist_ok=True)
    entries = []
    offset = 0
    with open(os.path.join(path, BLOB), 'wb') as outf:
        for name, t in params.items():
            raw = np.ascontiguousarray(t.data, dtype='<f8').tobytes()
            entries.append({'name': name, 'shape': list(t.shape), 'offset': offset, 'length': len(raw)})
            outf.write(raw)
            offset += len(raw)
    manifest = {
        'version': CHECKPOINT_VERSION,
        'kind': kind,
        'config': config,
        'tensors': entries,
        'checksum': params_checksum(params),
        'extra': extra or {},
    }
    with open(os.path.join(path, MANIFEST), 'w') as outf:
        json.dump(manifest, outf, indent=2, sort_keys=True)


def load_checkpoint(path, kind=None):
    '''Returns (manifest, OrderedDict of trainable Tensors).'''
    mpath = os.path.join(path, MANIFEST)
    if not os.path.exists(mpath):
        raise MissingFileError(mpath, "checkpoint manifest")
    with open(mpath) as inf:
        try:
            manifest = json.load(inf)
        except ValueError:
            raise CheckpointVersionError("Unreadable checkpoint manifest {}".format(mpath))
    if manifest.get('version') != CHECKPOINT_VERSION:
        raise CheckpointVersionError("Checkpoint {} has format version {}; this build reads version {}".format(
            path, manifest.get('version'), CHECKPOINT_VERSION))
    if kind is not None and manifest.get('kind') != kind:
        raise CheckpointVersionError("Checkpoint {} holds '{}' parameters, expected '{}'".format(
            path, manifest.get('kind'), kind))
    bpath = os.path.join(path, BLOB)
    if not os.path.exists(bpath):
        raise MissingFileError(bpath, "checkpoint blob")
    with open(bpath, 'rb') as inf:
        blob = inf.read()
    params = OrderedDict()
    for e in manifest['tensors']:
        raw = blob[e['offset']:e['offset'] + e['length']]
        if len(raw) != e['length']:
            raise CheckpointVersionError("Checkpoint blob {} is truncated at {}".format(bpath, e['name']))
        data = np.frombuffer(raw, dtype='<f8').reshape(e['shape']).astype(np.float64)
        params[e['name']] = Tensor(data, requires_grad=True, name=e['name'])
    return manifest, params


def _check_names(path, expected, params):
    if list(expected) != list(params):
        raise CheckpointVersionError("Checkpoint {} doesn't match its config's parameter layout".format(path))
    for name in expected:
        if expected[name].shape != params[name].shape:
            raise CheckpointVersionError("Checkpoint {}: tensor {} has shape {}, expected {}".format(
                path, name, params[name].shape, expected[name].shape))


def save_model(path, model, vocab, extra=None):
    extra = dict(extra or {})
    extra['vocab'] = list(vocab.pieces)
    save_checkpoint(path, 'base', model.config.to_dict(), model.params, extra)


def load_model(path):
    '''Returns (TransducerModel, Vocab, manifest).'''
    manifest, params = load_checkpoint(path, 'base')
    try:
        cfg = TransducerConfig.from_dict(manifest['config'])
    except ConfigError as e:
        raise CheckpointVersionError("Checkpoint {} has an incompatible config: {}".format(path, e))
    _check_names(path, TransducerModel(cfg).params, params)
    vocab = Vocab(manifest['extra']['vocab'])
    return TransducerModel(cfg, params), vocab, manifest


def save_adapters(path, adapters, extra=None):
    extra = dict(extra or {})
    extra['vocab_size'] = adapters.vocab_size
    extra['joint_dim'] = adapters.joint_dim
    save_checkpoint(path, 'adapters', adapters.config.to_dict(), adapters.params, extra)


def load_adapters(path):
    '''Returns (ContextualAdapters, manifest).'''
    manifest, params = load_checkpoint(path, 'adapters')
    try:
        cfg = AdapterConfig.from_dict(manifest['config'])
    except ConfigError as e:
        raise CheckpointVersionError("Checkpoint {} has an incompatible config: {}".format(path, e))
    V, J = manifest['extra']['vocab_size'], manifest['extra']['joint_dim']
    _check_names(path, ContextualAdapters(cfg, V, J).params, params)
    return ContextualAdapters(cfg, V, J, params), manifest
