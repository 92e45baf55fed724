import hashlib
import json
import os
import platform
import sys
import tomllib

import numpy as np
import psutil

from .exceptions import ConfigError, MissingFileError
from .logging import log_info

'''
Config files are TOML or JSON (chosen by suffix) holding one table per
config object: [synth], [model], [adapters], [train], [experiment].
CLI flags override file values; BIASLATTICE_SEED overrides every seed.
'''

SEED_ENV = 'BIASLATTICE_SEED'
SECTIONS = ('synth', 'model', 'adapters', 'train', 'experiment')


def load_config(path):
    if path is None:
        return apply_seed_env({})
    if not os.path.exists(path):
        raise MissingFileError(path, "config file")
    if not path.endswith(('.toml', '.json')):
        raise ConfigError("Config file {} must end in .toml or .json".format(path))
    try:
        if path.endswith('.toml'):
            with open(path, 'rb') as inf:
                cfg = tomllib.load(inf)
        else:
            with open(path) as inf:
                cfg = json.load(inf)
    except ValueError as e:
        raise ConfigError("Can't parse config file {}: {}".format(path, e))
    unknown = set(cfg) - set(SECTIONS)
    if unknown:
        raise ConfigError("Unknown config section(s) in {}: {}".format(path, ', '.join(sorted(unknown))))
    return apply_seed_env(cfg)


def section(cfg, name):
    return dict(cfg.get(name, {}))


def apply_overrides(cfg, overrides):
    '''
    overrides maps 'section.key' to a value; None values (flags not
    given) are skipped.  Returns a new dict.
    '''
    out = dict((k, dict(v)) for k, v in cfg.items())
    for dotted, value in overrides.items():
        if value is None:
            continue
        sec, key = dotted.split('.', 1)
        if sec not in SECTIONS:
            raise ConfigError("Unknown config section {}".format(sec))
        out.setdefault(sec, {})[key] = value
    return out


def _replace_seeds(obj, seed):
    if isinstance(obj, dict):
        return dict((k, seed if k == 'seed' else [seed] if k == 'seeds' else _replace_seeds(v, seed))
                    for k, v in obj.items())
    return obj


def apply_seed_env(cfg):
    value = os.environ.get(SEED_ENV)
    if value is None:
        return cfg
    try:
        seed = int(value)
    except ValueError:
        raise ConfigError("{} must be an integer, got '{}'".format(SEED_ENV, value))
    cfg = _replace_seeds(cfg, seed)
    for sec in ('synth', 'train'):
        cfg.setdefault(sec, {})['seed'] = seed
    log_info("Seeds overridden from {}={}".format(SEED_ENV, seed))
    return cfg


def config_hash(cfg):
    canon = json.dumps(cfg, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canon.encode('utf-8')).hexdigest()


def _seeds(cfg, prefix=''):
    out = {}
    if isinstance(cfg, dict):
        for k, v in cfg.items():
            name = '{}.{}'.format(prefix, k) if prefix else k
            if k in ('seed', 'seeds'):
                out[name] = v
            else:
                out.update(_seeds(v, name))
    return out


def host_facts():
    return {
        'python': platform.python_version(),
        'numpy': np.__version__,
        'platform': sys.platform,
        'cpus_logical': psutil.cpu_count(logical=True),
        'cpus_physical': psutil.cpu_count(logical=False),
        'memory_bytes': psutil.virtual_memory().total,
    }


def write_run_manifest(outdir, command, argv, cfg, version, filename='run_manifest.json'):
    os.makedirs(outdir, exist_ok=True)
    manifest = {
        'command': command,
        'argv': list(argv),
        'config': cfg,
        'config_hash': config_hash(cfg),
        'seeds': _seeds(cfg),
        'version': version,
        'host': host_facts(),
    }
    path = os.path.join(outdir, filename)
    with open(path, 'w') as outf:
        json.dump(manifest, outf, indent=2, sort_keys=True, default=str)
    return path
