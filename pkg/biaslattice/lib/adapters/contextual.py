from collections import OrderedDict, namedtuple
from dataclasses import dataclass, asdict, fields
from enum import Enum

import numpy as np

from ..numerics import Tensor, ops, layers
from ..exceptions import CatalogError, ConfigError
from ..tokenizer import encode
from ..transducer import encode_audio, predict, joint_cells, joint_output
from .catalog import NO_BIAS_TYPE_ID, UNTYPED_ID, TYPE_TABLE_ROWS

__all__ = ['QueryVariant', 'AdapterConfig', 'ContextualAdapters', 'BiasingAdapter',
           'CatalogEmbedding', 'Adapted', 'Census', 'encode_catalog', 'bias', 'adapt',
           'adapted_lattice', 'adapter_parameter_count', 'parameter_census', 'attention_dump']


class QueryVariant(Enum):
    EncQuery = 'enc'
    PredQuery = 'pred'
    EncPredQuery = 'enc-pred'
    JointQuery = 'joint'

    @property
    def sites(self):
        return {
            QueryVariant.EncQuery: ('enc',),
            QueryVariant.PredQuery: ('pred',),
            QueryVariant.EncPredQuery: ('enc', 'pred'),
            QueryVariant.JointQuery: ('joint',),
        }[self]

    @staticmethod
    def parse(value):
        if isinstance(value, QueryVariant):
            return value
        for v in QueryVariant:
            if value in (v.value, v.name):
                return v
        raise ConfigError("Unknown query variant {}; expected one of {}".format(
            value, ', '.join(v.value for v in QueryVariant)))


@dataclass
class AdapterConfig:
    variant: str = 'enc-pred'
    embed_dim: int = 16
    bilstm_units: int = 16
    entity_dim: int = 16
    use_types: bool = False
    type_dim: int = 4
    attention_dim: int = 16
    use_no_bias: bool = True
    max_catalog: int = 64

    def validate(self):
        QueryVariant.parse(self.variant)
        for name in ('embed_dim', 'bilstm_units', 'entity_dim', 'type_dim', 'attention_dim', 'max_catalog'):
            if getattr(self, name) < 1:
                raise ConfigError("AdapterConfig.{} must be >= 1".format(name))
        return self

    @property
    def query_variant(self):
        return QueryVariant.parse(self.variant)

    @property
    def width(self):
        '''D: entity embedding width.'''
        return self.entity_dim + (self.type_dim if self.use_types else 0)

    @classmethod
    def from_dict(cls, d):
        known = set(f.name for f in fields(cls))
        unknown = set(d) - known
        if unknown:
            raise ConfigError("Unknown AdapterConfig keys: {}".format(', '.join(sorted(unknown))))
        return cls(**d).validate()

    def to_dict(self):
        return asdict(self)


def adapter_parameter_count(cfg, vocab_size, joint_dim):
    '''Analytic parameter count of ContextualAdapters for cfg.'''
    n = vocab_size * cfg.embed_dim
    n += 2 * layers.lstm_param_count(cfg.embed_dim, cfg.bilstm_units)
    n += 2 * cfg.bilstm_units * cfg.entity_dim + cfg.entity_dim
    if cfg.use_no_bias:
        n += cfg.entity_dim
    if cfg.use_types:
        n += TYPE_TABLE_ROWS * cfg.type_dim
    d, D = cfg.attention_dim, cfg.width
    per_site = joint_dim * d + 2 * D * d + d * joint_dim
    return n + per_site * len(cfg.query_variant.sites)


class BiasingAdapter(object):
    '''View onto one site's W^q, W^k, W^v, W_out inside the adapter
    parameter dict.'''
    __slots__ = ['site', 'Wq', 'Wk', 'Wv', 'Wout']

    def __init__(self, params, site):
        self.site = site
        prefix = 'ba.{}.'.format(site)
        self.Wq = params[prefix + 'Wq']
        self.Wk = params[prefix + 'Wk']
        self.Wv = params[prefix + 'Wv']
        self.Wout = params[prefix + 'Wout']

    @property
    def attention_dim(self):
        return self.Wq.shape[1]

    @property
    def site_dim(self):
        return self.Wout.shape[1]


class ContextualAdapters(object):
    '''
    Catalog encoder plus one BiasingAdapter per adaptation site of the
    configured query variant.  W_out starts at zero so an untrained
    adapter leaves the base model's lattice bit-identical.
    '''
    def __init__(self, config, vocab_size, joint_dim, params=None, seed=0):
        self.config = config.validate()
        self.vocab_size = vocab_size
        self.joint_dim = joint_dim
        if params is None:
            params = self._init_params(np.random.RandomState(seed))
        self.params = params
        self.adapters = dict((s, BiasingAdapter(self.params, s)) for s in self.variant.sites)

    @property
    def variant(self):
        return self.config.query_variant

    def _init_params(self, rng):
        cfg = self.config
        p = OrderedDict()
        p['cat.embed'] = layers.uniform(rng, (self.vocab_size, cfg.embed_dim), cfg.embed_dim, 'cat.embed')
        p.update(layers.lstm_params(rng, cfg.embed_dim, cfg.bilstm_units, 'cat.fwd'))
        p.update(layers.lstm_params(rng, cfg.embed_dim, cfg.bilstm_units, 'cat.bwd'))
        p['cat.proj.W'] = layers.uniform(rng, (2 * cfg.bilstm_units, cfg.entity_dim), 2 * cfg.bilstm_units, 'cat.proj.W')
        p['cat.proj.b'] = layers.zeros((cfg.entity_dim,), 'cat.proj.b')
        if cfg.use_no_bias:
            p['cat.nobias'] = layers.uniform(rng, (cfg.entity_dim,), cfg.entity_dim, 'cat.nobias')
        if cfg.use_types:
            p['cat.type'] = layers.uniform(rng, (TYPE_TABLE_ROWS, cfg.type_dim), cfg.type_dim, 'cat.type')
        d, D = cfg.attention_dim, cfg.width
        for site in self.variant.sites:
            prefix = 'ba.{}.'.format(site)
            p[prefix + 'Wq'] = layers.uniform(rng, (self.joint_dim, d), self.joint_dim, prefix + 'Wq')
            p[prefix + 'Wk'] = layers.uniform(rng, (D, d), D, prefix + 'Wk')
            p[prefix + 'Wv'] = layers.uniform(rng, (D, d), D, prefix + 'Wv')
            p[prefix + 'Wout'] = layers.zeros((d, self.joint_dim), prefix + 'Wout')
        return p

    def __getitem__(self, name):
        return self.params[name]

    def census(self):
        return int(sum(t.size for t in self.params.values()))


CatalogEmbedding = namedtuple('CatalogEmbedding', ['matrix', 'rows', 'multiplicity'])
CatalogEmbedding.__new__.__defaults__ = (None,)
Adapted = namedtuple('Adapted', ['H_enc', 'H_pre', 'J', 'alphas'])
Census = namedtuple('Census', ['adapter', 'base', 'fraction'])


def _type_row(adapters, type_id):
    row = ops.gather_rows(adapters['cat.type'], [type_id])
    return ops.reshape(row, (adapters.config.type_dim,))


def _encode_entity(adapters, ids, etype):
    cfg = adapters.config
    emb = ops.gather_rows(adapters['cat.embed'], ids)
    xs = [ops.slice(emb, i) for i in range(len(ids))]
    final = layers.bilstm_final((adapters['cat.fwd.W'], adapters['cat.fwd.b']),
                                (adapters['cat.bwd.W'], adapters['cat.bwd.b']), xs, cfg.bilstm_units)
    row = layers.linear(final, adapters['cat.proj.W'], adapters['cat.proj.b'])
    if cfg.use_types:
        type_id = UNTYPED_ID if etype is None else int(etype)
        row = ops.concat([row, _type_row(adapters, type_id)])
    return row


def encode_catalog(adapters, catalog, vocab):
    '''
    C^e: one row per entity in catalog order, then the <no_bias> row
    (when enabled).  rows lists the entity text per row, '<no_bias>' last.
    '''
    cfg = adapters.config
    if catalog.K > cfg.max_catalog:
        raise CatalogError("Catalog of {} entities exceeds the maximum of {}".format(catalog.K, cfg.max_catalog))
    cache = {}
    rows = []
    meta = []
    keys = []
    for e in catalog:
        enc = encode(vocab, e.text)
        if enc.unk_positions or not enc.ids:
            raise CatalogError("Entity '{}' doesn't tokenize without unk".format(e.text))
        key = (tuple(enc.ids), e.type)
        if key not in cache:
            cache[key] = _encode_entity(adapters, enc.ids, e.type)
        rows.append(ops.reshape(cache[key], (1, cfg.width)))
        meta.append(e.text)
        keys.append(key)
    if cfg.use_no_bias:
        nb = adapters['cat.nobias']
        if cfg.use_types:
            nb = ops.concat([nb, _type_row(adapters, NO_BIAS_TYPE_ID)])
        rows.append(ops.reshape(nb, (1, cfg.width)))
        meta.append('<no_bias>')
        keys.append(None)
    if not rows:
        return CatalogEmbedding(Tensor(np.zeros((0, cfg.width))), meta)
    # identical rows share their attention mass
    multiplicity = np.array([1.0 if k is None else float(keys.count(k)) for k in keys])
    return CatalogEmbedding(ops.concat(rows, axis=0), meta, multiplicity)


def bias(adapter, q, Ce):
    '''
    Scaled dot-product attention of query rows q over catalog rows C^e.
    Returns (b, alpha): b = W_out (sum_i alpha_i W^v c_i) per query row.
    With no catalog rows at all (only possible without <no_bias>), b is
    zero.  Given a CatalogEmbedding, rows repeated m times get -log(m)
    added to their scores, so duplicates share one entity's attention
    mass instead of the plain softmax over rows.
    '''
    multiplicity = None
    if isinstance(Ce, CatalogEmbedding):
        multiplicity = Ce.multiplicity
        Ce = Ce.matrix
    if q.shape[-1] != adapter.Wq.shape[0] or Ce.ndim != 2 or Ce.shape[1] != adapter.Wk.shape[0]:
        raise CatalogError("Adapter '{}' dims don't conform: query {}, catalog {}".format(
            adapter.site, q.shape, Ce.shape))
    lead = q.shape[:-1]
    if Ce.shape[0] == 0:
        return Tensor(np.zeros(lead + (adapter.site_dim,))), np.zeros(lead + (0,))
    d = adapter.attention_dim
    keys = ops.matmul(Ce, adapter.Wk)
    values = ops.matmul(Ce, adapter.Wv)
    qp = ops.matmul(q, adapter.Wq)
    scores = ops.scale(ops.matmul(qp, ops.transpose(keys)), 1.0 / np.sqrt(d))
    if multiplicity is not None and np.any(multiplicity > 1):
        offset = np.broadcast_to(-np.log(multiplicity), scores.shape).copy()
        scores = ops.add(scores, Tensor(offset))
    alpha = ops.softmax(scores, axis=-1)
    context = ops.matmul(alpha, values)
    return ops.matmul(context, adapter.Wout), alpha.data


def adapt(variant, model, adapters, H_enc, H_pre, Ce):
    '''
    Element-wise additive adaptation of the transducer's intermediate
    representations.  For JointQuery, J holds the adapted joint cells;
    otherwise J is None and the caller joins H_enc and H_pre itself.
    '''
    variant = QueryVariant.parse(variant)
    missing = [s for s in variant.sites if s not in adapters.adapters]
    if missing:
        raise CatalogError("Adapters for variant {} are missing site(s) {}".format(variant.value, ', '.join(missing)))
    alphas = {}
    J = None
    if 'enc' in variant.sites:
        b, alphas['enc'] = bias(adapters.adapters['enc'], H_enc, Ce)
        H_enc = ops.add(H_enc, b)
    if 'pred' in variant.sites:
        b, alphas['pred'] = bias(adapters.adapters['pred'], H_pre, Ce)
        H_pre = ops.add(H_pre, b)
    if 'joint' in variant.sites:
        cells = joint_cells(H_enc, H_pre)
        T, U1, D = cells.shape
        b, alpha = bias(adapters.adapters['joint'], ops.reshape(cells, (T * U1, D)), Ce)
        alphas['joint'] = alpha.reshape(T, U1, -1)
        J = ops.add(cells, ops.reshape(b, (T, U1, D)))
    return Adapted(H_enc, H_pre, J, alphas)


def adapted_lattice(model, adapters, features, history, Ce):
    '''Lattice of the adapted model; returns (lattice, alphas).'''
    H_enc = encode_audio(model, features)
    H_pre = predict(model, history)
    if adapters is None:
        return joint_output(model, joint_cells(H_enc, H_pre)), {}
    a = adapt(adapters.variant, model, adapters, H_enc, H_pre, Ce)
    J = a.J if a.J is not None else joint_cells(a.H_enc, a.H_pre)
    return joint_output(model, J), a.alphas


def parameter_census(adapters, base_params):
    '''
    (adapter count, base count, adapter / (adapter + base)).  base_params
    is a TransducerModel or a plain count.
    '''
    count = adapter_parameter_count(adapters.config, adapters.vocab_size, adapters.joint_dim)
    base = base_params if isinstance(base_params, int) else base_params.census()
    return Census(count, base, count / float(count + base))


def attention_dump(model, adapters, features, history, Ce):
    '''
    Attention weights per adaptation site, as plain nested lists: for
    'enc' one row per frame, for 'pred' one row per prediction step, for
    'joint' a (T', U+1) grid of rows.  Rows are labelled by C^e rows.
    '''
    _, alphas = adapted_lattice(model, adapters, features, history, Ce)
    rows = Ce.rows if isinstance(Ce, CatalogEmbedding) else None
    return {'rows': rows, 'alpha': dict((site, np.asarray(a).tolist()) for site, a in alphas.items())}
