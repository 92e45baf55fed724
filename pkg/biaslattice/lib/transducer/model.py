from collections import OrderedDict
from dataclasses import dataclass, asdict, fields

import numpy as np

from ..numerics import Tensor, ops, layers
from ..exceptions import TransducerError, ConfigError
from ..tokenizer import BLANK_ID, DEFAULT_VOCAB_SIZE


__all__ = ['TransducerConfig', 'TransducerModel', 'parameter_count', 'reduced_length',
           'encode_audio', 'predict', 'pred_step', 'pred_initial_state', 'joint_cells',
           'joint_output', 'join', 'posterior', 'forward']


@dataclass
class TransducerConfig:
    feature_dim: int = 8
    enc_layers: int = 2
    enc_units: int = 32
    time_reduction_layer: int = 1
    time_reduction_factor: int = 2
    pred_layers: int = 1
    pred_units: int = 32
    pred_embed_dim: int = 16
    joint_dim: int = 32
    vocab_size: int = DEFAULT_VOCAB_SIZE
    joint_activation: str = 'tanh'

    def validate(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, int) and f.name != 'time_reduction_layer' and v < 1:
                raise ConfigError("TransducerConfig.{} must be >= 1 (got {})".format(f.name, v))
        if self.vocab_size < 3:
            raise ConfigError("vocab_size must be >= 3")
        if not (0 <= self.time_reduction_layer <= self.enc_layers):
            raise ConfigError("time_reduction_layer must lie in 0..enc_layers")
        if self.joint_activation != 'tanh':
            raise ConfigError("Only the tanh joint activation is supported")
        return self

    @classmethod
    def from_dict(cls, d):
        known = set(f.name for f in fields(cls))
        unknown = set(d) - known
        if unknown:
            raise ConfigError("Unknown TransducerConfig keys: {}".format(', '.join(sorted(unknown))))
        return cls(**d).validate()

    def to_dict(self):
        return asdict(self)


def _enc_layer_input(cfg, layer):
    width = cfg.feature_dim if layer == 0 else cfg.enc_units
    if cfg.time_reduction_layer == layer:
        width *= cfg.time_reduction_factor
    return width


def _enc_output_width(cfg):
    if cfg.time_reduction_layer == cfg.enc_layers:
        return cfg.enc_units * cfg.time_reduction_factor
    return cfg.enc_units


def parameter_count(cfg):
    '''Analytic parameter count of a TransducerModel built from cfg.'''
    n = 0
    for layer in range(cfg.enc_layers):
        n += layers.lstm_param_count(_enc_layer_input(cfg, layer), cfg.enc_units)
    n += cfg.vocab_size * cfg.pred_embed_dim + cfg.pred_embed_dim
    for layer in range(cfg.pred_layers):
        in_dim = cfg.pred_embed_dim if layer == 0 else cfg.pred_units
        n += layers.lstm_param_count(in_dim, cfg.pred_units)
    n += _enc_output_width(cfg) * cfg.joint_dim + cfg.joint_dim
    n += cfg.pred_units * cfg.joint_dim + cfg.joint_dim
    n += cfg.joint_dim * cfg.vocab_size + cfg.vocab_size
    return n


class TransducerModel(object):
    '''
    Encoder LSTM stack with one time-reduction point, prediction LSTM
    stack over token embeddings (plus a learned start embedding), and a
    joint network z = W_o . tanh(h_enc + h_pre) + b_o.  Parameters live in
    an ordered dict keyed by dotted names.
    '''
    def __init__(self, config, params=None, seed=0):
        self.config = config.validate()
        if params is None:
            params = self._init_params(np.random.RandomState(seed))
        self.params = params

    def _init_params(self, rng):
        cfg = self.config
        p = OrderedDict()
        for layer in range(cfg.enc_layers):
            p.update(layers.lstm_params(rng, _enc_layer_input(cfg, layer), cfg.enc_units,
                                        'enc.lstm{}'.format(layer)))
        p['pred.embed'] = layers.uniform(rng, (cfg.vocab_size, cfg.pred_embed_dim), cfg.pred_embed_dim, 'pred.embed')
        p['pred.start'] = layers.uniform(rng, (cfg.pred_embed_dim,), cfg.pred_embed_dim, 'pred.start')
        for layer in range(cfg.pred_layers):
            in_dim = cfg.pred_embed_dim if layer == 0 else cfg.pred_units
            p.update(layers.lstm_params(rng, in_dim, cfg.pred_units, 'pred.lstm{}'.format(layer)))
        p['enc.proj.W'] = layers.uniform(rng, (_enc_output_width(cfg), cfg.joint_dim), _enc_output_width(cfg), 'enc.proj.W')
        p['enc.proj.b'] = layers.zeros((cfg.joint_dim,), 'enc.proj.b')
        p['pred.proj.W'] = layers.uniform(rng, (cfg.pred_units, cfg.joint_dim), cfg.pred_units, 'pred.proj.W')
        p['pred.proj.b'] = layers.zeros((cfg.joint_dim,), 'pred.proj.b')
        p['joint.W'] = layers.uniform(rng, (cfg.joint_dim, cfg.vocab_size), cfg.joint_dim, 'joint.W')
        p['joint.b'] = layers.zeros((cfg.vocab_size,), 'joint.b')
        return p

    def __getitem__(self, name):
        return self.params[name]

    def census(self):
        return int(sum(t.size for t in self.params.values()))

    def zero_params(self):
        for t in self.params.values():
            t.data[...] = 0.0


def reduced_length(T, factor):
    return -(-T // factor)


def _time_reduce(hs, factor):
    '''Concatenate each group of factor adjacent frames; the last frame is
    repeated to fill a short final group.'''
    out = []
    for start in range(0, len(hs), factor):
        group = hs[start:start + factor]
        while len(group) < factor:
            group = group + [hs[-1]]
        out.append(ops.concat(group))
    return out


def encode_audio(model, features):
    '''
    features: (T, feature_dim) array or Tensor.  Returns H_enc of shape
    (ceil(T / factor), joint_dim).  Unidirectional, so frames < t never
    depend on frames >= t.
    '''
    cfg = model.config
    x = features if isinstance(features, Tensor) else Tensor(features)
    if x.ndim != 2 or x.shape[0] == 0:
        raise TransducerError("encode_audio needs a non-empty (T, feature_dim) input, got {}".format(x.shape))
    if x.shape[1] != cfg.feature_dim:
        raise TransducerError("Feature dim {} doesn't match model feature_dim {}".format(x.shape[1], cfg.feature_dim))
    hs = [ops.slice(x, t) for t in range(x.shape[0])]
    for layer in range(cfg.enc_layers):
        if layer == cfg.time_reduction_layer:
            hs = _time_reduce(hs, cfg.time_reduction_factor)
        name = 'enc.lstm{}'.format(layer)
        hs = layers.lstm_layer(model[name + '.W'], model[name + '.b'], hs, cfg.enc_units)
    if cfg.time_reduction_layer == cfg.enc_layers:
        hs = _time_reduce(hs, cfg.time_reduction_factor)
    H = ops.concat([ops.reshape(h, (1, h.shape[0])) for h in hs], axis=0)
    return layers.linear(H, model['enc.proj.W'], model['enc.proj.b'])


def _check_history(history, vocab_size):
    for y in history:
        if int(y) == BLANK_ID:
            raise TransducerError("Blank id in prediction-network history")
        if int(y) < 0 or int(y) >= vocab_size:
            raise TransducerError("Token id {} out of range".format(y))


def pred_initial_state(model):
    cfg = model.config
    return tuple(layers.zero_state(cfg.pred_units) for _ in range(cfg.pred_layers))


def pred_step(model, token, state):
    '''
    One prediction-network step.  token None feeds the learned start
    embedding.  Returns (projected row of width joint_dim, new state).
    '''
    cfg = model.config
    if token is None:
        x = model['pred.start']
    else:
        if int(token) == BLANK_ID:
            raise TransducerError("The prediction network never consumes blank")
        x = ops.reshape(ops.gather_rows(model['pred.embed'], [int(token)]), (cfg.pred_embed_dim,))
    newstate = []
    for layer in range(cfg.pred_layers):
        name = 'pred.lstm{}'.format(layer)
        h, c = layers.lstm_step(model[name + '.W'], model[name + '.b'], x, state[layer][0], state[layer][1])
        newstate.append((h, c))
        x = h
    row = layers.linear(x, model['pred.proj.W'], model['pred.proj.b'])
    return row, tuple(newstate)


def predict(model, history):
    '''
    Rows 0..U of H_pre: row 0 from the start state, row u conditioned on
    history[:u].
    '''
    _check_history(history, model.config.vocab_size)
    state = pred_initial_state(model)
    rows = []
    row, state = pred_step(model, None, state)
    rows.append(row)
    for y in history:
        row, state = pred_step(model, y, state)
        rows.append(row)
    return ops.concat([ops.reshape(r, (1, r.shape[0])) for r in rows], axis=0)


def joint_cells(H_enc, H_pre):
    '''The additive join: J[t, u] = H_enc[t] + H_pre[u], shape (T', U+1, D).'''
    if H_enc.ndim != 2 or H_pre.ndim != 2 or H_enc.shape[1] != H_pre.shape[1]:
        raise TransducerError("Join needs (T', D) and (U+1, D) inputs, got {} and {}".format(H_enc.shape, H_pre.shape))
    T, U1 = H_enc.shape[0], H_pre.shape[0]
    E = ops.transpose(ops.expand(H_enc, U1), (1, 0, 2))
    P = ops.expand(H_pre, T)
    return ops.add(E, P)


def joint_output(model, J):
    '''z = tanh(J) @ W_o + b_o over the last axis of J.'''
    cfg = model.config
    if J.shape[-1] != cfg.joint_dim:
        raise TransducerError("Joint input width {} != joint_dim {}".format(J.shape[-1], cfg.joint_dim))
    lead = J.shape[:-1]
    flat = ops.reshape(ops.tanh(J), (int(np.prod(lead)), cfg.joint_dim))
    z = layers.linear(flat, model['joint.W'], model['joint.b'])
    return ops.reshape(z, lead + (cfg.vocab_size,))


def join(model, H_enc, H_pre):
    '''The LogitLattice z[t, u] = W_o . tanh(h_enc[t] + h_pre[u]).'''
    return joint_output(model, joint_cells(H_enc, H_pre))


def _softmax_row(z):
    e = np.exp(z - np.max(z))
    return e / np.sum(e)


def posterior(lattice, t, u):
    '''softmax(z[t, u]) as a plain array.'''
    data = lattice.data if isinstance(lattice, Tensor) else np.asarray(lattice)
    if data.ndim != 3 or not (0 <= t < data.shape[0]) or not (0 <= u < data.shape[1]):
        raise TransducerError("Lattice index ({}, {}) out of range for shape {}".format(t, u, data.shape))
    return _softmax_row(data[t, u])


def forward(model, features, history):
    '''Unadapted lattice for (features, history).'''
    return join(model, encode_audio(model, features), predict(model, history))
