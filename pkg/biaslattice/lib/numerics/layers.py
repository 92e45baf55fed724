import numpy as np

from .tensor import Tensor
from . import ops

'''
Parameter initializers and the recurrent/dense building blocks shared by
the transducer and the catalog encoder.  Convention: x @ W with W of
shape (in, out); LSTM gate order is (i, f, g, o).
'''


def uniform(rng, shape, fan_in, name=None):
    bound = 1.0 / np.sqrt(max(1, fan_in))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


def zeros(shape, name=None):
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def lstm_params(rng, in_dim, units, prefix):
    '''Return {prefix.W, prefix.b}; forget-gate bias starts at +1.'''
    W = uniform(rng, (in_dim + units, 4 * units), in_dim + units, name=prefix + '.W')
    b = np.zeros(4 * units)
    b[units:2 * units] = 1.0
    return {prefix + '.W': W, prefix + '.b': Tensor(b, requires_grad=True, name=prefix + '.b')}


def lstm_param_count(in_dim, units):
    return (in_dim + units) * 4 * units + 4 * units


def linear(x, W, b=None):
    '''x: (n,) or (k, n).  The bias row is tiled explicitly.'''
    y = ops.matmul(x, W)
    if b is None:
        return y
    if x.ndim == 1:
        return ops.add(y, b)
    return ops.add(y, ops.expand(b, y.shape[0]))


def lstm_step(W, b, x, h, c):
    units = h.shape[0]
    z = ops.add(ops.matmul(ops.concat([x, h]), W), b)
    i = ops.sigmoid(ops.slice(z, slice(0, units)))
    f = ops.sigmoid(ops.slice(z, slice(units, 2 * units)))
    g = ops.tanh(ops.slice(z, slice(2 * units, 3 * units)))
    o = ops.sigmoid(ops.slice(z, slice(3 * units, 4 * units)))
    c = ops.add(ops.mul(f, c), ops.mul(i, g))
    h = ops.mul(o, ops.tanh(c))
    return h, c


def zero_state(units):
    return Tensor(np.zeros(units)), Tensor(np.zeros(units))


def lstm_layer(W, b, xs, units, reverse=False):
    '''Run an LSTM over a list of 1-D inputs; returns the list of hidden states
    in input order.'''
    h, c = zero_state(units)
    order = range(len(xs) - 1, -1, -1) if reverse else range(len(xs))
    hs = [None] * len(xs)
    for t in order:
        h, c = lstm_step(W, b, xs[t], h, c)
        hs[t] = h
    return hs


def bilstm_final(fwd, bwd, xs, units):
    '''
    Forward-final state concatenated with backward-final state (the
    backward LSTM's state after reading xs[0]).  fwd and bwd are (W, b).
    '''
    hf = lstm_layer(fwd[0], fwd[1], xs, units)
    hb = lstm_layer(bwd[0], bwd[1], xs, units, reverse=True)
    return ops.concat([hf[-1], hb[0]])
