import numpy as np

from .tensor import Tensor, record
from ..exceptions import ShapeError

'''
Differentiable ops over Tensor.  Shapes are never broadcast: two-operand
elementwise ops need identical shapes, and rows are aligned explicitly
with expand().  Every op raises ShapeError naming itself and the
offending shapes.
'''

OP_KINDS = ('matmul', 'add', 'mul', 'tanh', 'sigmoid', 'softmax', 'log_softmax',
            'concat', 'slice', 'sum', 'scale', 'transpose', 'reshape', 'expand',
            'gather_rows')


def as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def matmul(a, b):
    '''
    a: (n,), (k, n) or (..., n); b: (n, m).  Leading axes of a are
    treated as a batch.
    '''
    if b.ndim != 2 or a.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise ShapeError('matmul', a.shape, b.shape)
    adata, bdata = a.data, b.data
    out = adata @ bdata

    def _backward(g):
        ga = g @ bdata.T
        if adata.ndim == 1:
            gb = np.outer(adata, g)
        else:
            gb = adata.reshape(-1, adata.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb
    return record('matmul', (a, b), out, _backward)


def add(a, b):
    if a.shape != b.shape:
        raise ShapeError('add', a.shape, b.shape)

    def _backward(g):
        return g, g
    return record('add', (a, b), a.data + b.data, _backward)


def mul(a, b):
    if a.shape != b.shape:
        raise ShapeError('elementwise-mul', a.shape, b.shape)
    adata, bdata = a.data, b.data

    def _backward(g):
        return g * bdata, g * adata
    return record('mul', (a, b), adata * bdata, _backward)


def scale(x, c):
    c = float(c)

    def _backward(g):
        return (g * c,)
    return record('scale', (x,), x.data * c, _backward)


def sub(a, b):
    return add(a, scale(b, -1.0))


def tanh(x):
    y = np.tanh(x.data)

    def _backward(g):
        return (g * (1.0 - y * y),)
    return record('tanh', (x,), y, _backward)


def sigmoid(x):
    y = 0.5 * (np.tanh(0.5 * x.data) + 1.0)

    def _backward(g):
        return (g * y * (1.0 - y),)
    return record('sigmoid', (x,), y, _backward)


def _softmax(data, axis):
    shifted = data - np.max(data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax(x, axis=-1):
    if x.ndim == 0 or x.shape[axis] == 0:
        raise ShapeError('softmax', x.shape)
    y = _softmax(x.data, axis)

    def _backward(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)
    return record('softmax', (x,), y, _backward)


def log_softmax(x):
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ShapeError('log_softmax', x.shape)
    shifted = x.data - np.max(x.data, axis=-1, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    y = shifted - lse
    p = np.exp(y)

    def _backward(g):
        return (g - p * np.sum(g, axis=-1, keepdims=True),)
    return record('log_softmax', (x,), y, _backward)


def concat(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise ShapeError('concat')
    first = tensors[0].shape
    ax = axis % len(first) if first else 0
    for t in tensors[1:]:
        if len(t.shape) != len(first) or \
           any(d1 != d2 for i, (d1, d2) in enumerate(zip(first, t.shape)) if i != ax):
            raise ShapeError('concat', *[t.shape for t in tensors])
    sizes = [t.shape[ax] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=ax)

    def _backward(g):
        splits = np.cumsum(sizes)[:-1]
        return tuple(np.split(g, splits, axis=ax))
    return record('concat', tensors, out, _backward)


def slice(x, index):
    '''
    Basic (non-fancy) indexing: index is an int, a python slice, or a
    tuple of those.
    '''
    if not isinstance(index, tuple):
        index = (index,)
    if len(index) > x.ndim:
        raise ShapeError('slice', x.shape)
    try:
        out = x.data[index]
    except IndexError:
        raise ShapeError('slice', x.shape)
    shape = x.shape

    def _backward(g):
        gx = np.zeros(shape)
        gx[index] = g
        return (gx,)
    return record('slice', (x,), np.array(out), _backward)


def sum(x, axis=None):
    shape = x.shape
    out = np.sum(x.data, axis=axis)

    def _backward(g):
        if axis is None:
            return (np.full(shape, float(g)),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)
    return record('sum', (x,), out, _backward)


def transpose(x, axes=None):
    '''2-D transpose, or an explicit axis permutation for N-D tensors.'''
    if axes is None:
        if x.ndim != 2:
            raise ShapeError('transpose', x.shape)
        axes = (1, 0)
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError('transpose', x.shape, axes)
    inverse = tuple(np.argsort(axes))

    def _backward(g):
        return (np.transpose(g, inverse),)
    return record('transpose', (x,), np.transpose(x.data, axes).copy(), _backward)


def reshape(x, shape):
    shape = tuple(shape)
    if int(np.prod(shape)) != x.size:
        raise ShapeError('reshape', x.shape, shape)
    orig = x.shape

    def _backward(g):
        return (g.reshape(orig),)
    return record('reshape', (x,), x.data.reshape(shape).copy(), _backward)


def expand(x, n):
    '''Tile x along a new leading axis of size n.'''
    if n < 1:
        raise ShapeError('expand', x.shape, (n,))
    out = np.broadcast_to(x.data, (n,) + x.shape).copy()

    def _backward(g):
        return (np.sum(g, axis=0),)
    return record('expand', (x,), out, _backward)


def gather_rows(table, ids):
    '''Embedding lookup: rows of a 2-D table by integer id.'''
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if table.ndim != 2 or (ids.size and (ids.min() < 0 or ids.max() >= table.shape[0])):
        raise ShapeError('gather_rows', table.shape, ids.shape)
    shape = table.shape

    def _backward(g):
        gt = np.zeros(shape)
        np.add.at(gt, ids, g)
        return (gt,)
    return record('gather_rows', (table,), table.data[ids], _backward)
