import threading

import numpy as np
import networkx as nx

from ..exceptions import GraphError

'''
Dense float64 tensors and a define-by-run graph for reverse-mode
differentiation.  Ops record themselves into whichever Graph is active
on the current thread; with no active graph they just compute.
'''

__all__ = ['Tensor', 'Graph', 'OpRecord', 'backward', 'record', 'current_graph']

_local = threading.local()


def _graph_stack():
    stack = getattr(_local, 'stack', None)
    if stack is None:
        stack = _local.stack = []
    return stack


def current_graph():
    '''Return the innermost active Graph on this thread, or None.'''
    stack = _graph_stack()
    if stack:
        return stack[-1]
    return None


class Tensor(object):
    __slots__ = ['data', 'requires_grad', 'grad', 'name']

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad = self.grad + g

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        label = self.name or 'Tensor'
        return '{}(shape={}, requires_grad={})'.format(label, self.shape, self.requires_grad)


class OpRecord(object):
    __slots__ = ['kind', 'inputs', 'output', 'backward']

    def __init__(self, kind, inputs, output, backward):
        self.kind = kind
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Graph(object):
    '''
    Topologically ordered record of the ops run while this graph was
    active.  Use as a context manager:

        with Graph() as g:
            loss = f(x)
        backward(g, loss)
    '''
    def __init__(self):
        self.nodes = []
        self._index = {}

    def __enter__(self):
        _graph_stack().append(self)
        return self

    def __exit__(self, *exc):
        stack = _graph_stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, tensor):
        return id(tensor) in self._index

    def add(self, kind, inputs, output, backward):
        self._index[id(output)] = len(self.nodes)
        self.nodes.append(OpRecord(kind, tuple(inputs), output, backward))

    def index_of(self, tensor):
        return self._index.get(id(tensor))

    def to_networkx(self):
        '''
        Node i is the i-th op record; an edge i->j means op j consumed
        the output of op i.  Leaves (parameters, constants) don't appear.
        '''
        dg = nx.DiGraph()
        for i, node in enumerate(self.nodes):
            dg.add_node(i, kind=node.kind)
            for t in node.inputs:
                j = self._index.get(id(t))
                if j is not None:
                    dg.add_edge(j, i)
        return dg

    def validate(self):
        '''Check the graph is acyclic and every input precedes its consumer.'''
        for i, node in enumerate(self.nodes):
            for t in node.inputs:
                j = self._index.get(id(t))
                if j is not None and j >= i:
                    raise GraphError("Op {} ({}) consumes output of later op {}".format(i, node.kind, j))
        if not nx.is_directed_acyclic_graph(self.to_networkx()):
            raise GraphError("Graph contains a cycle")


def record(kind, inputs, data, backward):
    '''
    Wrap op output data in a Tensor and, if a graph is active, record
    the op.  backward(g) must return one gradient (or None) per input.
    '''
    out = Tensor(data)
    out.requires_grad = any(t.requires_grad for t in inputs)
    g = current_graph()
    if g is not None:
        g.add(kind, inputs, out, backward)
    return out


def backward(graph, loss):
    '''
    Fill .grad of every requires_grad tensor reachable from loss.
    Gradients accumulate additively, both across fan-out within the
    graph and across calls (callers zero parameter grads between
    steps).
    '''
    if loss.size != 1:
        raise GraphError("Loss must be a scalar, got shape {}".format(tuple(loss.shape)))
    end = graph.index_of(loss)
    if end is None:
        raise GraphError("Loss tensor was not produced in this graph")

    pending = {id(loss): np.ones_like(loss.data)}
    leaves = {}
    for node in reversed(graph.nodes[:end + 1]):
        g = pending.pop(id(node.output), None)
        if g is None:
            continue
        node.output.accumulate(g)
        if not node.output.requires_grad:
            continue
        in_grads = node.backward(g)
        for t, gi in zip(node.inputs, in_grads):
            if gi is None or not t.requires_grad:
                continue
            key = id(t)
            if key in pending:
                pending[key] = pending[key] + gi
            else:
                pending[key] = gi
            if key not in graph._index:
                leaves[key] = t

    for key, g in pending.items():
        t = leaves.get(key)
        if t is not None:
            t.accumulate(g)
