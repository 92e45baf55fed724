from collections import namedtuple

import networkx as nx

from ..exceptions import CatalogError
from ..tokenizer import encode

'''
Word-piece boosting trie for shallow fusion.  Arcs carry pushed
weights so a partial entity match earns partial credit early; the arc
entering a final node settles the boost accumulated from the root to
exactly lambda, and leaving the trie before a final node revokes
whatever was earned since the last final node.
'''

__all__ = ['BoostTrie', 'SFState', 'build_boost_trie', 'sf_step', 'sf_finalize']

ROOT = 0

SFState = namedtuple('SFState', ['node', 'pending'])


class BoostTrie(object):
    '''
    Shared-prefix trie over word-piece id sequences.  The structure
    lives in a networkx DiGraph (node attrs: final, entity, depth;
    edge attrs: token, weight); a child index keyed by token gives
    constant-time transitions during decoding.
    '''
    def __init__(self, lam):
        if lam < 0:
            raise CatalogError("Boost weight must be non-negative (got {})".format(lam))
        self.lam = float(lam)
        self.graph = nx.DiGraph()
        self.graph.add_node(ROOT, final=False, entity=None, depth=0)
        self._children = {ROOT: {}}

    @property
    def root(self):
        return ROOT

    def __len__(self):
        return self.graph.number_of_nodes()

    def initial(self):
        return SFState(ROOT, 0.0)

    def is_final(self, node):
        return self.graph.nodes[node]['final']

    def arc(self, node, token):
        '''(child, weight) for the arc out of node labelled token, or None.'''
        child = self._children[node].get(token)
        if child is None:
            return None
        return child, self.graph.edges[node, child]['weight']

    def insert(self, ids, entity):
        if not ids:
            raise CatalogError("Can't insert an empty entity into the boosting trie")
        node = ROOT
        for depth, token in enumerate(ids, 1):
            child = self._children[node].get(token)
            if child is None:
                child = self.graph.number_of_nodes()
                self.graph.add_node(child, final=False, entity=None, depth=depth)
                self.graph.add_edge(node, child, token=token, weight=0.0)
                self._children[child] = {}
                self._children[node][token] = child
            node = child
        self.graph.nodes[node]['final'] = True
        self.graph.nodes[node]['entity'] = entity

    def _remaining(self, node):
        '''Arc counts from node down to each final node below it.'''
        out = []
        for f in nx.descendants(self.graph, node):
            if self.graph.nodes[f]['final']:
                out.append(self.graph.nodes[f]['depth'] - self.graph.nodes[node]['depth'])
        return out

    def push_weights(self):
        '''
        Top-down: a non-final arc p->c gets the max over entities below
        it of (lambda - boost so far) / (arcs left to that entity); an arc
        into a final node gets exactly what's left of lambda.
        '''
        cum = {ROOT: 0.0}
        for p, c in nx.bfs_edges(self.graph, ROOT):
            left = self.lam - cum[p]
            if self.graph.nodes[c]['final']:
                w = left
            else:
                w = max(left / (n + 1) for n in self._remaining(c))
            self.graph.edges[p, c]['weight'] = w
            cum[c] = cum[p] + w

    def validate(self):
        '''Every node is reachable from the root and reaches a final node.'''
        reach = nx.descendants(self.graph, ROOT) | {ROOT}
        if len(reach) != len(self):
            raise CatalogError("Boosting trie has unreachable nodes")
        finals = [n for n, final in self.graph.nodes(data='final') if final]
        coreach = set(finals)
        for f in finals:
            coreach |= nx.ancestors(self.graph, f)
        if len(self) > 1 and coreach != set(self.graph.nodes):
            raise CatalogError("Boosting trie has dead-end nodes")

    def path_weight(self, ids):
        '''Sum of arc weights along ids from the root (None if ids leave the trie).'''
        node, total = ROOT, 0.0
        for token in ids:
            a = self.arc(node, token)
            if a is None:
                return None
            node, total = a[0], total + a[1]
        return total


def build_boost_trie(catalog, vocab, lam):
    trie = BoostTrie(lam)
    for e in catalog:
        if not e.text:
            raise CatalogError("Empty entity in boosting catalog")
        enc = encode(vocab, e.text)
        if enc.unk_positions or not enc.ids:
            raise CatalogError("Entity '{}' doesn't tokenize without unk".format(e.text))
        trie.insert(enc.ids, e.text)
    trie.push_weights()
    trie.validate()
    return trie


def _advance(trie, node, pending, token):
    a = trie.arc(node, token)
    if a is None:
        return None
    child, w = a
    pending = 0.0 if trie.is_final(child) else pending + w
    return SFState(child, pending), w


def sf_step(trie, state, token):
    '''
    Consume one non-blank token.  Returns (state', delta, pending').
    On failure the pending boost is revoked and the token is retried
    once from the root.
    '''
    hit = _advance(trie, state.node, state.pending, token)
    if hit is not None:
        newstate, w = hit
        return newstate, w, newstate.pending
    delta = -state.pending
    if state.node != ROOT:
        retry = _advance(trie, ROOT, 0.0, token)
        if retry is not None:
            newstate, w = retry
            return newstate, delta + w, newstate.pending
    return SFState(ROOT, 0.0), delta, 0.0


def sf_finalize(trie, state):
    '''Score delta at end of hypothesis: revoke any unfinished match.'''
    return -state.pending
