import itertools
from math import comb

import numpy as np

from ..numerics import Tensor, record
from ..exceptions import TransducerError, InstanceTooLarge
from ..tokenizer import BLANK_ID

'''
RNN-T negative log-likelihood over all monotonic alignments of T' frames
and U target tokens.  The forward variables are computed in log space;
the backward pass runs the beta recursion and returns the gradient
w.r.t. the logits directly, so the whole loss is a single graph op.
'''

__all__ = ['rnnt_loss', 'rnnt_loss_brute', 'path_count', 'enumerate_paths', 'alphas', 'betas']

MAX_BRUTE_PATHS = 10 ** 6


def _log_softmax(z):
    shifted = z - np.max(z, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def _check(z, target):
    if z.ndim != 3:
        raise TransducerError("Lattice must be (T', U+1, V), got shape {}".format(z.shape))
    T, U1, V = z.shape
    target = [int(y) for y in target]
    if T == 0:
        raise TransducerError("Lattice has no frames")
    if U1 != len(target) + 1:
        raise TransducerError("Lattice has {} prediction rows for a target of length {}".format(U1, len(target)))
    for y in target:
        if y == BLANK_ID:
            raise TransducerError("Target sequence contains blank")
        if y < 0 or y >= V:
            raise TransducerError("Target id {} out of range for V={}".format(y, V))
    return target


def alphas(logp, target):
    '''alpha[t, u] = log prob of reaching (t, u) having emitted target[:u].'''
    T, U1, _ = logp.shape
    alpha = np.full((T, U1), -np.inf)
    alpha[0, 0] = 0.0
    for t in range(T):
        for u in range(U1):
            if t == 0 and u == 0:
                continue
            stay = alpha[t - 1, u] + logp[t - 1, u, BLANK_ID] if t > 0 else -np.inf
            emit = alpha[t, u - 1] + logp[t, u - 1, target[u - 1]] if u > 0 else -np.inf
            alpha[t, u] = np.logaddexp(stay, emit)
    return alpha


def betas(logp, target):
    '''beta[t, u] = log prob of completing the utterance from (t, u).'''
    T, U1, _ = logp.shape
    beta = np.full((T, U1), -np.inf)
    beta[T - 1, U1 - 1] = logp[T - 1, U1 - 1, BLANK_ID]
    for t in range(T - 1, -1, -1):
        for u in range(U1 - 1, -1, -1):
            if t == T - 1 and u == U1 - 1:
                continue
            stay = beta[t + 1, u] + logp[t, u, BLANK_ID] if t < T - 1 else -np.inf
            emit = beta[t, u + 1] + logp[t, u, target[u]] if u < U1 - 1 else -np.inf
            beta[t, u] = np.logaddexp(stay, emit)
    return beta


def rnnt_loss(lattice, target):
    '''
    -log P(target | lattice), a scalar Tensor differentiable w.r.t. the
    lattice logits.
    '''
    if not isinstance(lattice, Tensor):
        lattice = Tensor(lattice)
    z = lattice.data
    target = _check(z, target)
    T, U1, V = z.shape
    logp = _log_softmax(z)
    alpha = alphas(logp, target)
    loglik = alpha[T - 1, U1 - 1] + logp[T - 1, U1 - 1, BLANK_ID]

    def _backward(g):
        beta = betas(logp, target)
        glogp = np.zeros_like(logp)
        # blank transitions (t, u) -> (t+1, u), plus the final blank
        nxt = np.full((T, U1), -np.inf)
        nxt[:-1, :] = beta[1:, :]
        nxt[T - 1, U1 - 1] = 0.0
        glogp[:, :, BLANK_ID] = -np.exp(alpha + logp[:, :, BLANK_ID] + nxt - loglik)
        for u in range(U1 - 1):
            y = target[u]
            glogp[:, u, y] -= np.exp(alpha[:, u] + logp[:, u, y] + beta[:, u + 1] - loglik)
        p = np.exp(logp)
        gz = glogp - p * np.sum(glogp, axis=-1, keepdims=True)
        return (float(g) * gz,)
    return record('rnnt_loss', (lattice,), np.array(-loglik), _backward)


def path_count(T, U):
    '''Number of alignments: the final blank is fixed, the other T'-1
    blanks interleave freely with the U labels.'''
    return comb(T - 1 + U, U)


def enumerate_paths(T, U):
    '''
    Yield each alignment as a list of (t, u, symbol_is_blank) steps,
    final blank included.
    '''
    n = T - 1 + U
    for label_pos in itertools.combinations(range(n), U):
        label_pos = set(label_pos)
        t = u = 0
        steps = []
        for k in range(n):
            if k in label_pos:
                steps.append((t, u, False))
                u += 1
            else:
                steps.append((t, u, True))
                t += 1
        steps.append((t, u, True))
        yield steps


def rnnt_loss_brute(lattice, target):
    '''
    Oracle: enumerate every lattice path and sum path probabilities in
    plain probability space.  Only for tiny instances.
    '''
    z = lattice.data if isinstance(lattice, Tensor) else np.asarray(lattice, dtype=np.float64)
    target = _check(z, target)
    T, U1, _ = z.shape
    U = U1 - 1
    if path_count(T, U) > MAX_BRUTE_PATHS:
        raise InstanceTooLarge("{} paths for T'={}, U={} is too many to enumerate".format(path_count(T, U), T, U))
    p = np.exp(_log_softmax(z))
    total = 0.0
    for steps in enumerate_paths(T, U):
        prob = 1.0
        for t, u, is_blank in steps:
            prob *= p[t, u, BLANK_ID] if is_blank else p[t, u, target[u]]
        total += prob
    return -np.log(total)
