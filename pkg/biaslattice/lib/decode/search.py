import numpy as np

from ..numerics import ops
from ..exceptions import TransducerError
from ..tokenizer import BLANK_ID, decode as detokenize
from ..transducer import encode_audio, pred_step, pred_initial_state, joint_output
from ..adapters import bias
from .trie import sf_step, sf_finalize

'''
Frame-synchronous greedy and beam search over the (optionally adapted)
transducer, with optional shallow fusion against a BoostTrie.
'''

__all__ = ['Hypothesis', 'Scorer', 'greedy_decode', 'beam_decode', 'nbest_record',
           'MAX_SYMBOLS_PER_FRAME', 'MAX_SYMBOLS']

MAX_SYMBOLS_PER_FRAME = 10
MAX_SYMBOLS = 200


class Hypothesis(object):
    __slots__ = ['tokens', 'am_score', 'sf_score', 'sf_state']

    def __init__(self, tokens, am_score, sf_score=0.0, sf_state=None):
        self.tokens = tokens
        self.am_score = am_score
        self.sf_score = sf_score
        self.sf_state = sf_state

    @property
    def score(self):
        return self.am_score + self.sf_score

    def __repr__(self):
        return 'Hypothesis({}, {:.4f})'.format(list(self.tokens), self.score)


class Scorer(object):
    '''
    Per-utterance posterior source.  Encoder rows are computed once;
    prediction rows are cached by token prefix so hypotheses sharing a
    prefix share the prediction-network state.  Adaptation for the
    active query variant is applied row by row.
    '''
    def __init__(self, model, features, adapters=None, Ce=None):
        self.model = model
        self.adapters = adapters
        self.Ce = Ce
        self.sites = adapters.variant.sites if adapters is not None else ()
        if adapters is not None and Ce is None:
            raise TransducerError("Adapted decoding needs an encoded catalog")
        H = encode_audio(model, features)
        if 'enc' in self.sites:
            b, _ = bias(adapters.adapters['enc'], H, Ce)
            H = ops.add(H, b)
        self.enc = H
        self._pred = {}

    @property
    def frames(self):
        return self.enc.shape[0]

    def _pred_row(self, tokens):
        hit = self._pred.get(tokens)
        if hit is not None:
            return hit
        if tokens:
            _, state = self._pred_row(tokens[:-1])
            row, state = pred_step(self.model, tokens[-1], state)
        else:
            row, state = pred_step(self.model, None, pred_initial_state(self.model))
        if 'pred' in self.sites:
            b, _ = bias(self.adapters.adapters['pred'], row, self.Ce)
            row = ops.add(row, b)
        self._pred[tokens] = (row, state)
        return row, state

    def logprobs(self, t, tokens):
        row, _ = self._pred_row(tokens)
        cell = ops.add(ops.slice(self.enc, t), row)
        if 'joint' in self.sites:
            b, _ = bias(self.adapters.adapters['joint'], cell, self.Ce)
            cell = ops.add(cell, b)
        z = joint_output(self.model, cell).data
        shifted = z - np.max(z)
        return shifted - np.log(np.sum(np.exp(shifted)))


def greedy_decode(model, features, adapters=None, Ce=None):
    '''
    At each frame take the argmax repeatedly: a non-blank is emitted
    and the frame is re-scored, blank moves to the next frame.  At most
    MAX_SYMBOLS_PER_FRAME emissions per frame and MAX_SYMBOLS overall.
    '''
    scorer = Scorer(model, features, adapters, Ce)
    tokens = ()
    for t in range(scorer.frames):
        for _ in range(MAX_SYMBOLS_PER_FRAME):
            if len(tokens) >= MAX_SYMBOLS:
                break
            k = int(np.argmax(scorer.logprobs(t, tokens)))
            if k == BLANK_ID:
                break
            tokens = tokens + (k,)
    return list(tokens)


def _extend(hyp, k, logp, sf):
    if sf is None:
        return Hypothesis(hyp.tokens + (k,), hyp.am_score + logp)
    state, delta, _ = sf_step(sf, hyp.sf_state, k)
    return Hypothesis(hyp.tokens + (k,), hyp.am_score + logp, hyp.sf_score + delta, state)


def _merge(B, hyp):
    other = B.get(hyp.tokens)
    if other is None:
        B[hyp.tokens] = hyp
    else:
        # same tokens imply the same shallow-fusion trace
        other.am_score = np.logaddexp(other.am_score, hyp.am_score)


def _top(hyps, beam):
    return sorted(hyps, key=lambda h: (-h.score, h.tokens))[:beam]


def beam_decode(model, features, adapters=None, Ce=None, sf=None, beam=4):
    '''
    Frame-synchronous beam search with prefix merging.  Within a frame,
    hypotheses alternate between blank extension (which moves them to
    the next frame's beam) and non-blank extension, the combined
    candidates being pruned to the beam width at every step.  The last
    allowed step of a frame is blank-only.  Returns the n-best list
    sorted by score, ties going to lower token ids.
    '''
    if beam < 1:
        raise TransducerError("Beam width must be >= 1 (got {})".format(beam))
    scorer = Scorer(model, features, adapters, Ce)
    start = Hypothesis((), 0.0, 0.0, sf.initial() if sf is not None else None)
    B = [start]
    for t in range(scorer.frames):
        A = B
        nextB = {}
        for step in range(MAX_SYMBOLS_PER_FRAME + 1):
            cands = []
            for h in A:
                logp = scorer.logprobs(t, h.tokens)
                blank = Hypothesis(h.tokens, h.am_score + logp[BLANK_ID], h.sf_score, h.sf_state)
                cands.append((blank.score, BLANK_ID, blank))
                if step == MAX_SYMBOLS_PER_FRAME or len(h.tokens) >= MAX_SYMBOLS:
                    continue
                for k in np.argsort(-logp[1:], kind='stable')[:beam] + 1:
                    nh = _extend(h, int(k), logp[k], sf)
                    cands.append((nh.score, int(k), nh))
            cands.sort(key=lambda c: (-c[0], c[1]))
            A = []
            for _, k, nh in cands[:beam]:
                if k == BLANK_ID:
                    _merge(nextB, nh)
                else:
                    A.append(nh)
            if not A:
                break
        B = _top(nextB.values(), beam)
    if sf is not None:
        for h in B:
            h.sf_score += sf_finalize(sf, h.sf_state)
    return _top(B, beam)


def nbest_record(utt_id, hyps, vocab):
    return {
        'utt_id': utt_id,
        'hyps': [{'text': detokenize(vocab, h.tokens), 'score': float(h.score),
                  'tokens': [int(k) for k in h.tokens]} for h in hyps],
    }
